"""Minimal ``opt`` / ``llc`` work-alikes backed by the LLVM C API.

Distributions often ship clang and lld without the standalone LLVM tools.
The shared ``libLLVM`` that clang links against still exports the new pass
manager (``LLVMRunPasses``) and the code generator, which is all the
toolchain driver needs.  Each invocation is a separate process because
``LLVMParseCommandLineOptions`` may only be called once.

Usage mirrors the real tools::

    python -m zkopt.toolchain.llvmtool opt -passes=licm,gvn [-inline-threshold=N] in.bc -o out.bc
    python -m zkopt.toolchain.llvmtool llc -march=riscv32 -mattr=+m [-O2] -filetype=obj in.bc -o out.o
"""

from __future__ import annotations

import ctypes
import ctypes.util
import glob
import os
import sys

_c_p = ctypes.c_void_p
_str = ctypes.c_char_p

# LLVMCodeGenFileType
_OBJECT_FILE = 1
_ASSEMBLY_FILE = 0
# LLVMRelocMode / LLVMCodeModel
_RELOC_STATIC = 1
_CODE_MODEL_DEFAULT = 0


def _find_libllvm() -> str:
    env = os.environ.get("ZKOPT_LIBLLVM")
    if env:
        return env
    candidates = []
    for pattern in ("/usr/lib/x86_64-linux-gnu/libLLVM-*.so*", "/usr/lib/llvm-*/lib/libLLVM*.so*",
                    "/usr/lib64/libLLVM*.so*", "/usr/lib/libLLVM*.so*"):
        candidates.extend(glob.glob(pattern))
    # prefer the library clang itself was built against
    clang_major = os.environ.get("ZKOPT_LLVM_MAJOR", "14")
    candidates.sort(key=lambda p: (f"-{clang_major}" not in p, p))
    if candidates:
        return candidates[0]
    found = ctypes.util.find_library("LLVM")
    if found:
        return found
    raise OSError("libLLVM shared library not found; set ZKOPT_LIBLLVM")


class _LLVM:
    def __init__(self, path: str):
        lib = ctypes.CDLL(path)
        self.lib = lib

        def fn(name, restype, *argtypes):
            f = getattr(lib, name)
            f.restype = restype
            f.argtypes = list(argtypes)
            setattr(self, name, f)

        fn("LLVMContextCreate", _c_p)
        fn("LLVMCreateMemoryBufferWithContentsOfFile", ctypes.c_int, _str, ctypes.POINTER(_c_p),
           ctypes.POINTER(_c_p))
        fn("LLVMParseIRInContext", ctypes.c_int, _c_p, _c_p, ctypes.POINTER(_c_p), ctypes.POINTER(_c_p))
        fn("LLVMWriteBitcodeToFile", ctypes.c_int, _c_p, _str)
        fn("LLVMPrintModuleToFile", ctypes.c_int, _c_p, _str, ctypes.POINTER(_c_p))
        fn("LLVMGetTarget", _str, _c_p)
        fn("LLVMGetTargetFromTriple", ctypes.c_int, _str, ctypes.POINTER(_c_p), ctypes.POINTER(_c_p))
        fn("LLVMCreateTargetMachine", _c_p, _c_p, _str, _str, _str, ctypes.c_int, ctypes.c_int, ctypes.c_int)
        fn("LLVMTargetMachineEmitToFile", ctypes.c_int, _c_p, _c_p, _str, ctypes.c_int, ctypes.POINTER(_c_p))
        fn("LLVMCreatePassBuilderOptions", _c_p)
        fn("LLVMPassBuilderOptionsSetVerifyEach", None, _c_p, ctypes.c_int)
        fn("LLVMRunPasses", _c_p, _c_p, _str, _c_p, _c_p)
        fn("LLVMGetErrorMessage", _c_p, _c_p)
        fn("LLVMDisposeErrorMessage", None, _c_p)
        fn("LLVMDisposeMessage", None, _c_p)
        fn("LLVMParseCommandLineOptions", None, ctypes.c_int, ctypes.POINTER(_str), _str)
        fn("LLVMVerifyModule", ctypes.c_int, _c_p, ctypes.c_int, ctypes.POINTER(_c_p))
        for part in ("TargetInfo", "Target", "TargetMC", "AsmPrinter", "AsmParser"):
            fn(f"LLVMInitializeRISCV{part}", None)
            getattr(self, f"LLVMInitializeRISCV{part}")()

    def message(self, ptr) -> str:
        if not ptr:
            return ""
        text = ctypes.cast(ptr, _str).value.decode(errors="replace")
        self.LLVMDisposeMessage(ptr)
        return text

    def load(self, path: str):
        ctx = self.LLVMContextCreate()
        buf, msg = _c_p(), _c_p()
        if self.LLVMCreateMemoryBufferWithContentsOfFile(path.encode(), ctypes.byref(buf), ctypes.byref(msg)):
            raise ToolError(f"cannot read {path}: {self.message(msg)}")
        mod = _c_p()
        if self.LLVMParseIRInContext(ctx, buf, ctypes.byref(mod), ctypes.byref(msg)):
            raise ToolError(f"cannot parse {path}: {self.message(msg)}")
        return mod

    def target_machine(self, triple: str, cpu: str, features: str, level: int):
        target, msg = _c_p(), _c_p()
        if self.LLVMGetTargetFromTriple(triple.encode(), ctypes.byref(target), ctypes.byref(msg)):
            raise ToolError(f"unknown target {triple!r}: {self.message(msg)}")
        return self.LLVMCreateTargetMachine(target, triple.encode(), cpu.encode(), features.encode(), level,
                                            _RELOC_STATIC, _CODE_MODEL_DEFAULT)


class ToolError(Exception):
    pass


def _split_args(argv):
    opts, positional, output = {}, [], None
    passthrough = []
    i = 0
    while i < len(argv):
        a = argv[i]
        if a == "-o":
            output = argv[i + 1]
            i += 2
            continue
        if a.startswith("-") and "=" in a:
            key, val = a.split("=", 1)
            opts[key] = val
            if key not in ("-passes", "-march", "-mattr", "-mcpu", "-filetype", "-mtriple"):
                passthrough.append(a)
        elif a.startswith("-O") and len(a) == 3:
            opts["-O"] = a[2]
        elif a.startswith("-"):
            passthrough.append(a)
        else:
            positional.append(a)
        i += 1
    if len(positional) != 1 or output is None:
        raise ToolError("expected exactly one input file and -o <output>")
    return opts, positional[0], output, passthrough


def _set_cl_options(llvm: _LLVM, tool: str, flags):
    if not flags:
        return
    args = [tool.encode()] + [f.encode() for f in flags]
    arr = (_str * len(args))(*args)
    llvm.LLVMParseCommandLineOptions(len(args), arr, None)


def run_opt(argv) -> int:
    opts, src, out, flags = _split_args(argv)
    llvm = _LLVM(_find_libllvm())
    _set_cl_options(llvm, "opt", flags)
    mod = llvm.load(src)
    passes = opts.get("-passes", "")
    if passes:
        triple = llvm.LLVMGetTarget(mod).decode() or "riscv32-unknown-elf"
        tm = llvm.target_machine(triple, "", "", 2)
        pbo = llvm.LLVMCreatePassBuilderOptions()
        llvm.LLVMPassBuilderOptionsSetVerifyEach(pbo, 1)
        err = llvm.LLVMRunPasses(mod, passes.encode(), tm, pbo)
        if err:
            raw = llvm.LLVMGetErrorMessage(err)
            text = ctypes.cast(raw, _str).value.decode(errors="replace")
            llvm.LLVMDisposeErrorMessage(raw)
            raise ToolError(text)
    msg = _c_p()
    if llvm.LLVMVerifyModule(mod, 2, ctypes.byref(msg)):
        raise ToolError(f"module verification failed: {llvm.message(msg)}")
    if out.endswith(".ll"):
        if llvm.LLVMPrintModuleToFile(mod, out.encode(), ctypes.byref(msg)):
            raise ToolError(llvm.message(msg))
    elif llvm.LLVMWriteBitcodeToFile(mod, out.encode()):
        raise ToolError(f"cannot write {out}")
    return 0


def run_llc(argv) -> int:
    opts, src, out, flags = _split_args(argv)
    llvm = _LLVM(_find_libllvm())
    _set_cl_options(llvm, "llc", flags)
    mod = llvm.load(src)
    march = opts.get("-march", "riscv32")
    triple = opts.get("-mtriple") or llvm.LLVMGetTarget(mod).decode() or f"{march}-unknown-elf"
    features = ",".join(f for f in opts.get("-mattr", "").split(",") if f)
    level = int(opts.get("-O", "2"))
    tm = llvm.target_machine(triple, opts.get("-mcpu", ""), features, level)
    kind = _ASSEMBLY_FILE if opts.get("-filetype", "obj") == "asm" else _OBJECT_FILE
    msg = _c_p()
    if llvm.LLVMTargetMachineEmitToFile(tm, mod, out.encode(), kind, ctypes.byref(msg)):
        raise ToolError(llvm.message(msg))
    return 0


def main(argv=None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    if not argv or argv[0] not in ("opt", "llc"):
        print("usage: llvmtool {opt|llc} ...", file=sys.stderr)
        return 2
    tool, rest = argv[0], argv[1:]
    try:
        return run_opt(rest) if tool == "opt" else run_llc(rest)
    except ToolError as exc:
        print(f"{tool}: error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
