"""Subprocess pipeline that turns (source, profile) into a static RV32IM ELF.

Stages: front-end to bitcode, optional middle-end pass pipeline, code
generation, static link against the bundled runtime.  Every command is an
argv template from :class:`ToolchainConfig`; a template element that is
exactly one of ``{level}``, ``{thresholds}``, ``{defines}`` or ``{inputs}``
expands to zero or more arguments, other placeholders are substituted in
place.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import shutil
import subprocess
import sys
import tempfile
import threading
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import yaml

from .profiles import LEVEL, SEQUENCE, OptProfile

log = logging.getLogger(__name__)

RUNTIME_DIR = Path(__file__).with_name("runtime")
TOOLCHAIN_ENV = "ZKOPT_TOOLCHAIN"
_LIST_PLACEHOLDERS = ("{level}", "{codegen_level}", "{thresholds}", "{defines}", "{inputs}")
_TARGET_FLAGS = ["--target=riscv32-unknown-elf", "-march=rv32im", "-mabi=ilp32", "-mno-relax",
                 "-ffreestanding", "-fno-builtin", "-nostdlib", "-fno-pic", "-fno-ident",
                 "-fno-asynchronous-unwind-tables", "-fno-unwind-tables"]


class ToolchainError(Exception):
    def __init__(self, message: str, log_text: str = ""):
        super().__init__(message)
        self.log = log_text


class ToolNotFound(ToolchainError):
    pass


class CompileFailed(ToolchainError):
    pass


class UnknownPass(CompileFailed):
    pass


def _which(*names: str) -> str:
    for n in names:
        path = shutil.which(n)
        if path:
            return path
    return names[0]


def _llvmtool(tool: str) -> list[str]:
    exe = _which(tool)
    if shutil.which(tool):
        return [exe]
    return [sys.executable, "-m", "zkopt.toolchain.llvmtool", tool]


@dataclass
class ToolchainConfig:
    frontend: list[str] = field(default_factory=lambda: [
        _which("clang", "clang-14"), *_TARGET_FLAGS, "-I{runtime}", "{defines}", "{level}",
        "-emit-llvm", "-c", "{input}", "-o", "{output}"])
    optimizer: list[str] = field(default_factory=lambda: [
        *_llvmtool("opt"), "-passes={passes}", "{thresholds}", "{input}", "-o", "{output}"])
    codegen: list[str] = field(default_factory=lambda: [
        *_llvmtool("llc"), "-march=riscv32", "-mattr=+m", "{codegen_level}", "-filetype=obj", "{input}", "-o", "{output}"])
    linker: list[str] = field(default_factory=lambda: [
        _which("ld.lld", "ld.lld-14"), "-m", "elf32lriscv", "-static", "-nostdlib", "--no-relax",
        "-T", "{linker_script}", "{inputs}", "-o", "{output}"])
    host_cc: list[str] = field(default_factory=lambda: [
        _which("cc", "gcc", "clang"), "-I{runtime}", "{defines}", "{level}", "{input}",
        "{runtime}/zkrt.c", "-o", "{output}"])
    runtime_dir: Path = RUNTIME_DIR
    # back-end level for baseline and pass-sequence builds (levels use their own)
    sequence_codegen: str = "O0"
    timeout: float = 120.0

    @classmethod
    def load(cls, path: str | Path | None = None) -> "ToolchainConfig":
        """Defaults, overridden by the file at ``path`` or ``$ZKOPT_TOOLCHAIN``."""
        path = path or os.environ.get(TOOLCHAIN_ENV)
        cfg = cls()
        if not path:
            return cfg
        data = yaml.safe_load(Path(path).read_text()) or {}
        for key, value in data.items():
            if not hasattr(cfg, key):
                raise ToolchainError(f"{path}: unknown toolchain key {key!r}")
            if key == "runtime_dir":
                value = Path(value)
            elif key == "sequence_codegen":
                value = str(value).lstrip("-")
                if value not in _CODEGEN_LEVEL:
                    raise ToolchainError(f"{path}: bad sequence_codegen {value!r}")
            elif key != "timeout":
                value = [str(v) for v in value]
            setattr(cfg, key, value)
        return cfg

    def fingerprint(self) -> str:
        blob = json.dumps([self.frontend, self.optimizer, self.codegen, self.linker, str(self.runtime_dir),
                           self.sequence_codegen])
        h = hashlib.sha256(blob.encode())
        # runtime sources are part of every link
        for name in ("zkrt.c", "zkrt.h", "link.ld"):
            path = Path(self.runtime_dir) / name
            if path.exists():
                h.update(path.read_bytes())
        return h.hexdigest()[:16]


@dataclass(frozen=True)
class SourceUnit:
    id: str
    path: Path
    defines: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "path", Path(self.path).resolve())
        d = self.defines.items() if isinstance(self.defines, Mapping) else self.defines
        object.__setattr__(self, "defines", tuple(sorted((str(k), str(v)) for k, v in d)))

    def digest(self) -> str:
        h = hashlib.sha256(self.path.read_bytes())
        h.update(json.dumps(self.defines).encode())
        return h.hexdigest()


@dataclass(frozen=True)
class Stage:
    name: str
    argv: tuple[str, ...]


@dataclass(frozen=True)
class BuildArtifact:
    elf: bytes = field(repr=False)
    hash: str
    log: str = field(repr=False)
    profile: str
    source: str

    @staticmethod
    def hash_of(elf: bytes) -> str:
        return hashlib.sha256(elf).hexdigest()


def expand_argv(template: Sequence[str], values: Mapping[str, object]) -> list[str]:
    out: list[str] = []
    for tok in template:
        if tok in _LIST_PLACEHOLDERS:
            out.extend(values.get(tok[1:-1], []))
        else:
            out.append(tok.format(**{k: v for k, v in values.items() if not isinstance(v, list)}))
    return out


def level_args(profile: OptProfile) -> list[str]:
    if profile.kind == LEVEL:
        args = [f"-{profile.level}"]
        for name, value in profile.thresholds:
            args += ["-mllvm", f"-{name}={value}"]
        if profile.lto:
            args.append("-flto")
        return args
    # no middle-end work from the front-end; keep functions optimizable later
    return ["-O0", "-Xclang", "-disable-O0-optnone"]


_CODEGEN_LEVEL = {"O0": "-O0", "O1": "-O1", "O2": "-O2", "O3": "-O3", "Os": "-O2", "Oz": "-O2"}


def codegen_args(profile: OptProfile, sequence_level: str = "O0") -> list[str]:
    """Back-end optimization level.

    Standard levels match the front-end the way clang does.  Baseline and
    pass-sequence builds use ``sequence_level`` (unoptimized by default, so
    the only optimization applied is the listed passes).
    """
    if profile.kind == LEVEL:
        return [_CODEGEN_LEVEL[profile.level]]
    return [_CODEGEN_LEVEL[sequence_level]]


class Toolchain:
    """Builds artifacts, caching front-end output and finished ELFs by content."""

    def __init__(self, config: ToolchainConfig | None = None, store: str | Path | None = None):
        self.config = config or ToolchainConfig()
        self._tmp = None
        if store is None:
            self._tmp = tempfile.TemporaryDirectory(prefix="zkopt-store-")
            store = self._tmp.name
        self.store = Path(store)
        self.store.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._memo: dict[str, BuildArtifact] = {}

    # -- command construction -------------------------------------------------

    def plan(self, source: SourceUnit, profile: OptProfile, workdir: str | Path = "WORK") -> list[Stage]:
        """The exact commands :meth:`compile` runs, without running them."""
        w = Path(workdir)
        cfg = self.config
        common = {"runtime": str(cfg.runtime_dir), "linker_script": str(cfg.runtime_dir / "link.ld"),
                  "defines": [f"-D{k}={v}" for k, v in source.defines]}
        stages = [Stage("frontend", tuple(expand_argv(cfg.frontend, {
            **common, "level": level_args(profile), "input": str(source.path), "output": str(w / "prog.bc")})))]
        current = w / "prog.bc"
        if profile.kind == SEQUENCE and profile.passes:
            stages.append(Stage("optimizer", tuple(expand_argv(cfg.optimizer, {
                **common, "passes": profile.pipeline_text(),
                "thresholds": [f"-{k}={v}" for k, v in profile.thresholds],
                "input": str(current), "output": str(w / "prog.opt.bc")}))))
            current = w / "prog.opt.bc"
        link_inputs = [str(current)]
        if not profile.lto:
            stages.append(Stage("codegen", tuple(expand_argv(cfg.codegen, {
                **common, "codegen_level": codegen_args(profile, cfg.sequence_codegen), "input": str(current),
                "output": str(w / "prog.o")}))))
            link_inputs = [str(w / "prog.o")]
        stages.append(Stage("link", tuple(expand_argv(cfg.linker, {
            **common, "inputs": link_inputs + [str(self.runtime_object())], "output": str(w / "prog.elf")}))))
        return stages

    # -- execution ------------------------------------------------------------

    def _exec(self, stage: Stage, log_lines: list[str], cwd: Path) -> None:
        log_lines.append("$ " + " ".join(stage.argv))
        try:
            proc = subprocess.run(stage.argv, cwd=cwd, capture_output=True, text=True,
                                  timeout=self.config.timeout)
        except FileNotFoundError as exc:
            raise ToolNotFound(f"{stage.name}: tool not found: {stage.argv[0]}", "\n".join(log_lines)) from exc
        except subprocess.TimeoutExpired:
            raise CompileFailed(f"{stage.name}: timed out", "\n".join(log_lines)) from None
        if proc.stdout:
            log_lines.append(proc.stdout.rstrip())
        if proc.stderr:
            log_lines.append(proc.stderr.rstrip())
        if proc.returncode != 0:
            text = "\n".join(log_lines)
            if stage.name == "optimizer" and "unknown pass name" in proc.stderr.lower():
                raise UnknownPass(f"optimizer rejected a pass name: {proc.stderr.strip()}", text)
            tail = proc.stderr.strip().splitlines()[-3:]
            raise CompileFailed(f"{stage.name} failed with exit code {proc.returncode}: " + " | ".join(tail), text)

    def runtime_object(self) -> Path:
        out = self.store / f"zkrt-{self.config.fingerprint()}.o"
        with self._lock:
            if out.exists():
                return out
            cfg = self.config
            lines: list[str] = []
            with tempfile.TemporaryDirectory(prefix="zkopt-rt-") as tmp:
                tmp = Path(tmp)
                fe = expand_argv(cfg.frontend, {"runtime": str(cfg.runtime_dir), "defines": [], "level": ["-O2"],
                                            "input": str(cfg.runtime_dir / "zkrt.c"), "output": str(tmp / "zkrt.bc")})
                cg = expand_argv(cfg.codegen, {"codegen_level": ["-O2"], "input": str(tmp / "zkrt.bc"),
                                           "output": str(tmp / "zkrt.o")})
                self._exec(Stage("frontend", tuple(fe)), lines, tmp)
                self._exec(Stage("codegen", tuple(cg)), lines, tmp)
                shutil.copyfile(tmp / "zkrt.o", out)
        return out

    def compile(self, source: SourceUnit, profile: OptProfile) -> BuildArtifact:
        key = hashlib.sha256(json.dumps(
            [source.digest(), profile.to_dict(), self.config.fingerprint()]).encode()).hexdigest()
        with self._lock:
            if key in self._memo:
                return self._memo[key]
        self.runtime_object()
        lines: list[str] = []
        with tempfile.TemporaryDirectory(prefix="zkopt-build-") as tmp:
            tmp = Path(tmp)
            stages = self.plan(source, profile, tmp)
            try:
                for stage in stages:
                    self._exec(stage, lines, tmp)
            except ToolchainError:
                (self.store / f"failed-{key[:16]}.log").write_text(lines and "\n".join(lines) or "")
                raise
            elf = (tmp / "prog.elf").read_bytes()
        digest = BuildArtifact.hash_of(elf)
        text = "\n".join(lines)
        (self.store / f"{digest}.elf").write_bytes(elf)
        (self.store / f"{digest}.log").write_text(text)
        art = BuildArtifact(elf, digest, text, profile.id, source.id)
        with self._lock:
            self._memo[key] = art
        log.debug("built %s [%s] -> %s", source.id, profile.id, digest[:12])
        return art

    def close(self):
        if self._tmp is not None:
            self._tmp.cleanup()
            self._tmp = None
