"""Deterministic RV32IM execution with the access bookkeeping cost models need.

Guest ABI (bare-metal subset):

* ``ecall`` with ``a7 = 93`` exits with status ``a0``;
* ``ecall`` with ``a7 = 64`` appends ``mem[a1 : a1 + a2]`` to the output
  buffer and returns ``a2`` in ``a0`` (the file descriptor in ``a0`` is
  ignored);
* ids registered in :attr:`MachineState.accelerators` call a host function
  and are charged a fixed cost by the cost model;
* returning from the entry point (jumping to :data:`HALT_ADDR`, the initial
  ``ra``) exits with status ``a0`` without retiring an instruction.

Every instruction is compiled once per program counter into a closure; the
closures are the only place instruction semantics live, and both :func:`step`
and the fast loop in :func:`run` call them.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import Counter
from dataclasses import dataclass, field
from typing import Callable

from .elf import LoadedImage
from .isa import (BRANCH, CLASSES, ECALL, LOAD, STORE, EmulationError, IllegalInstruction, Instruction,
                  decode)

M32 = 0xFFFFFFFF
CHUNK_BITS = 10
CHUNK_SIZE = 1 << CHUNK_BITS
HALT_ADDR = 0xFFFFFFF0
STACK_TOP = 0x80000000

SYS_EXIT = 93
SYS_WRITE = 64
MAX_WRITE = 1 << 20

MEMORY_READ, MEMORY_WRITE = "memory-read", "memory-write"
ENV_CALL, HALT = "env-call", "halt"
BRANCH_TAKEN, BRANCH_NOT_TAKEN = "branch-taken", "branch-not-taken"


class MisalignedAccess(EmulationError):
    pass


class OutOfImageFetch(EmulationError):
    pass


class UnknownEcall(EmulationError):
    pass


class MemoryFault(EmulationError):
    pass


class MachineHalted(EmulationError):
    pass


class CycleLimitExceeded(EmulationError):
    """Raised when the instruction limit is hit before the guest halts.

    The partial trace is attached so callers can still account it.
    """

    def __init__(self, trace: "RunTrace"):
        super().__init__(f"instruction limit reached after {trace.retired} instructions")
        self.trace = trace


class _Halt(Exception):
    pass


@dataclass(frozen=True)
class StepEvent:
    kind: str
    address: int | None = None
    width: int | None = None
    call_id: int | None = None


class Memory:
    """Sparse byte-addressable memory in 1 KB chunks; unwritten bytes read 0."""

    def __init__(self):
        self.chunks: dict[int, bytearray] = {}

    def _chunk(self, index: int) -> bytearray:
        c = self.chunks.get(index)
        if c is None:
            c = self.chunks[index] = bytearray(CHUNK_SIZE)
        return c

    def read(self, addr: int, size: int) -> bytes:
        out = bytearray()
        while size > 0:
            off = addr & (CHUNK_SIZE - 1)
            n = min(size, CHUNK_SIZE - off)
            c = self.chunks.get(addr >> CHUNK_BITS)
            out += c[off:off + n] if c is not None else bytes(n)
            addr = (addr + n) & M32
            size -= n
        return bytes(out)

    def write(self, addr: int, data: bytes) -> None:
        pos = 0
        while pos < len(data):
            off = addr & (CHUNK_SIZE - 1)
            n = min(len(data) - pos, CHUNK_SIZE - off)
            self._chunk(addr >> CHUNK_BITS)[off:off + n] = data[pos:pos + n]
            addr = (addr + n) & M32
            pos += n


class MachineState:
    def __init__(self, image: LoadedImage | None = None, *, stack_top: int = STACK_TOP,
                 accelerators: dict[int, Callable[["MachineState"], None]] | None = None):
        self.regs = [0] * 33  # slot 32 absorbs writes to x0
        self.pc = 0
        self.memory = Memory()
        self.retired = 0
        self.halted = False
        self.exit_code: int | None = None
        self.output = bytearray()
        self.accelerators = dict(accelerators or {})
        self.reads: set[int] = set()  # word indices (addr >> 2)
        self.writes: set[int] = set()
        self.ecalls: Counter = Counter()
        self.branches = [0, 0]  # taken, not taken
        self._code: dict[int, tuple] = {}
        self._instrs: list[Instruction] = []
        self._counts: list[int] = []
        if image is not None:
            self.boot(image, stack_top)

    def boot(self, image: LoadedImage, stack_top: int = STACK_TOP) -> None:
        for seg in image.segments:
            self.memory.write(seg.vaddr, seg.data)
        self.pc = image.entry
        self.regs[2] = stack_top & M32
        self.regs[1] = HALT_ADDR

    def reg(self, i: int) -> int:
        return self.regs[i] if i else 0

    def set_reg(self, i: int, value: int) -> None:
        if i:
            self.regs[i] = value & M32


def _signed(v: int) -> int:
    return v - ((v & 0x80000000) << 1)


def _div(a, b):
    if b == 0:
        return M32
    sa, sb = _signed(a), _signed(b)
    if sa == -0x80000000 and sb == -1:
        return a
    q = abs(sa) // abs(sb)
    return (-q if (sa < 0) != (sb < 0) else q) & M32


def _rem(a, b):
    if b == 0:
        return a
    sa, sb = _signed(a), _signed(b)
    if sa == -0x80000000 and sb == -1:
        return 0
    r = abs(sa) % abs(sb)
    return (-r if sa < 0 else r) & M32


def _divu(a, b):
    return M32 if b == 0 else a // b


def _remu(a, b):
    return a if b == 0 else a % b


_S = "(a - ((a & 0x80000000) << 1))"
_SB = "(b - ((b & 0x80000000) << 1))"
_R_EXPR = {
    "ADD": "(a + b) & 0xFFFFFFFF", "SUB": "(a - b) & 0xFFFFFFFF",
    "SLL": "(a << (b & 31)) & 0xFFFFFFFF", "SLT": f"int({_S} < {_SB})", "SLTU": "int(a < b)",
    "XOR": "a ^ b", "SRL": "a >> (b & 31)", "SRA": f"({_S} >> (b & 31)) & 0xFFFFFFFF",
    "OR": "a | b", "AND": "a & b",
    "MUL": "(a * b) & 0xFFFFFFFF", "MULH": f"(({_S} * {_SB}) >> 32) & 0xFFFFFFFF",
    "MULHSU": f"(({_S} * b) >> 32) & 0xFFFFFFFF", "MULHU": "(a * b) >> 32",
    "DIV": "_div(a, b)", "DIVU": "_divu(a, b)", "REM": "_rem(a, b)", "REMU": "_remu(a, b)",
}
_I_EXPR = {
    "ADDI": "(a + imm) & 0xFFFFFFFF", "SLTI": f"int({_S} < imm)", "SLTIU": "int(a < (imm & 0xFFFFFFFF))",
    "XORI": "(a ^ imm) & 0xFFFFFFFF", "ORI": "(a | imm) & 0xFFFFFFFF", "ANDI": "a & imm",
    "SLLI": "(a << imm) & 0xFFFFFFFF", "SRLI": "a >> imm", "SRAI": f"({_S} >> imm) & 0xFFFFFFFF",
}
_BR_EXPR = {
    "BEQ": "a == b", "BNE": "a != b", "BLT": f"{_S} < {_SB}", "BGE": f"{_S} >= {_SB}",
    "BLTU": "a < b", "BGEU": "a >= b",
}


def _factory(body: str, **env) -> Callable:
    src = "def make(regs, rd, rs1, rs2, imm, ctx, chunks):\n    def f(pc):\n" + body + "    return f\n"
    ns = {"_div": _div, "_divu": _divu, "_rem": _rem, "_remu": _remu,
          "MisalignedAccess": MisalignedAccess, **env}
    exec(compile(src, "<rv32im>", "exec"), ns)
    return ns["make"]


_MAKERS: dict[str, Callable] = {}
for _op, _e in _R_EXPR.items():
    _MAKERS[_op] = _factory(f"        a = regs[rs1]; b = regs[rs2]\n        regs[rd] = {_e}\n"
                            "        return pc + 4\n")
for _op, _e in _I_EXPR.items():
    _MAKERS[_op] = _factory(f"        a = regs[rs1]\n        regs[rd] = {_e}\n        return pc + 4\n")
for _op, _e in _BR_EXPR.items():
    _MAKERS[_op] = _factory(
        f"        a = regs[rs1]; b = regs[rs2]\n        if {_e}:\n            ctx.branches[0] += 1\n"
        "            if imm & 3:\n                raise MisalignedAccess(f'branch target 0x{(pc + imm) & 0xFFFFFFFF:08x}')\n"
        "            return (pc + imm) & 0xFFFFFFFF\n"
        "        ctx.branches[1] += 1\n        return pc + 4\n")
_MAKERS["LUI"] = _factory("        regs[rd] = imm & 0xFFFFFFFF\n        return pc + 4\n")
_MAKERS["AUIPC"] = _factory("        regs[rd] = (pc + imm) & 0xFFFFFFFF\n        return pc + 4\n")
_MAKERS["JAL"] = _factory(
    "        if imm & 3:\n            raise MisalignedAccess(f'jump target 0x{(pc + imm) & 0xFFFFFFFF:08x}')\n"
    "        regs[rd] = pc + 4\n        return (pc + imm) & 0xFFFFFFFF\n")
_MAKERS["JALR"] = _factory(
    "        t = (regs[rs1] + imm) & 0xFFFFFFFE\n"
    "        if t & 3:\n            raise MisalignedAccess(f'jump target 0x{t:08x}')\n"
    "        regs[rd] = pc + 4\n        return t\n")
_MAKERS["FENCE"] = _factory("        return pc + 4\n")

_LOAD_SPEC = {  # op: (width, struct format)
    "LB": (1, "<b"), "LBU": (1, "<B"), "LH": (2, "<h"), "LHU": (2, "<H"), "LW": (4, "<I")}
_STORE_SPEC = {"SB": (1, "<B"), "SH": (2, "<H"), "SW": (4, "<I")}
for _op, (_w, _fmt) in _LOAD_SPEC.items():
    _mask = "& 0xFFFFFFFF" if _fmt in ("<b", "<h") else ""
    _MAKERS[_op] = _factory(
        "        addr = (regs[rs1] + imm) & 0xFFFFFFFF\n"
        + (f"        if addr & {_w - 1}:\n            raise MisalignedAccess(f'load at 0x{{addr:08x}}')\n"
           if _w > 1 else "")
        + "        ctx.reads.add(addr >> 2)\n"
        "        c = chunks.get(addr >> 10)\n"
        f"        regs[rd] = (unpack(c, addr & 1023)[0] {_mask}) if c is not None else 0\n"
        "        return pc + 4\n", unpack=struct.Struct(_fmt).unpack_from)
for _op, (_w, _fmt) in _STORE_SPEC.items():
    _MAKERS[_op] = _factory(
        "        addr = (regs[rs1] + imm) & 0xFFFFFFFF\n"
        + (f"        if addr & {_w - 1}:\n            raise MisalignedAccess(f'store at 0x{{addr:08x}}')\n"
           if _w > 1 else "")
        + "        ctx.writes.add(addr >> 2)\n"
        "        c = chunks.get(addr >> 10)\n"
        "        if c is None:\n            c = ctx.memory._chunk(addr >> 10)\n"
        f"        pack(c, addr & 1023, regs[rs2] & {(1 << (8 * _w)) - 1})\n"
        "        return pc + 4\n", pack=struct.Struct(_fmt).pack_into)


def _make_ecall(state: MachineState):
    def f(pc):
        handle_ecall(state)
        if state.halted:
            raise _Halt
        return pc + 4
    return f


def _make_ebreak(state: MachineState):
    def f(pc):
        raise EmulationError(f"ebreak at pc=0x{pc:08x}")
    return f


def _compile(instr: Instruction, state: MachineState) -> Callable[[int], int]:
    if instr.op == "ECALL":
        return _make_ecall(state)
    if instr.op == "EBREAK":
        return _make_ebreak(state)
    rd = instr.rd or 32
    return _MAKERS[instr.op](state.regs, rd, instr.rs1, instr.rs2, instr.imm, state, state.memory.chunks)


def handle_ecall(state: MachineState) -> StepEvent:
    """Service the environment call described by ``a7`` (see module docs)."""
    regs = state.regs
    call = regs[17]
    if call == SYS_EXIT:
        state.ecalls[call] += 1
        state.halted = True
        state.exit_code = _signed(regs[10])
        return StepEvent(HALT, call_id=call)
    if call == SYS_WRITE:
        buf, size = regs[11], regs[12]
        if size > MAX_WRITE or buf + size > 1 << 32:
            raise MemoryFault(f"write buffer 0x{buf:08x}+{size} is invalid")
        if size:
            state.reads.update(range(buf >> 2, ((buf + size - 1) >> 2) + 1))
            state.output += state.memory.read(buf, size)
        regs[10] = size
        state.ecalls[call] += 1
        return StepEvent(ENV_CALL, call_id=call)
    accel = state.accelerators.get(call)
    if accel is None:
        raise UnknownEcall(f"unknown environment call {call} (0x{call:x})")
    accel(state)
    regs[32] = 0
    state.ecalls[call] += 1
    return StepEvent(ENV_CALL, call_id=call)


def _fetch(state: MachineState, image: LoadedImage, pc: int):
    """Decode and compile the instruction at ``pc``; returns the cache entry or None on halt."""
    if pc == HALT_ADDR:
        state.halted = True
        state.exit_code = _signed(state.regs[10])
        return None
    if pc & 3:
        raise MisalignedAccess(f"instruction fetch at 0x{pc:08x}")
    seg = image.segment_at(pc)
    if seg is None or not seg.executable or pc + 4 > seg.end:
        raise OutOfImageFetch(f"pc 0x{pc:08x} is outside the loaded code")
    off = pc - seg.vaddr
    word = int.from_bytes(seg.data[off:off + 4], "little")
    try:
        instr = decode(word)
    except IllegalInstruction as exc:
        raise IllegalInstruction(word, pc) from exc
    entry = (_compile(instr, state), len(state._instrs))
    state._instrs.append(instr)
    state._counts.append(0)
    state._code[pc] = entry
    return entry


def step(state: MachineState, image: LoadedImage) -> list[StepEvent]:
    """Execute one instruction and describe its memory and control behaviour."""
    if state.halted:
        raise MachineHalted("machine already halted")
    pc = state.pc
    entry = state._code.get(pc) or _fetch(state, image, pc)
    if entry is None:
        return [StepEvent(HALT)]
    fn, idx = entry
    instr = state._instrs[idx]
    events = []
    cls = instr.cls
    if cls is LOAD or cls is STORE:
        addr = (state.regs[instr.rs1] + instr.imm) & M32
        width = {"B": 1, "H": 2, "W": 4}[instr.op[1]]
        events.append(StepEvent(MEMORY_READ if cls is LOAD else MEMORY_WRITE, addr, width))
    taken_before = state.branches[0]
    try:
        state.pc = fn(pc)
    except _Halt:
        state._counts[idx] += 1
        state.retired += 1
        return events + [StepEvent(HALT, call_id=SYS_EXIT)]
    state.regs[32] = 0
    state._counts[idx] += 1
    state.retired += 1
    if cls is BRANCH:
        events.append(StepEvent(BRANCH_TAKEN if state.branches[0] > taken_before else BRANCH_NOT_TAKEN))
    elif cls is ECALL:
        events.append(StepEvent(ENV_CALL, call_id=state.regs[17]))
    return events


@dataclass(frozen=True)
class RunTrace:
    retired: int
    halted: bool
    exit_code: int | None
    output: bytes
    op_counts: dict[str, int]
    class_counts: dict[str, int]
    branches_taken: int
    branches_not_taken: int
    ecalls: dict[int, int]
    fetched_words: frozenset = field(repr=False)
    read_words: frozenset = field(repr=False)
    written_words: frozenset = field(repr=False)
    registers: tuple = field(repr=False)
    pc: int = 0

    @property
    def loads(self) -> int:
        return self.class_counts.get(LOAD, 0)

    @property
    def stores(self) -> int:
        return self.class_counts.get(STORE, 0)

    def to_dict(self) -> dict:
        return {
            "retired": self.retired, "halted": self.halted, "exit_code": self.exit_code,
            "output": self.output.hex(), "op_counts": dict(sorted(self.op_counts.items())),
            "class_counts": dict(sorted(self.class_counts.items())),
            "branches_taken": self.branches_taken, "branches_not_taken": self.branches_not_taken,
            "ecalls": {str(k): v for k, v in sorted(self.ecalls.items())},
            "fetched_words": sorted(self.fetched_words), "read_words": sorted(self.read_words),
            "written_words": sorted(self.written_words), "registers": list(self.registers), "pc": self.pc,
        }

    def digest(self) -> str:
        blob = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")).encode()
        return hashlib.sha256(blob).hexdigest()


def snapshot(state: MachineState) -> RunTrace:
    ops: Counter = Counter()
    classes = dict.fromkeys(CLASSES, 0)
    for instr, n in zip(state._instrs, state._counts):
        if n:
            ops[instr.op] += n
            classes[instr.cls] += n
    return RunTrace(
        retired=state.retired, halted=state.halted, exit_code=state.exit_code, output=bytes(state.output),
        op_counts=dict(sorted(ops.items())), class_counts=classes,
        branches_taken=state.branches[0], branches_not_taken=state.branches[1],
        ecalls=dict(sorted(state.ecalls.items())),
        fetched_words=frozenset(pc >> 2 for pc in state._code), read_words=frozenset(state.reads),
        written_words=frozenset(state.writes), registers=(0,) + tuple(state.regs[1:32]), pc=state.pc)


def run(image: LoadedImage, state: MachineState | None = None, limit: int = 10_000_000) -> RunTrace:
    """Step until the guest halts or ``limit`` instructions have retired."""
    if limit <= 0:
        raise ValueError("instruction limit must be positive")
    if state is None:
        state = MachineState(image)
    if state.halted:
        return snapshot(state)
    code_get = state._code.get
    counts = state._counts
    regs = state.regs
    pc = state.pc
    entry = None
    budget = limit - state.retired
    done = 0
    try:
        for done in range(budget):
            entry = code_get(pc)
            if entry is None:
                entry = _fetch(state, image, pc)
                if entry is None:
                    break
            pc = entry[0](pc)
            counts[entry[1]] += 1
        else:
            done = budget
    except _Halt:
        counts[entry[1]] += 1
        done += 1
        pc += 4
    except EmulationError:
        state.pc = pc
        state.retired += done
        regs[32] = 0
        raise
    regs[32] = 0
    state.pc = pc
    state.retired += done
    trace = snapshot(state)
    if not state.halted:
        raise CycleLimitExceeded(trace)
    return trace
