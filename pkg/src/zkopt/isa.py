"""RV32IM instruction decoding."""

from __future__ import annotations

from dataclasses import dataclass

# cost classes, in the order cost tables list them
ARITH, SHIFT, BITWISE, MULDIV, LOAD, STORE, BRANCH, JUMP, ECALL = (
    "arithmetic", "shift", "bitwise", "muldiv", "load", "store", "branch", "jump", "ecall")
CLASSES = (ARITH, SHIFT, BITWISE, MULDIV, LOAD, STORE, BRANCH, JUMP, ECALL)

REG_NAMES = ("zero ra sp gp tp t0 t1 t2 s0 s1 a0 a1 a2 a3 a4 a5 a6 a7 "
             "s2 s3 s4 s5 s6 s7 s8 s9 s10 s11 t3 t4 t5 t6").split()

_CLASS_OF = {}
for _names, _cls in (
        ("ADD SUB ADDI LUI AUIPC SLT SLTU SLTI SLTIU FENCE", ARITH),
        ("SLL SRL SRA SLLI SRLI SRAI", SHIFT),
        ("AND OR XOR ANDI ORI XORI", BITWISE),
        ("MUL MULH MULHSU MULHU DIV DIVU REM REMU", MULDIV),
        ("LB LH LW LBU LHU", LOAD),
        ("SB SH SW", STORE),
        ("BEQ BNE BLT BGE BLTU BGEU", BRANCH),
        ("JAL JALR", JUMP),
        ("ECALL EBREAK", ECALL)):
    for _n in _names.split():
        _CLASS_OF[_n] = _cls

MNEMONICS = tuple(_CLASS_OF)

# instruction formats, used for operand printing and sign-extension rules
_FORMAT = {}
for _names, _fmt in (
        ("ADD SUB SLL SLT SLTU XOR SRL SRA OR AND MUL MULH MULHSU MULHU DIV DIVU REM REMU", "R"),
        ("ADDI SLTI SLTIU XORI ORI ANDI SLLI SRLI SRAI JALR LB LH LW LBU LHU", "I"),
        ("SB SH SW", "S"), ("BEQ BNE BLT BGE BLTU BGEU", "B"), ("LUI AUIPC", "U"), ("JAL", "J"),
        ("ECALL EBREAK FENCE", "SYS")):
    for _n in _names.split():
        _FORMAT[_n] = _fmt


class EmulationError(Exception):
    """Base class for faults raised while decoding or executing guest code."""


class IllegalInstruction(EmulationError):
    def __init__(self, word: int, pc: int | None = None):
        where = f" at pc=0x{pc:08x}" if pc is not None else ""
        super().__init__(f"illegal instruction 0x{word & 0xFFFFFFFF:08x}{where}")
        self.word = word
        self.pc = pc


@dataclass(frozen=True)
class Instruction:
    op: str
    rd: int = 0
    rs1: int = 0
    rs2: int = 0
    imm: int = 0
    raw: int = 0

    @property
    def cls(self) -> str:
        return _CLASS_OF[self.op]

    @property
    def fmt(self) -> str:
        return _FORMAT[self.op]

    def __str__(self) -> str:
        r = REG_NAMES
        op, f = self.op.lower(), self.fmt
        if f == "R":
            return f"{op} {r[self.rd]}, {r[self.rs1]}, {r[self.rs2]}"
        if f == "I":
            if self.cls in (LOAD,) or self.op == "JALR":
                return f"{op} {r[self.rd]}, {self.imm}({r[self.rs1]})"
            return f"{op} {r[self.rd]}, {r[self.rs1]}, {self.imm}"
        if f == "S":
            return f"{op} {r[self.rs2]}, {self.imm}({r[self.rs1]})"
        if f == "B":
            return f"{op} {r[self.rs1]}, {r[self.rs2]}, {self.imm}"
        if f == "U":
            return f"{op} {r[self.rd]}, 0x{(self.imm >> 12) & 0xFFFFF:x}"
        if f == "J":
            return f"{op} {r[self.rd]}, {self.imm}"
        return op


def class_of(op: str) -> str:
    return _CLASS_OF[op]


def _sext(value: int, bits: int) -> int:
    sign = 1 << (bits - 1)
    return (value & (sign - 1)) - (value & sign)


_BRANCH = {0: "BEQ", 1: "BNE", 4: "BLT", 5: "BGE", 6: "BLTU", 7: "BGEU"}
_LOAD = {0: "LB", 1: "LH", 2: "LW", 4: "LBU", 5: "LHU"}
_STORE = {0: "SB", 1: "SH", 2: "SW"}
_OPIMM = {0: "ADDI", 2: "SLTI", 3: "SLTIU", 4: "XORI", 6: "ORI", 7: "ANDI"}
_OP = {0: "ADD", 1: "SLL", 2: "SLT", 3: "SLTU", 4: "XOR", 5: "SRL", 6: "OR", 7: "AND"}
_OP_ALT = {0: "SUB", 5: "SRA"}
_MULDIV = {0: "MUL", 1: "MULH", 2: "MULHSU", 3: "MULHU", 4: "DIV", 5: "DIVU", 6: "REM", 7: "REMU"}


def decode(word: int) -> Instruction:
    """Decode one 32-bit RV32IM instruction word.

    Compressed encodings, CSR accesses and every floating-point opcode raise
    :class:`IllegalInstruction`.
    """
    w = word & 0xFFFFFFFF
    opcode = w & 0x7F
    rd = (w >> 7) & 0x1F
    f3 = (w >> 12) & 0x7
    rs1 = (w >> 15) & 0x1F
    rs2 = (w >> 20) & 0x1F
    f7 = w >> 25
    i_imm = _sext(w >> 20, 12)

    if opcode == 0x13:
        if f3 == 1:
            if f7 == 0:
                return Instruction("SLLI", rd, rs1, 0, rs2, w)
        elif f3 == 5:
            if f7 == 0:
                return Instruction("SRLI", rd, rs1, 0, rs2, w)
            if f7 == 0x20:
                return Instruction("SRAI", rd, rs1, 0, rs2, w)
        else:
            return Instruction(_OPIMM[f3], rd, rs1, 0, i_imm, w)
    elif opcode == 0x33:
        if f7 == 0:
            return Instruction(_OP[f3], rd, rs1, rs2, 0, w)
        if f7 == 1:
            return Instruction(_MULDIV[f3], rd, rs1, rs2, 0, w)
        if f7 == 0x20 and f3 in _OP_ALT:
            return Instruction(_OP_ALT[f3], rd, rs1, rs2, 0, w)
    elif opcode == 0x03:
        if f3 in _LOAD:
            return Instruction(_LOAD[f3], rd, rs1, 0, i_imm, w)
    elif opcode == 0x23:
        if f3 in _STORE:
            imm = _sext(((w >> 25) << 5) | ((w >> 7) & 0x1F), 12)
            return Instruction(_STORE[f3], 0, rs1, rs2, imm, w)
    elif opcode == 0x63:
        if f3 in _BRANCH:
            imm = (((w >> 31) & 1) << 12) | (((w >> 7) & 1) << 11) | (((w >> 25) & 0x3F) << 5) \
                | (((w >> 8) & 0xF) << 1)
            return Instruction(_BRANCH[f3], 0, rs1, rs2, _sext(imm, 13), w)
    elif opcode == 0x37:
        return Instruction("LUI", rd, 0, 0, _sext(w & 0xFFFFF000, 32), w)
    elif opcode == 0x17:
        return Instruction("AUIPC", rd, 0, 0, _sext(w & 0xFFFFF000, 32), w)
    elif opcode == 0x6F:
        imm = (((w >> 31) & 1) << 20) | (((w >> 12) & 0xFF) << 12) | (((w >> 20) & 1) << 11) \
            | (((w >> 21) & 0x3FF) << 1)
        return Instruction("JAL", rd, 0, 0, _sext(imm, 21), w)
    elif opcode == 0x67:
        if f3 == 0:
            return Instruction("JALR", rd, rs1, 0, i_imm, w)
    elif opcode == 0x0F:
        if f3 == 0:
            return Instruction("FENCE", 0, 0, 0, 0, w)
    elif opcode == 0x73:
        if w == 0x00000073:
            return Instruction("ECALL", raw=w)
        if w == 0x00100073:
            return Instruction("EBREAK", raw=w)
    raise IllegalInstruction(w)
