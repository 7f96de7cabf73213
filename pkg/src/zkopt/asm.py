"""A tiny RV32IM assembler for hand-written guest programs and test fixtures.

Supports one instruction per line, ABI or ``xN`` register names, labels
(``name:``), ``#`` comments, and the pseudo-instructions ``nop li mv neg not j
jr ret call bltz bgez beqz bnez bgtz blez``.  Everything is emitted as
uncompressed 32-bit words.
"""

from __future__ import annotations

import re

from .isa import REG_NAMES

_REGS = {name: i for i, name in enumerate(REG_NAMES)}
_REGS.update({f"x{i}": i for i in range(32)})
_REGS["fp"] = 8

_R = {  # op: (funct7, funct3)
    "add": (0, 0), "sub": (0x20, 0), "sll": (0, 1), "slt": (0, 2), "sltu": (0, 3), "xor": (0, 4),
    "srl": (0, 5), "sra": (0x20, 5), "or": (0, 6), "and": (0, 7),
    "mul": (1, 0), "mulh": (1, 1), "mulhsu": (1, 2), "mulhu": (1, 3),
    "div": (1, 4), "divu": (1, 5), "rem": (1, 6), "remu": (1, 7),
}
_I = {"addi": 0, "slti": 2, "sltiu": 3, "xori": 4, "ori": 6, "andi": 7}
_SHIFT_I = {"slli": (0, 1), "srli": (0, 5), "srai": (0x20, 5)}
_LOADS = {"lb": 0, "lh": 1, "lw": 2, "lbu": 4, "lhu": 5}
_STORES = {"sb": 0, "sh": 1, "sw": 2}
_BRANCHES = {"beq": 0, "bne": 1, "blt": 4, "bge": 5, "bltu": 6, "bgeu": 7}


class AsmError(ValueError):
    pass


def _check(imm: int, bits: int, what: str) -> int:
    lo, hi = -(1 << (bits - 1)), (1 << (bits - 1)) - 1
    if not lo <= imm <= hi:
        raise AsmError(f"{what} immediate {imm} out of range")
    return imm & ((1 << bits) - 1)


def r_type(f7, f3, rd, rs1, rs2, opcode=0x33):
    return (f7 << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode


def i_type(imm, f3, rd, rs1, opcode=0x13):
    return (_check(imm, 12, "I") << 20) | (rs1 << 15) | (f3 << 12) | (rd << 7) | opcode


def s_type(imm, f3, rs1, rs2):
    u = _check(imm, 12, "S")
    return ((u >> 5) << 25) | (rs2 << 20) | (rs1 << 15) | (f3 << 12) | ((u & 0x1F) << 7) | 0x23


def b_type(imm, f3, rs1, rs2):
    if imm & 1:
        raise AsmError("branch offset must be even")
    u = _check(imm, 13, "B")
    return (((u >> 12) & 1) << 31) | (((u >> 5) & 0x3F) << 25) | (rs2 << 20) | (rs1 << 15) \
        | (f3 << 12) | (((u >> 1) & 0xF) << 8) | (((u >> 11) & 1) << 7) | 0x63


def u_type(imm20, rd, opcode):
    return ((imm20 & 0xFFFFF) << 12) | (rd << 7) | opcode


def j_type(imm, rd):
    if imm & 1:
        raise AsmError("jump offset must be even")
    u = _check(imm, 21, "J")
    return (((u >> 20) & 1) << 31) | (((u >> 1) & 0x3FF) << 21) | (((u >> 11) & 1) << 20) \
        | (((u >> 12) & 0xFF) << 12) | (rd << 7) | 0x6F


def _reg(tok: str) -> int:
    try:
        return _REGS[tok]
    except KeyError:
        raise AsmError(f"unknown register {tok!r}") from None


def _int(tok: str) -> int:
    return int(tok, 0)


_MEM = re.compile(r"^(-?\w+)\((\w+)\)$")


def _split_li(value: int):
    value &= 0xFFFFFFFF
    lo = value & 0xFFF
    if lo & 0x800:
        lo -= 0x1000
    hi = ((value - lo) >> 12) & 0xFFFFF
    return hi, lo


def _expand(mn: str, args: list[str]) -> list[tuple[str, list[str]]]:
    """Rewrite pseudo-instructions into base instructions."""
    if mn == "nop":
        return [("addi", ["zero", "zero", "0"])]
    if mn == "li":
        value = _int(args[1])
        if -2048 <= value <= 2047:
            return [("addi", [args[0], "zero", str(value)])]
        hi, lo = _split_li(value)
        out = [("lui", [args[0], str(hi)])]
        if lo:
            out.append(("addi", [args[0], args[0], str(lo)]))
        return out
    if mn == "mv":
        return [("addi", [args[0], args[1], "0"])]
    if mn == "neg":
        return [("sub", [args[0], "zero", args[1]])]
    if mn == "not":
        return [("xori", [args[0], args[1], "-1"])]
    if mn == "j":
        return [("jal", ["zero", args[0]])]
    if mn == "jr":
        return [("jalr", ["zero", f"0({args[0]})"])]
    if mn == "ret":
        return [("jalr", ["zero", "0(ra)"])]
    if mn == "call":
        return [("jal", ["ra", args[0]])]
    if mn == "bltz":
        return [("blt", [args[0], "zero", args[1]])]
    if mn == "bgez":
        return [("bge", [args[0], "zero", args[1]])]
    if mn == "beqz":
        return [("beq", [args[0], "zero", args[1]])]
    if mn == "bnez":
        return [("bne", [args[0], "zero", args[1]])]
    if mn == "bgtz":
        return [("blt", ["zero", args[0], args[1]])]
    if mn == "blez":
        return [("bge", ["zero", args[0], args[1]])]
    if mn == "jal" and len(args) == 1:
        return [("jal", ["ra", args[0]])]
    return [(mn, args)]


def _encode(mn: str, args: list[str], pc: int, labels: dict[str, int]) -> int:
    def target(tok):
        if tok in labels:
            return labels[tok] - pc
        return _int(tok)

    if mn in _R:
        f7, f3 = _R[mn]
        return r_type(f7, f3, _reg(args[0]), _reg(args[1]), _reg(args[2]))
    if mn in _I:
        return i_type(_int(args[2]), _I[mn], _reg(args[0]), _reg(args[1]))
    if mn in _SHIFT_I:
        f7, f3 = _SHIFT_I[mn]
        sh = _int(args[2])
        if not 0 <= sh < 32:
            raise AsmError(f"shift amount {sh} out of range")
        return r_type(f7, f3, _reg(args[0]), _reg(args[1]), sh, opcode=0x13)
    if mn in _LOADS or mn in _STORES or mn == "jalr":
        m = _MEM.match(args[1].replace(" ", ""))
        if not m:
            raise AsmError(f"expected offset(reg), got {args[1]!r}")
        off, base = _int(m.group(1)), _reg(m.group(2))
        if mn in _STORES:
            return s_type(off, _STORES[mn], base, _reg(args[0]))
        f3, opcode = (_LOADS[mn], 0x03) if mn in _LOADS else (0, 0x67)
        return i_type(off, f3, _reg(args[0]), base, opcode)
    if mn in _BRANCHES:
        return b_type(target(args[2]), _BRANCHES[mn], _reg(args[0]), _reg(args[1]))
    if mn == "jal":
        return j_type(target(args[1]), _reg(args[0]))
    if mn in ("lui", "auipc"):
        return u_type(_int(args[1]), _reg(args[0]), 0x37 if mn == "lui" else 0x17)
    if mn == "ecall":
        return 0x00000073
    if mn == "ebreak":
        return 0x00100073
    if mn == "fence":
        return 0x0FF0000F
    if mn == ".word":
        return _int(args[0]) & 0xFFFFFFFF
    raise AsmError(f"unknown mnemonic {mn!r}")


def assemble(source: str, base: int = 0) -> list[int]:
    """Assemble ``source`` placed at address ``base`` into instruction words."""
    items: list[tuple[str, list[str], int]] = []
    labels: dict[str, int] = {}
    pc = base
    for lineno, line in enumerate(source.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        while ":" in line:
            label, line = line.split(":", 1)
            labels[label.strip()] = pc
            line = line.strip()
        if not line:
            continue
        parts = line.split(None, 1)
        mn = parts[0].lower()
        args = [a.strip() for a in parts[1].split(",")] if len(parts) > 1 else []
        for emn, eargs in _expand(mn, args):
            items.append((emn, eargs, lineno))
            pc += 4
    words = []
    for i, (mn, args, lineno) in enumerate(items):
        try:
            words.append(_encode(mn, args, base + 4 * i, labels))
        except (AsmError, IndexError, ValueError) as exc:
            raise AsmError(f"line {lineno}: {exc}") from None
    return words


def to_bytes(words) -> bytes:
    return b"".join((w & 0xFFFFFFFF).to_bytes(4, "little") for w in words)
