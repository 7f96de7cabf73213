"""Static scan for instruction idioms that are cheap on CPUs but not under zkVM cost tables."""

from __future__ import annotations

import json
from dataclasses import dataclass

from .cost import CostModel
from .elf import LoadedImage
from .isa import ARITH, BITWISE, BRANCH, LOAD, MULDIV, SHIFT, STORE, IllegalInstruction, Instruction, class_of, decode

DEFAULT_PAGE_THRESHOLD = 16
DEFAULT_RATIO_THRESHOLD = 0.5


class UndecodableImage(Exception):
    pass


@dataclass(frozen=True)
class Finding:
    rule: str
    start: int
    end: int  # exclusive
    description: str
    delta: int
    insight: str
    model: str

    def to_dict(self) -> dict:
        return {"rule": self.rule, "start": f"0x{self.start:08x}", "end": f"0x{self.end:08x}",
                "description": self.description, "delta": self.delta, "insight": self.insight,
                "model": self.model}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def _cost(classes, model: CostModel) -> int:
    return sum(model.class_costs[c] for c in classes)


# documented alternatives the deltas are measured against
R1_ALTERNATIVE = (ARITH, MULDIV)   # li t, 2^k ; div
R2_ALTERNATIVE = (BRANCH, ARITH)   # bltz x, 1f ; neg x  (the negative path)


def _match_r1(w: list[Instruction]) -> int | None:
    """srai t,x,31 ; srli t,t,32-k ; add y,x,t ; srai z,y,k  ->  k, or None."""
    a, b, c, d = w
    if (a.op, b.op, c.op, d.op) != ("SRAI", "SRLI", "ADD", "SRAI"):
        return None
    x, t = a.rs1, a.rd
    if a.imm != 31 or t == 0 or x == t:
        return None
    if b.rs1 != t or b.rd != t or not 1 <= b.imm <= 31:
        return None
    k = 32 - b.imm
    if {c.rs1, c.rs2} != {x, t} or c.rd == 0:
        return None
    if d.rs1 != c.rd or d.imm != k or d.rd == 0:
        return None
    return k


def _match_r2(w: list[Instruction]) -> bool:
    """srai t,x,31 ; xor y,x,t ; sub z,y,t  or the equivalent  srai t,x,31 ; add y,x,t ; xor z,y,t."""
    a, b, c = w
    if a.op != "SRAI" or (b.op, c.op) not in (("XOR", "SUB"), ("ADD", "XOR")):
        return False
    x, t = a.rs1, a.rd
    if a.imm != 31 or t == 0 or x == t:
        return False
    if {b.rs1, b.rs2} != {x, t} or b.rd in (0, t):
        return False
    if c.rd == 0:
        return False
    if c.op == "SUB":
        return c.rs1 == b.rd and c.rs2 == t
    return {c.rs1, c.rs2} == {b.rd, t}


def _decode_segment(data: bytes, base: int) -> list[tuple[int, Instruction | None]]:
    out = []
    for off in range(0, len(data) - 3, 4):
        word = int.from_bytes(data[off:off + 4], "little")
        try:
            out.append((base + off, decode(word)))
        except IllegalInstruction:
            out.append((base + off, None))
    return out


def _defs(i: Instruction) -> int | None:
    if i.cls in (STORE, BRANCH) or i.rd == 0:
        return None
    return i.rd


def _uses(i: Instruction) -> set[int]:
    fmt = i.fmt
    if fmt in ("R", "S", "B"):
        return {i.rs1, i.rs2} - {0}
    if fmt == "I":
        return {i.rs1} - {0}
    return set()


def _bookkeeping(body: list[Instruction]) -> set[int]:
    """Indices of body instructions that only serve loop control.

    Backward slice from the loop's branches over registers, extended through
    stack slots (a load of a control value pulls in the store to the same
    slot).  The body is walked twice so values carried around the back edge
    are followed.
    """
    marked: set[int] = set()
    need: set[int] = set()
    slots: set[tuple[int, int]] = set()
    last = len(body) - 1
    for _ in range(2):
        for idx in range(last, -1, -1):
            ins = body[idx]
            if ins.cls == BRANCH or (idx == last and ins.op == "JAL"):
                marked.add(idx)
                need |= _uses(ins)
                continue
            if ins.cls == STORE:
                slot = (ins.rs1, ins.imm)
                if slot in slots:
                    marked.add(idx)
                    slots.discard(slot)
                    need |= {ins.rs2} - {0}
                continue
            d = _defs(ins)
            if d is None or d not in need:
                continue
            need.discard(d)
            if ins.cls not in (ARITH, LOAD, SHIFT, BITWISE) or ins.op in ("LUI", "AUIPC"):
                continue
            marked.add(idx)
            if ins.cls == LOAD:
                slots.add((ins.rs1, ins.imm))
            else:
                need |= _uses(ins)
    return marked


def scan(image: LoadedImage, model: CostModel, page_threshold: int = DEFAULT_PAGE_THRESHOLD,
         ratio_threshold: float = DEFAULT_RATIO_THRESHOLD) -> list[Finding]:
    """Findings sorted by address, then rule."""
    code: list[tuple[int, Instruction | None]] = []
    for seg in image.segments:
        if seg.executable:
            code += _decode_segment(seg.data[: seg.filesz], seg.vaddr)
    if not any(i is not None and addr == image.entry for addr, i in code):
        raise UndecodableImage(f"nothing decodable at entry 0x{image.entry:08x}")
    findings: list[Finding] = []

    def window(i, n):
        w = code[i:i + n]
        if len(w) < n or any(ins is None for _, ins in w):
            return None
        if any(w[j + 1][0] != w[j][0] + 4 for j in range(n - 1)):
            return None
        return [ins for _, ins in w]

    for i, (addr, _) in enumerate(code):
        w = window(i, 4)
        if w is not None and (k := _match_r1(w)) is not None:
            delta = _cost([x.cls for x in w], model) - _cost(R1_ALTERNATIVE, model)
            findings.append(Finding(
                "R1", addr, addr + 16,
                f"signed division by {1 << k} strength-reduced to shifts; li+div costs {_cost(R1_ALTERNATIVE, model)}",
                delta, "I3", model.name))
        w = window(i, 3)
        if w is not None and _match_r2(w):
            delta = _cost([x.cls for x in w], model) - _cost(R2_ALTERNATIVE, model)
            findings.append(Finding(
                "R2", addr, addr + 12,
                f"branchless absolute value; a branch plus negate costs {_cost(R2_ALTERNATIVE, model)}",
                delta, "I4", model.name))

    # R3: static paging footprint of writable segments
    pages = set()
    lo, hi = None, None
    ps = model.page_size
    for seg in image.segments:
        if seg.writable and len(seg.data):
            pages.update(range(seg.vaddr // ps, (seg.vaddr + len(seg.data) - 1) // ps + 1))
            lo = seg.vaddr if lo is None else min(lo, seg.vaddr)
            hi = seg.vaddr + len(seg.data) if hi is None else max(hi, seg.vaddr + len(seg.data))
    if len(pages) > page_threshold:
        findings.append(Finding(
            "R3", lo, hi, f"writable data spans {len(pages)} pages (threshold {page_threshold})",
            len(pages) * (model.page_in + model.page_out), "I1", model.name))

    # R4: loops dominated by bookkeeping
    index = {addr: n for n, (addr, _) in enumerate(code)}
    for n, (addr, ins) in enumerate(code):
        if ins is None or ins.imm >= 0:
            continue
        if not (ins.cls == BRANCH or (ins.op == "JAL" and ins.rd == 0)):
            continue
        target = addr + ins.imm
        if target not in index:
            continue
        body_items = code[index[target]: n + 1]
        if any(b is None for _, b in body_items):
            continue
        body = [b for _, b in body_items]
        marked = _bookkeeping(body)
        ratio = len(marked) / len(body)
        if ratio > ratio_threshold:
            delta = _cost([body[j].cls for j in sorted(marked)], model)
            findings.append(Finding(
                "R4", target, addr + 4,
                f"loop of {len(body)} instructions, {len(marked)} for loop control (ratio {ratio:.2f}); "
                f"unrolling candidate", delta, "I3", model.name))
    findings.sort(key=lambda f: (f.start, f.rule))
    return findings


def window_cost(instrs, model: CostModel) -> int:
    return _cost([class_of(i.op) for i in instrs], model)
