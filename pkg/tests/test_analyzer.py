import json

import pytest
from hypothesis import given, strategies as st

from conftest import asm_image, needs_toolchain
from zkopt.analyzer import UndecodableImage, scan, window_cost
from zkopt.asm import assemble
from zkopt.cost import R0_LIKE, UNIFORM
from zkopt.elf import PF_R, PF_W, PF_X, build_elf, load_elf
from zkopt.isa import decode
from zkopt.toolchain.profiles import OptProfile

DIV8 = """
    srai a1, a0, 31
    srli a1, a1, 29
    add a0, a0, a1
    srai a0, a0, 3
    ret
"""
ABS = """
    srai a1, a0, 31
    xor a0, a0, a1
    sub a0, a0, a1
    ret
"""


def _rules(src, model=R0_LIKE, **kw):
    return [(f.rule, f.delta) for f in scan(asm_image(src, **kw), model)]


def test_reduced_division_flagged():
    (f,) = scan(asm_image(DIV8), R0_LIKE)
    assert (f.rule, f.delta, f.insight) == ("R1", 4, "I3")
    assert f.start == 0x10000 and f.end == 0x10010
    assert json.loads(f.to_json())["start"] == "0x00010000"


def test_reduced_division_under_uniform():
    assert _rules(DIV8, UNIFORM) == [("R1", 2)]


def test_branchless_abs_flagged():
    assert _rules(ABS) == [("R2", 3)]
    assert _rules(ABS, UNIFORM) == [("R2", 1)]


def test_llvm_abs_form_flagged():
    assert _rules("srai a1, a0, 31\nadd a0, a0, a1\nxor a0, a0, a1\nret") == [("R2", 3)]


def test_nops_are_clean():
    assert _rules("nop\n" * 20 + "ret") == []


def test_broken_chain_not_flagged():
    # the add reads a different register than the shifts produced
    assert _rules("srai a1, a0, 31\nsrli a1, a1, 29\nadd a0, a0, a2\nsrai a0, a0, 3\nret") == []
    assert _rules("srai a1, a0, 31\nsrli a1, a1, 29\nadd a0, a0, a1\nsrai a0, a0, 4\nret") == []
    assert _rules("srai a1, a0, 30\nxor a0, a0, a1\nsub a0, a0, a1\nret") == []


regs = st.sampled_from(["a0", "a2", "a3", "a4", "t0", "t1", "s2"])


@given(regs, regs, st.booleans(), st.integers(1, 30))
def test_division_match_survives_renaming_and_operand_order(x, t, swap, k):
    if x == t:
        return
    add = f"add {x}, {t}, {x}" if swap else f"add {x}, {x}, {t}"
    src = f"srai {t}, {x}, 31\nsrli {t}, {t}, {32 - k}\n{add}\nsrai {x}, {x}, {k}\nret"
    assert _rules(src) == [("R1", 4)]


@given(regs, regs, st.booleans())
def test_abs_match_survives_renaming_and_operand_order(x, t, swap):
    if x == t:
        return
    xor = f"xor {x}, {t}, {x}" if swap else f"xor {x}, {x}, {t}"
    assert _rules(f"srai {t}, {x}, 31\n{xor}\nsub {x}, {x}, {t}\nret") == [("R2", 3)]


def test_large_writable_footprint():
    elf = build_elf([(0x10000, b"".join(w.to_bytes(4, "little") for w in assemble("ret")), PF_R | PF_X),
                     (0x20000, b"\1", PF_R | PF_W, 17 * 1024)], 0x10000)
    (f,) = scan(load_elf(elf), R0_LIKE)
    assert f.rule == "R3" and f.delta == 17 * 2260 and f.insight == "I1"
    assert scan(load_elf(elf), R0_LIKE, page_threshold=20) == []


def test_small_footprint_clean():
    assert _rules("ret", data=b"\1", bss=15 * 1024) == []


BOOKKEEPING_LOOP = """
    li t0, 0
    li t1, 100
loop:
    addi t0, t0, 1
    blt t0, t1, loop
    ret
"""
WORK_LOOP = """
    li t0, 100
loop:
    mul a0, a0, a1
    xor a2, a2, a0
    add a3, a3, a2
    sll a4, a4, a3
    addi t0, t0, -1
    bnez t0, loop
    ret
"""


def test_bookkeeping_loop_flagged():
    (f,) = scan(asm_image(BOOKKEEPING_LOOP), R0_LIKE)
    assert f.rule == "R4" and f.delta == 2 and f.start == 0x10008 and f.end == 0x10010


def test_work_loop_not_flagged():
    assert _rules(WORK_LOOP) == []


def test_stack_counter_loop_flagged():
    # an unoptimized loop keeps its counter on the stack
    src = """
        sw zero, 12(sp)
    loop:
        lw t0, 12(sp)
        addi t0, t0, 1
        sw t0, 12(sp)
        li t1, 50
        blt t0, t1, loop
        ret
    """
    (f,) = scan(asm_image(src), R0_LIKE)
    assert f.rule == "R4" and f.delta == 5


def test_undecodable_entry():
    elf = build_elf([(0x10000, b"\xff\xff\xff\xff", PF_R | PF_X)], 0x10000)
    with pytest.raises(UndecodableImage):
        scan(load_elf(elf), R0_LIKE)


def test_window_cost():
    seq = [decode(w) for w in assemble(DIV8)]
    assert window_cost(seq[:4], R0_LIKE) == 7


@needs_toolchain
def test_compiled_division_flagged(manifest, toolchain):
    prog = manifest["div8"]
    img = load_elf(toolchain.compile(prog.unit(), OptProfile.standard("O2")).elf)
    assert any(f.rule == "R1" and f.delta == 4 for f in scan(img, R0_LIKE))


@needs_toolchain
def test_compiled_abs_flagged(manifest, toolchain):
    img = load_elf(toolchain.compile(manifest["abs_branch"].unit(), OptProfile.standard("O2")).elf)
    assert any(f.rule == "R2" for f in scan(img, R0_LIKE))
