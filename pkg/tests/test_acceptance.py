"""Acceptance gate: one test per criterion, each printing a PASS/FAIL line in the summary."""

import random

import pytest

from conftest import asm_elf, asm_image, needs_toolchain
from refsim import reference_run
from zkopt.cost import R0_LIKE, UNIFORM, account, sequence_cost
from zkopt.elf import PF_R, PF_W, PF_X, build_elf, load_elf
from zkopt.harness.bench import execute
from zkopt.harness.oracle import DIVERGENT, EQUIVALENT, compare, diff_oracle, fault_fixture
from zkopt.harness.stats import ImpactCategory, categorize, correlate
from zkopt.isa import decode
from zkopt.machine import run
from zkopt.asm import assemble
from zkopt.toolchain.driver import Toolchain
from zkopt.toolchain.profiles import OptProfile, PassCatalog, expand_profiles
from zkopt.tuner import TuneConfig, exhaustive_depth1, tune

DIV_PLAIN = """
    li t0, 8
    div a0, a0, t0
    ret
"""
DIV_REDUCED = """
    srai a1, a0, 31
    srli a1, a1, 29
    add a0, a0, a1
    srai a0, a0, 3
    ret
"""


def test_c01_div_calibration(criterion):
    with criterion(1, "strength-reduction calibration (4 vs 8 cycles)", 1.0) as c:
        plain = [decode(w) for w in assemble(DIV_PLAIN)]
        reduced = [decode(w) for w in assemble(DIV_REDUCED)]
        static = (sequence_cost(plain, R0_LIKE), sequence_cost(reduced, R0_LIKE))
        dynamic = tuple(account(run(asm_image(src)), R0_LIKE).compute for src in (DIV_PLAIN, DIV_REDUCED))
        c.detail = f"static {static}, executed {dynamic}"
        assert static == (4, 8)
        assert dynamic == (4, 8)


# stores into 15 fresh pages and into its own (writable) code page, never touching the stack
STRIDE = """
    lui t0, 0x20
    li t1, 15
    li t2, 1024
loop:
    sw t1, 0(t0)
    add t0, t0, t2
    addi t1, t1, -1
    bnez t1, loop
    auipc t3, 0
    sw t1, 512(t3)
    li a0, 0
    li a7, 93
    ecall
"""


def test_c02_paging_arithmetic(criterion):
    with criterion(2, "paging arithmetic over 16 pages", 1.0) as c:
        code = b"".join(w.to_bytes(4, "little") for w in assemble(STRIDE, 0x10000))
        elf = build_elf([(0x10000, code, PF_R | PF_W | PF_X)], 0x10000)
        b = account(run(load_elf(elf)), R0_LIKE)
        c.detail = (f"page-ins {b.page_ins} ({b.page_in_cycles} cyc), page-outs {b.page_outs} "
                    f"({b.page_out_cycles} cyc), total {b.total} = {b.compute} + {b.paging}")
        assert (b.page_ins, b.page_outs) == (16, 16)
        assert b.page_in_cycles == 16 * 1130
        assert b.page_out_cycles == 16 * 1130
        assert b.total == b.compute + b.paging
        assert all(isinstance(v, int) for v in (b.total, b.compute, b.paging))


@needs_toolchain
def test_c03_licm_stressor(criterion, manifest, tmp_path):
    with criterion(3, "licm on the 4-deep nest: >= 1.2x cycles, more paging", 120.0) as c:
        tc = Toolchain(store=tmp_path)
        prog = manifest["licm_nest4"]
        base = execute(tc.compile(prog.unit(), OptProfile.baseline()).elf, prog.limit)
        licm = execute(tc.compile(prog.unit(), OptProfile.sequence(["licm"])).elf, prog.limit)
        assert base.ok and licm.ok
        assert base.trace.output == licm.trace.output
        b, l = account(base.trace, R0_LIKE), account(licm.trace, R0_LIKE)
        ratio = l.total / b.total
        c.detail = f"total {l.total} vs {b.total} (x{ratio:.3f}), paging {l.paging} vs {b.paging}"
        assert ratio >= 1.2
        assert l.paging > b.paging


@needs_toolchain
def test_c04_loop_fission(criterion, manifest, tmp_path):
    with criterion(4, "loop fission costs more than the fused loop (uniform, N=4096)", 60.0) as c:
        tc = Toolchain(store=tmp_path)
        totals = {}
        for pid in ("fission_fused", "fission_split"):
            prog = manifest[pid].with_defines(N="4096")
            ex = execute(tc.compile(prog.unit(), OptProfile.baseline()).elf, prog.limit)
            assert ex.ok
            totals[pid] = account(ex.trace, UNIFORM).total
        c.detail = f"fused {totals['fission_fused']}, split {totals['fission_split']}"
        assert totals["fission_split"] > totals["fission_fused"]


@needs_toolchain
def test_c05_emulator_matches_reference(criterion, manifest, toolchain):
    with criterion(5, "baseline corpus agrees with the reference simulator", 300.0) as c:
        bad = []
        for prog in manifest.values():
            elf = toolchain.compile(prog.unit(), OptProfile.baseline()).elf
            ours = execute(elf, prog.limit)
            ref = reference_run(load_elf(elf), prog.limit * 2)
            if not ours.ok or ref.error or (ours.trace.exit_code, ours.trace.output) != (ref.exit_code, ref.output):
                bad.append(prog.id)
        c.detail = f"{len(manifest) - len(bad)}/{len(manifest)} agree" + (f"; mismatches: {bad}" if bad else "")
        assert not bad


def test_c06_statistics(criterion):
    with criterion(6, "correlation and category boundaries", 1.0) as c:
        p, s = correlate((1, 2, 3, 4), (1, 3, 2, 4))
        assert abs(p - 0.8) <= 1e-9 and abs(s - 0.8) <= 1e-9
        eps = 1e-9
        expect = {
            -5: ImpactCategory.SEVERE_LOSS, -2: ImpactCategory.NEUTRAL, 0: ImpactCategory.NEUTRAL,
            2: ImpactCategory.NEUTRAL, 5: ImpactCategory.SEVERE_GAIN,
            2 + eps: ImpactCategory.MODERATE_GAIN, 2 - eps: ImpactCategory.NEUTRAL,
            -2 + eps: ImpactCategory.NEUTRAL, -2 - eps: ImpactCategory.MODERATE_LOSS,
        }
        got = {x: categorize(x) for x in expect}
        c.detail = f"pearson {p:.12f}, spearman {s:.12f}; {len(expect)} boundary points"
        assert got == expect


@needs_toolchain
def test_c07_autotuner(criterion, manifest, tmp_path):
    with criterion(7, "GA on spill beats the depth-1 optimum, deterministic", 600.0) as c:
        prog = manifest["spill"]
        cfg = TuneConfig(seed=7, iterations=160)
        tc = Toolchain(store=tmp_path / "a")
        oracle = exhaustive_depth1(prog, cfg, tc, jobs=8)[0]
        first = tune(prog, cfg, tc, jobs=8)
        again = tune(prog, cfg, Toolchain(store=tmp_path / "b"), jobs=8)
        hist = first.history
        c.detail = (f"best {first.best.fitness} {list(first.best.passes)} vs depth-1 optimum "
                    f"{oracle.fitness} {list(oracle.passes)}; {len(first.log)} evaluations")
        assert len(first.log) == 160
        assert first.best.finite and first.best.fitness <= oracle.fitness
        assert all(b <= a for a, b in zip(hist, hist[1:]))
        assert first.to_jsonl() == again.to_jsonl()


@needs_toolchain
def test_c08_oracle_sensitivity(criterion, manifest, toolchain):
    with criterion(8, "fault injection diverges, self-comparison is equivalent", 120.0) as c:
        verdicts = {}
        for prog in manifest.values():
            ref, faulty = fault_fixture(prog, toolchain)
            same = diff_oracle(prog, OptProfile.baseline(), OptProfile.baseline(), toolchain)
            verdicts[prog.id] = (compare(ref, faulty).kind, same.kind)
        bad = {k: v for k, v in verdicts.items() if v != (DIVERGENT, EQUIVALENT)}
        c.detail = f"{len(verdicts) - len(bad)}/{len(verdicts)} programs" + (f"; failures: {bad}" if bad else "")
        assert not bad


def test_c09_profile_count(criterion):
    with criterion(9, "64-pass catalog expands to 71 profiles", 1.0) as c:
        profiles = expand_profiles(PassCatalog(tuple(f"pass-{i}" for i in range(64))))
        c.detail = f"{len(profiles)} profiles"
        assert len(profiles) == 71
        assert len({p.id for p in profiles}) == 71


def _random_program(rng: random.Random) -> str:
    """Straight-line ALU/memory code, then dump registers through write and exit."""
    regs = ["t0", "t1", "t2", "a0", "a1", "a2", "a3", "s1"]
    alu = ["add", "sub", "xor", "or", "and", "sll", "srl", "sra", "slt", "sltu", "mul", "mulh", "mulhu",
           "div", "divu", "rem", "remu"]
    lines = ["lui s0, 0x20"]
    for r in regs:
        lines.append(f"li {r}, {rng.randint(-2**31, 2**31 - 1)}")
    for _ in range(rng.randint(5, 40)):
        k = rng.random()
        rd, ra, rb = rng.choice(regs), rng.choice(regs), rng.choice(regs)
        if k < 0.6:
            lines.append(f"{rng.choice(alu)} {rd}, {ra}, {rb}")
        elif k < 0.75:
            lines.append(f"{rng.choice(['addi', 'xori', 'ori', 'andi', 'slti'])} {rd}, {ra}, {rng.randint(-2048, 2047)}")
        elif k < 0.85:
            lines.append(f"{rng.choice(['slli', 'srli', 'srai'])} {rd}, {ra}, {rng.randint(0, 31)}")
        elif k < 0.93:
            lines.append(f"sw {ra}, {4 * rng.randint(0, 255)}(s0)")
        else:
            lines.append(f"lw {rd}, {4 * rng.randint(0, 255)}(s0)")
    for i, r in enumerate(regs):
        lines.append(f"sw {r}, {2048 - 64 + 4 * i}(s0)")
    lines += ["mv t3, a0", "li a0, 1", "addi a1, s0, 1984", f"li a2, {4 * len(regs)}", "li a7, 64", "ecall",
              "andi a0, t3, 255", "li a7, 93", "ecall"]
    return "\n".join(lines)


def test_c10_observational_purity(criterion):
    with criterion(10, "cost models never change architectural results (200 programs)", 300.0) as c:
        rng = random.Random(20240610)
        differing = 0
        for _ in range(200):
            elf = asm_elf(_random_program(rng))
            t_a = run(load_elf(elf))
            t_b = run(load_elf(elf))
            assert (t_a.exit_code, t_a.output, t_a.registers) == (t_b.exit_code, t_b.output, t_b.registers)
            assert t_a.digest() == t_b.digest()
            ba, bb = account(t_a, UNIFORM), account(t_b, R0_LIKE)
            assert ba.total == t_a.retired
            differing += ba != bb
        c.detail = f"200 programs identical across models, breakdowns differ in {differing}"
        assert differing == 200


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
