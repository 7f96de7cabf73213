import pytest
from hypothesis import given, settings, strategies as st

from conftest import asm_image
from zkopt.asm import assemble
from zkopt.cost import (R0_LIKE, UNIFORM, CostModel, CostModelError, DegenerateSamples, PageTracker,
                        WeakCorrelation, account, charge_access, dump_cost_model, estimate_proving, finalize,
                        fit_estimator, get_model, load_cost_model, sequence_cost)
from zkopt.isa import CLASSES, decode
from zkopt.machine import MEMORY_READ, MEMORY_WRITE, MachineState, StepEvent, run


def _seq(src):
    return [decode(w) for w in assemble(src)]


def test_division_by_eight_costs():
    plain = _seq("li t0, 8\ndiv a0, a0, t0\nret")
    reduced = _seq("srai a1, a0, 31\nsrli a1, a1, 29\nadd a0, a0, a1\nsrai a0, a0, 3\nret")
    assert sequence_cost(plain, R0_LIKE) == 4
    assert sequence_cost(reduced, R0_LIKE) == 8
    assert sequence_cost(plain, UNIFORM) == 3
    assert sequence_cost(reduced, UNIFORM) == 5


def test_charge_access_first_touch_only():
    t = PageTracker()
    assert charge_access(t, StepEvent(MEMORY_READ, 0x1000, 4), R0_LIKE) == 1130
    assert charge_access(t, StepEvent(MEMORY_WRITE, 0x1004, 4), R0_LIKE) == 0
    assert charge_access(t, StepEvent(MEMORY_WRITE, 0x1400, 4), R0_LIKE) == 1130
    assert charge_access(t, StepEvent(MEMORY_READ, 0x17FE, 4), R0_LIKE) == 1130  # straddles into a third page
    assert t.page_ins == 3 and t.dirty == {0x1000 // 1024, 0x1400 // 1024}
    assert finalize(t, R0_LIKE) == 2 * 1130


def test_finalize_three_dirty_pages():
    t = PageTracker()
    for addr in (0, 1024, 2048):
        charge_access(t, StepEvent(MEMORY_WRITE, addr, 4), R0_LIKE)
    assert finalize(t, R0_LIKE) == 3390


def test_charge_access_rejects_other_events():
    with pytest.raises(ValueError):
        charge_access(PageTracker(), StepEvent("halt"), R0_LIKE)


def test_exit_program_accounting():
    b = account(run(asm_image("li a0, 42\nli a7, 93\necall")), R0_LIKE)
    assert b.compute == 3
    assert (b.page_ins, b.page_outs) == (1, 0)
    assert b.paging == 1130 and b.total == 1133


def test_uniform_counts_retired_instructions():
    t = run(asm_image("li t0, 10\nl:\naddi t0, t0, -1\nbnez t0, l\nli a7, 93\necall"))
    b = account(t, UNIFORM)
    assert b.total == t.retired == b.compute and b.paging == 0


STORE_LOOP = """
    lui t0, 0x20
    li t1, {n}
    li t2, {stride}
l:
    sw t1, 0(t0)
    lw t3, 4(t0)
    add t0, t0, t2
    addi t1, t1, -1
    bnez t1, l
    li a7, 93
    ecall
"""


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 40), st.sampled_from([4, 64, 512, 1024, 2048]))
def test_breakdown_decomposes(n, stride):
    t = run(asm_image(STORE_LOOP.format(n=n, stride=stride)))
    for model in (UNIFORM, R0_LIKE):
        b = account(t, model)
        assert b.total == b.compute + b.paging
        assert b.compute == sum(b.histogram.values())
        assert b.paging == b.page_in_cycles + b.page_out_cycles
        assert b.page_in_cycles == b.page_ins * model.page_in
        assert b.page_out_cycles == b.page_outs * model.page_out
        assert b.page_outs <= b.page_ins


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 30), st.integers(1, 10))
def test_more_work_never_costs_less(n, extra):
    small = account(run(asm_image(STORE_LOOP.format(n=n, stride=1024))), R0_LIKE)
    big = account(run(asm_image(STORE_LOOP.format(n=n + extra, stride=1024))), R0_LIKE)
    assert big.total > small.total and big.paging >= small.paging


@settings(max_examples=20, deadline=None)
@given(st.integers(1, 30))
def test_accounting_is_pure(n):
    t = run(asm_image(STORE_LOOP.format(n=n, stride=256)))
    before = t.digest()
    assert account(t, R0_LIKE) == account(t, R0_LIKE)
    account(t, UNIFORM)
    assert t.digest() == before


def test_accelerator_price_replaces_ecall_cost():
    model = CostModel("accel", dict(R0_LIKE.class_costs), accelerators={0x200: 500})
    image = asm_image("li a7, 0x200\necall\nli a7, 93\necall")
    t = run(image, MachineState(image, accelerators={0x200: lambda s: None}))
    b = account(t, model)
    assert b.compute == 1 + 500 + 1 + 1


def test_model_validation():
    with pytest.raises(CostModelError):
        CostModel("x", {c: 1 for c in CLASSES[:-1]})
    with pytest.raises(CostModelError):
        CostModel("x", dict.fromkeys(CLASSES, -1))
    with pytest.raises(CostModelError):
        CostModel("x", dict.fromkeys(CLASSES, 1), page_size=1000)
    with pytest.raises(CostModelError):
        get_model("no-such-model")


def test_model_file_round_trip(tmp_path):
    path = tmp_path / "m.json"
    path.write_text(dump_cost_model(R0_LIKE))
    assert load_cost_model(path) == R0_LIKE
    yml = tmp_path / "m.yaml"
    yml.write_text("name: tiny\nclass_costs: {" + ", ".join(f"{c}: 3" for c in CLASSES) + "}\npage_in: 7\n")
    m = get_model(str(yml))
    assert m.page_in == 7 and m.page_out == 0 and m.class_costs[CLASSES[0]] == 3


def test_fit_estimator_exact_line():
    est = fit_estimator([(1, 2), (2, 4), (3, 6)])
    assert est.slope == pytest.approx(2) and est.intercept == pytest.approx(0)
    assert estimate_proving(10, est) == pytest.approx(20)


def test_fit_estimator_degenerate():
    with pytest.raises(DegenerateSamples):
        fit_estimator([(1, 1), (1, 2)])
    with pytest.raises(DegenerateSamples):
        fit_estimator([(1, 1)])


def test_fit_estimator_rejects_negative_slope():
    with pytest.raises(WeakCorrelation):
        fit_estimator([(1, 6), (2, 4), (3, 2)])


def test_fit_estimator_rejects_weak_fit():
    with pytest.raises(WeakCorrelation):
        fit_estimator([(1, 1), (2, 5), (3, 1), (4, 5.5)])
