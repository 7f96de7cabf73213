"""zkVM-style cycle accounting.

A :class:`CostModel` prices each instruction class and charges paging: the
first touch of a page costs a page-in, and every page written during the run
costs a page-out when the run finishes.  Code fetches count as touches, so
the code pages a program executes are paged in like data.

All cycle quantities are Python ints; only the proving-time estimate is a
float.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Mapping

import yaml

from .isa import (ARITH, BITWISE, BRANCH, CLASSES, ECALL, JUMP, LOAD, MULDIV, SHIFT, STORE, Instruction)
from .machine import MEMORY_READ, MEMORY_WRITE, RunTrace, StepEvent


class CostModelError(ValueError):
    pass


@dataclass(frozen=True)
class CostModel:
    name: str
    class_costs: Mapping[str, int]
    page_size: int = 1024
    page_in: int = 0
    page_out: int = 0
    accelerators: Mapping[int, int] = field(default_factory=dict)
    note: str = ""

    def __post_init__(self):
        missing = [c for c in CLASSES if c not in self.class_costs]
        if missing:
            raise CostModelError(f"cost model {self.name!r} has no entry for {', '.join(missing)}")
        unknown = [c for c in self.class_costs if c not in CLASSES]
        if unknown:
            raise CostModelError(f"cost model {self.name!r} has unknown classes {', '.join(unknown)}")
        if self.page_size <= 0 or self.page_size & (self.page_size - 1):
            raise CostModelError(f"page size {self.page_size} is not a power of two")
        if self.page_size < 4:
            raise CostModelError("page size must be at least one word")
        costs = list(self.class_costs.values()) + [self.page_in, self.page_out] + list(self.accelerators.values())
        if any((not isinstance(c, int)) or c < 0 for c in costs):
            raise CostModelError(f"cost model {self.name!r} has negative or non-integer costs")
        # freeze mappings so the model is safely shareable
        object.__setattr__(self, "class_costs", dict((c, int(self.class_costs[c])) for c in CLASSES))
        object.__setattr__(self, "accelerators", dict(sorted((int(k), int(v)) for k, v in self.accelerators.items())))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "class_costs": dict(self.class_costs),
            "page_size": self.page_size,
            "page_in": self.page_in,
            "page_out": self.page_out,
            "accelerators": {str(k): v for k, v in self.accelerators.items()},
            "note": self.note,
        }

    @classmethod
    def from_dict(cls, data: Mapping) -> "CostModel":
        try:
            return cls(
                name=str(data["name"]),
                class_costs=dict(data["class_costs"]),
                page_size=int(data.get("page_size", 1024)),
                page_in=int(data.get("page_in", 0)),
                page_out=int(data.get("page_out", 0)),
                accelerators={int(k, 0) if isinstance(k, str) else int(k): int(v)
                              for k, v in (data.get("accelerators") or {}).items()},
                note=str(data.get("note", "")),
            )
        except (KeyError, TypeError) as exc:
            raise CostModelError(f"malformed cost model: {exc}") from None


UNIFORM = CostModel(
    "uniform", dict.fromkeys(CLASSES, 1), page_size=1024, page_in=0, page_out=0,
    note="near-uniform per-instruction accounting with free paging; an approximation, "
         "no per-instruction table was published for this regime")

R0_LIKE = CostModel(
    "r0-like",
    {ARITH: 1, SHIFT: 2, BITWISE: 2, MULDIV: 2, LOAD: 1, STORE: 1, BRANCH: 1, JUMP: 1, ECALL: 1},
    page_size=1024, page_in=1130, page_out=1130,
    note="shifts, bitwise ops and mul/div cost 2 cycles; 1 KB pages at 1130 cycles per page-in and page-out")

BUILTIN_MODELS = {m.name: m for m in (UNIFORM, R0_LIKE)}


def load_cost_model(path: str | Path) -> CostModel:
    """Load a model from a JSON or YAML key/value file."""
    text = Path(path).read_text()
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise CostModelError(f"{path}: {exc}") from None
    if not isinstance(data, Mapping):
        raise CostModelError(f"{path}: expected a mapping")
    return CostModel.from_dict(data)


def dump_cost_model(model: CostModel) -> str:
    return json.dumps(model.to_dict(), indent=2) + "\n"


def get_model(name_or_path: str) -> CostModel:
    if name_or_path in BUILTIN_MODELS:
        return BUILTIN_MODELS[name_or_path]
    if Path(name_or_path).exists():
        return load_cost_model(name_or_path)
    raise CostModelError(f"unknown cost model {name_or_path!r} (built-ins: {', '.join(BUILTIN_MODELS)})")


def instruction_cost(instr: Instruction, model: CostModel) -> int:
    return model.class_costs[instr.cls]


def sequence_cost(instrs: Iterable[Instruction], model: CostModel) -> int:
    return sum(model.class_costs[i.cls] for i in instrs)


@dataclass
class PageTracker:
    touched: set[int] = field(default_factory=set)
    dirty: set[int] = field(default_factory=set)
    page_ins: int = 0


def charge_access(tracker: PageTracker, event: StepEvent, model: CostModel) -> int:
    """Paging cycles charged for one memory event at the moment it happens."""
    if event.kind not in (MEMORY_READ, MEMORY_WRITE):
        raise ValueError(f"not a memory event: {event.kind}")
    first = event.address // model.page_size
    last = (event.address + (event.width or 1) - 1) // model.page_size
    charged = 0
    for page in range(first, last + 1):
        if page not in tracker.touched:
            tracker.touched.add(page)
            tracker.page_ins += 1
            charged += model.page_in
        if event.kind == MEMORY_WRITE:
            tracker.dirty.add(page)
    return charged


def finalize(tracker: PageTracker, model: CostModel) -> int:
    return len(tracker.dirty) * model.page_out


@dataclass(frozen=True)
class CycleBreakdown:
    model: str
    compute: int
    paging: int
    total: int
    histogram: dict[str, int]
    page_ins: int
    page_outs: int
    page_in_cycles: int
    page_out_cycles: int

    def to_dict(self) -> dict:
        return {
            "model": self.model, "compute": self.compute, "paging": self.paging, "total": self.total,
            "page_ins": self.page_ins, "page_outs": self.page_outs,
            "page_in_cycles": self.page_in_cycles, "page_out_cycles": self.page_out_cycles,
            "histogram": dict(self.histogram),
        }


def _pages(words, page_size: int) -> list[int]:
    shift = int(math.log2(page_size)) - 2
    return sorted({w >> shift for w in words})


def account(trace: RunTrace, model: CostModel) -> CycleBreakdown:
    """Price a finished (or limit-truncated) run under ``model``."""
    histogram = {c: trace.class_counts.get(c, 0) * model.class_costs[c] for c in CLASSES}
    # accelerator calls replace the default env-call price with their fixed cost
    for call, n in trace.ecalls.items():
        if call in model.accelerators:
            histogram[ECALL] += n * (model.accelerators[call] - model.class_costs[ECALL])
    compute = sum(histogram.values())

    tracker = PageTracker()
    page_in_cycles = 0
    ps = model.page_size
    for page in _pages(trace.fetched_words | trace.read_words, ps):
        page_in_cycles += charge_access(tracker, StepEvent(MEMORY_READ, page * ps, 1), model)
    for page in _pages(trace.written_words, ps):
        page_in_cycles += charge_access(tracker, StepEvent(MEMORY_WRITE, page * ps, 1), model)
    page_out_cycles = finalize(tracker, model)
    paging = page_in_cycles + page_out_cycles
    return CycleBreakdown(
        model=model.name, compute=compute, paging=paging, total=compute + paging, histogram=histogram,
        page_ins=tracker.page_ins, page_outs=len(tracker.dirty),
        page_in_cycles=page_in_cycles, page_out_cycles=page_out_cycles)


class EstimatorError(ValueError):
    pass


class DegenerateSamples(EstimatorError):
    pass


class WeakCorrelation(EstimatorError):
    pass


@dataclass(frozen=True)
class ProvingEstimator:
    """Linear proving-time proxy: ``seconds = intercept + slope * cycles``."""
    intercept: float
    slope: float
    pearson: float | None = None

    def __post_init__(self):
        if self.slope < 0:
            raise WeakCorrelation(f"negative slope {self.slope}: cycles cannot predict proving time")


def estimate_proving(breakdown: CycleBreakdown | int, est: ProvingEstimator) -> float:
    total = breakdown if isinstance(breakdown, int) else breakdown.total
    return est.intercept + est.slope * total


def fit_estimator(samples: Iterable[tuple[float, float]], floor: float = 0.9) -> ProvingEstimator:
    """Least-squares fit of proving seconds against cycles.

    Rejects fits whose Pearson coefficient magnitude is below ``floor`` and
    fits with a negative slope.
    """
    pts = [(float(x), float(y)) for x, y in samples]
    if len(pts) < 2:
        raise DegenerateSamples("need at least two samples")
    n = len(pts)
    mx = sum(x for x, _ in pts) / n
    my = sum(y for _, y in pts) / n
    sxx = sum((x - mx) ** 2 for x, _ in pts)
    syy = sum((y - my) ** 2 for _, y in pts)
    sxy = sum((x - mx) * (y - my) for x, y in pts)
    if sxx == 0:
        raise DegenerateSamples("all samples have the same cycle count")
    if syy == 0:
        raise WeakCorrelation("proving time does not vary with cycles")
    slope = sxy / sxx
    intercept = my - slope * mx
    r = sxy / math.sqrt(sxx * syy)
    if slope < 0:
        raise WeakCorrelation(f"negative slope {slope:g} (pearson {r:.3f})")
    if abs(r) < floor:
        raise WeakCorrelation(f"pearson {r:.3f} below floor {floor}")
    return ProvingEstimator(intercept, slope, r)
