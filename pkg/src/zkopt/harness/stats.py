"""Impact percentages, categories, outcome tallies and correlation."""

from __future__ import annotations

import enum
import math
import statistics
from collections import Counter, defaultdict
from dataclasses import dataclass
from typing import Iterable, Sequence


class StatsError(ValueError):
    pass


class MismatchedRows(StatsError):
    pass


class ZeroBaseline(StatsError):
    pass


class DegenerateSeries(StatsError):
    pass


class ImpactCategory(str, enum.Enum):
    SEVERE_LOSS = "severe-loss"
    MODERATE_LOSS = "moderate-loss"
    NEUTRAL = "neutral"
    MODERATE_GAIN = "moderate-gain"
    SEVERE_GAIN = "severe-gain"


@dataclass(frozen=True)
class Thresholds:
    """Band edges in percent.  The neutral band is closed, the severe bands are closed at +-severe."""
    moderate: float = 2.0
    severe: float = 5.0

    def __post_init__(self):
        if not 0 <= self.moderate < self.severe:
            raise StatsError("need 0 <= moderate < severe")


DEFAULT_THRESHOLDS = Thresholds()


def categorize(percent: float, thresholds: Thresholds = DEFAULT_THRESHOLDS) -> ImpactCategory:
    if math.isnan(percent):
        raise StatsError("impact percent is NaN")
    m, s = thresholds.moderate, thresholds.severe
    if percent >= s:
        return ImpactCategory.SEVERE_GAIN
    if percent > m:
        return ImpactCategory.MODERATE_GAIN
    if percent >= -m:
        return ImpactCategory.NEUTRAL
    if percent > -s:
        return ImpactCategory.MODERATE_LOSS
    return ImpactCategory.SEVERE_LOSS


def impact_percent(baseline: float, value: float) -> float:
    """Positive means the profile is cheaper than the baseline."""
    if baseline <= 0:
        raise ZeroBaseline(f"baseline value must be positive, got {baseline}")
    return (baseline - value) / baseline * 100.0


@dataclass(frozen=True)
class ImpactRow:
    program: str
    profile: str
    model: str
    metric: str
    baseline: float
    value: float
    percent: float
    category: ImpactCategory

    def to_dict(self) -> dict:
        return {"program": self.program, "profile": self.profile, "model": self.model, "metric": self.metric,
                "baseline": self.baseline, "value": self.value, "percent": self.percent,
                "category": self.category.value}


def impact(baseline_row, row, metric: str = "total", thresholds: Thresholds = DEFAULT_THRESHOLDS) -> ImpactRow:
    """Compare ``row`` against ``baseline_row`` on ``metric`` (any numeric MetricsRow field)."""
    if baseline_row.program != row.program:
        raise MismatchedRows(f"programs differ: {baseline_row.program} vs {row.program}")
    if baseline_row.model != row.model:
        raise MismatchedRows(f"cost models differ: {baseline_row.model} vs {row.model}")
    b, v = baseline_row.metric(metric), row.metric(metric)
    if b is None or v is None:
        raise MismatchedRows(f"metric {metric!r} missing on {row.program}/{row.profile}")
    pct = impact_percent(b, v)
    return ImpactRow(row.program, row.profile, row.model, metric, b, v, pct, categorize(pct, thresholds))


@dataclass
class Tally:
    gains: int = 0
    losses: int = 0
    neutral: int = 0

    def add(self, percent: float, moderate: float):
        if percent > moderate:
            self.gains += 1
        elif percent < -moderate:
            self.losses += 1
        else:
            self.neutral += 1


@dataclass
class Outcomes:
    total: Tally
    by_profile: dict[str, Tally]
    by_model: dict[str, Tally]
    # four buckets per profile: severe/moderate gain, moderate/severe loss
    buckets: dict[str, Counter]


def count_outcomes(rows: Iterable[ImpactRow], thresholds: Thresholds = DEFAULT_THRESHOLDS) -> Outcomes:
    rows = list(rows)
    metrics = {r.metric for r in rows}
    if len(metrics) > 1:
        raise MismatchedRows(f"rows mix metrics: {', '.join(sorted(metrics))}")
    total = Tally()
    by_profile: dict[str, Tally] = defaultdict(Tally)
    by_model: dict[str, Tally] = defaultdict(Tally)
    buckets: dict[str, Counter] = defaultdict(Counter)
    for r in rows:
        total.add(r.percent, thresholds.moderate)
        by_profile[r.profile].add(r.percent, thresholds.moderate)
        by_model[r.model].add(r.percent, thresholds.moderate)
        if r.category != ImpactCategory.NEUTRAL:
            buckets[r.profile][r.category] += 1
    return Outcomes(total, dict(by_profile), dict(by_model), dict(buckets))


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Arithmetic mean and sample standard deviation (0 for a single value)."""
    if not values:
        raise StatsError("no values")
    if len(values) == 1:
        return float(values[0]), 0.0
    return statistics.fmean(values), statistics.stdev(values)


def _ranks(xs: Sequence[float]) -> list[float]:
    order = sorted(range(len(xs)), key=lambda i: xs[i])
    ranks = [0.0] * len(xs)
    i = 0
    while i < len(order):
        j = i
        while j + 1 < len(order) and xs[order[j + 1]] == xs[order[i]]:
            j += 1
        avg = (i + j) / 2 + 1
        for k in range(i, j + 1):
            ranks[order[k]] = avg
        i = j + 1
    return ranks


def pearson(xs: Sequence[float], ys: Sequence[float]) -> float:
    n = len(xs)
    mx, my = math.fsum(xs) / n, math.fsum(ys) / n
    sxy = math.fsum((x - mx) * (y - my) for x, y in zip(xs, ys))
    sxx = math.fsum((x - mx) ** 2 for x in xs)
    syy = math.fsum((y - my) ** 2 for y in ys)
    if sxx == 0 or syy == 0:
        raise DegenerateSeries("series has zero variance")
    r = sxy / math.sqrt(sxx * syy)
    return max(-1.0, min(1.0, r))


def correlate(xs: Sequence[float], ys: Sequence[float]) -> tuple[float, float]:
    """(Pearson, Spearman); Spearman uses average ranks for ties."""
    xs, ys = [float(x) for x in xs], [float(y) for y in ys]
    if len(xs) != len(ys):
        raise DegenerateSeries(f"length mismatch: {len(xs)} vs {len(ys)}")
    if len(xs) < 3:
        raise DegenerateSeries("need at least three points")
    if any(math.isnan(v) or math.isinf(v) for v in xs + ys):
        raise DegenerateSeries("series contains NaN or infinity")
    return pearson(xs, ys), pearson(_ranks(xs), _ranks(ys))
