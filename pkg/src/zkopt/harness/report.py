"""CSV tables, the text summary and figures.

Impact percentages are positive when a profile is cheaper than the baseline.
Averages across programs are arithmetic means of per-program percents.
"""

from __future__ import annotations

import csv
import io
from collections import defaultdict
from pathlib import Path
from typing import Iterable, Mapping, Sequence

from ..cost import BUILTIN_MODELS, CycleBreakdown
from ..isa import CLASSES
from .bench import MetricsRow
from .stats import (DEFAULT_THRESHOLDS, DegenerateSeries, ImpactCategory, ImpactRow, Thresholds, correlate,
                    count_outcomes, impact, mean_std)

METRICS_SCHEMA = "# zkopt-metrics v1"
IMPACT_SCHEMA = "# zkopt-impact v1"
METRICS_COLUMNS = (["program", "profile", "model", "status", "artifact", "retired", "compute", "paging", "total",
                    "page_ins", "page_outs", "exit_code", "output_hash", "emu_seconds", "proving_seconds",
                    "native_seconds", "error"] + [f"cyc_{c}" for c in CLASSES])
IMPACT_COLUMNS = ["program", "profile", "model", "metric", "baseline", "value", "percent", "category"]
BASELINE_ID = "baseline"


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, float):
        return f"{v:.6g}" if abs(v) < 1e-3 and v else f"{v:.6f}"
    return str(v)


def _csv(schema: str, columns: Sequence[str], records: Iterable[Sequence]) -> str:
    buf = io.StringIO()
    buf.write(schema + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for rec in records:
        w.writerow([_fmt(v) for v in rec])
    return buf.getvalue()


def metrics_csv(rows: Iterable[MetricsRow]) -> str:
    def rec(r: MetricsRow):
        c = r.cycles
        hist = [c.histogram.get(k) if c else None for k in CLASSES]
        return [r.program, r.profile, r.model, r.status, r.artifact, r.retired,
                c and c.compute, c and c.paging, c and c.total, c and c.page_ins, c and c.page_outs,
                r.exit_code, r.output_hash, r.emu_seconds, r.proving_seconds, r.native_seconds,
                r.error.replace("\n", " ")[:300]] + hist
    return _csv(METRICS_SCHEMA, METRICS_COLUMNS, (rec(r) for r in rows))


def impact_csv(rows: Iterable[ImpactRow]) -> str:
    return _csv(IMPACT_SCHEMA, IMPACT_COLUMNS, ([r.program, r.profile, r.model, r.metric, r.baseline, r.value,
                                                r.percent, r.category.value] for r in rows))


class ReportError(ValueError):
    pass


def read_metrics_csv(text: str) -> list[MetricsRow]:
    lines = text.splitlines()
    if not lines or lines[0].strip() != METRICS_SCHEMA:
        raise ReportError(f"not a metrics file (expected first line {METRICS_SCHEMA!r})")
    out = []
    for rec in csv.DictReader(lines[1:]):
        def num(k, cast=int):
            return cast(rec[k]) if rec.get(k) not in (None, "") else None
        cycles = None
        if rec["total"]:
            page_in_cycles = page_out_cycles = 0
            model = BUILTIN_MODELS.get(rec["model"])
            if model is not None:
                page_in_cycles = num("page_ins") * model.page_in
                page_out_cycles = num("page_outs") * model.page_out
            cycles = CycleBreakdown(rec["model"], num("compute"), num("paging"), num("total"),
                                    {k: num(f"cyc_{k}") or 0 for k in CLASSES}, num("page_ins"), num("page_outs"),
                                    page_in_cycles, page_out_cycles)
        out.append(MetricsRow(
            rec["program"], rec["profile"], rec["model"], rec["status"], rec["artifact"], cycles, num("retired"),
            num("exit_code"), rec["output_hash"], num("emu_seconds", float) or 0.0, num("proving_seconds", float),
            num("native_seconds", float), rec["error"]))
    return out


def impact_rows(rows: Iterable[MetricsRow], metric: str = "total",
                thresholds: Thresholds = DEFAULT_THRESHOLDS) -> list[ImpactRow]:
    """Impact of every successful non-baseline row against its program's baseline row."""
    rows = list(rows)
    base = {(r.program, r.model): r for r in rows if r.profile == BASELINE_ID and r.ok}
    out = []
    for r in rows:
        b = base.get((r.program, r.model))
        if r.profile == BASELINE_ID or not r.ok or b is None or b.metric(metric) in (None, 0):
            continue
        if r.metric(metric) is None:
            continue
        out.append(impact(b, r, metric, thresholds))
    return out


def _profile_order(rows: Iterable) -> list[str]:
    seen: dict[str, None] = {}
    for r in rows:
        seen.setdefault(r.profile, None)
    return list(seen)


def speedup_table(tuned: Mapping[str, int], levels: Mapping[str, Mapping[str, int]],
                  reference: str = "-O3") -> list[tuple[str, int, int | None, float | None]]:
    """(program, tuned cycles, reference-level cycles, speedup) with speedup = reference / tuned."""
    out = []
    for prog in sorted(tuned):
        ref = levels.get(prog, {}).get(reference)
        sp = ref / tuned[prog] if ref and tuned[prog] else None
        out.append((prog, tuned[prog], ref, sp))
    return out


def summary(rows: Sequence[MetricsRow], metric: str = "total", thresholds: Thresholds = DEFAULT_THRESHOLDS,
            tuned: Mapping[str, int] | None = None, levels: Mapping[str, Mapping[str, int]] | None = None) -> str:
    rows = list(rows)
    imps = impact_rows(rows, metric, thresholds)
    out = io.StringIO()
    p = out.write
    p("# zkopt summary\n\n")
    p(f"Metric: `{metric}` cycles. Impact % = (baseline - profile) / baseline x 100, so positive is better.\n")
    p("Averages are arithmetic means of per-program impact percents.\n")
    models = sorted({r.model for r in rows})
    for m in models:
        note = BUILTIN_MODELS[m].note if m in BUILTIN_MODELS else "user-supplied model"
        p(f"Model `{m}`: {note}.\n")
    failed = [r for r in rows if not r.ok]
    p(f"\nRows: {len(rows)} ({len(failed)} failed)\n")

    p("\n## Mean impact per profile\n\n| model | profile | n | mean % | std % |\n|---|---|---:|---:|---:|\n")
    groups: dict[tuple[str, str], list[float]] = defaultdict(list)
    for r in imps:
        groups[(r.model, r.profile)].append(r.percent)
    order = _profile_order(rows)
    for m in models:
        for prof in order:
            vals = groups.get((m, prof))
            if vals:
                mu, sd = mean_std(vals)
                p(f"| {m} | {prof} | {len(vals)} | {mu:+.2f} | {sd:.2f} |\n")

    p("\n## Impact categories per profile\n\n"
      f"Severe: >= {thresholds.severe:g}% or <= -{thresholds.severe:g}%. "
      f"Neutral band [-{thresholds.moderate:g}%, {thresholds.moderate:g}%] inclusive.\n\n"
      "| model | profile | severe gain | moderate gain | neutral | moderate loss | severe loss |\n"
      "|---|---|---:|---:|---:|---:|---:|\n")
    cats = ImpactCategory.SEVERE_GAIN, ImpactCategory.MODERATE_GAIN, ImpactCategory.NEUTRAL, \
        ImpactCategory.MODERATE_LOSS, ImpactCategory.SEVERE_LOSS
    counts: dict[tuple[str, str], dict] = defaultdict(lambda: dict.fromkeys(cats, 0))
    for r in imps:
        counts[(r.model, r.profile)][r.category] += 1
    for m in models:
        for prof in order:
            if (m, prof) in counts:
                c = counts[(m, prof)]
                p(f"| {m} | {prof} | " + " | ".join(str(c[k]) for k in cats) + " |\n")

    p("\n## Gains and losses\n\n| model | gains | losses | neutral |\n|---|---:|---:|---:|\n")
    if imps:
        oc = count_outcomes(imps, thresholds)
        for m in sorted(oc.by_model):
            t = oc.by_model[m]
            p(f"| {m} | {t.gains} | {t.losses} | {t.neutral} |\n")

    p("\n## Correlation\n\n")
    p(_correlation_block(rows))

    if tuned:
        p("\n## Tuned sequence vs -O3\n\n| program | tuned | -O3 | speedup |\n|---|---:|---:|---:|\n")
        for prog, t, ref, sp in speedup_table(tuned, levels or {}):
            p(f"| {prog} | {t} | {ref if ref is not None else '-'} | {f'{sp:.2f}x' if sp else '-'} |\n")
    return out.getvalue()


def _correlation_block(rows: Sequence[MetricsRow]) -> str:
    ok = [r for r in rows if r.ok and r.cycles is not None]
    lines = []
    pairs = [("estimated proving seconds", [r for r in ok if r.proving_seconds is not None], "proving_seconds"),
             ("native seconds", [r for r in ok if r.native_seconds is not None], "native_seconds")]
    for label, sel, attr in pairs:
        if len(sel) < 3:
            lines.append(f"- cycles vs {label}: not enough samples ({len(sel)})\n")
            continue
        try:
            pr, sr = correlate([r.cycles.total for r in sel], [getattr(r, attr) for r in sel])
            lines.append(f"- cycles vs {label}: pearson {pr:.4f}, spearman {sr:.4f} (n={len(sel)})\n")
        except DegenerateSeries as exc:
            lines.append(f"- cycles vs {label}: {exc}\n")
    return "".join(lines)


def emit_report(rows: Sequence, fmt: str = "csv", **kw) -> bytes:
    """``csv`` (metrics rows), ``impact-csv`` (impact rows) or ``summary``."""
    if fmt == "csv":
        return metrics_csv(rows).encode()
    if fmt == "impact-csv":
        if rows and isinstance(rows[0], MetricsRow):
            rows = impact_rows(rows, kw.get("metric", "total"))
        return impact_csv(rows).encode()
    if fmt == "summary":
        return summary(rows, **kw).encode()
    raise ReportError(f"unknown report format {fmt!r}")


def write_figures(rows: Sequence[MetricsRow], out_dir: str | Path, metric: str = "total") -> list[Path]:
    """Bar charts of mean impact and category counts per profile, one PNG pair per model."""
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    imps = impact_rows(rows, metric)
    written = []
    order = _profile_order(rows)
    for model in sorted({r.model for r in imps}):
        sel = [r for r in imps if r.model == model]
        profs = [p for p in order if any(r.profile == p for r in sel)]
        stats = [mean_std([r.percent for r in sel if r.profile == p]) for p in profs]

        fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(profs) + 2), 4))
        ax.bar(range(len(profs)), [s[0] for s in stats], yerr=[s[1] for s in stats],
               color=["tab:green" if s[0] > 0 else "tab:red" for s in stats], capsize=2)
        ax.axhline(0, color="black", linewidth=0.8)
        ax.set_xticks(range(len(profs)), profs, rotation=70, fontsize=7)
        ax.set_ylabel(f"mean impact on {metric} cycles (%)")
        ax.set_title(f"per-profile impact, {model}")
        fig.tight_layout()
        path = out_dir / f"impact-{model}.png"
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        written.append(path)

        cats = [ImpactCategory.SEVERE_GAIN, ImpactCategory.MODERATE_GAIN, ImpactCategory.MODERATE_LOSS,
                ImpactCategory.SEVERE_LOSS]
        colors = ["darkgreen", "lightgreen", "salmon", "darkred"]
        fig, ax = plt.subplots(figsize=(max(6, 0.35 * len(profs) + 2), 4))
        bottom = [0] * len(profs)
        for cat, color in zip(cats, colors):
            vals = [sum(1 for r in sel if r.profile == p and r.category == cat) for p in profs]
            ax.bar(range(len(profs)), vals, bottom=bottom, color=color, label=cat.value)
            bottom = [a + b for a, b in zip(bottom, vals)]
        ax.set_xticks(range(len(profs)), profs, rotation=70, fontsize=7)
        ax.set_ylabel("programs")
        ax.set_title(f"impact categories, {model}")
        ax.legend(fontsize=7)
        fig.tight_layout()
        path = out_dir / f"categories-{model}.png"
        fig.savefig(path, dpi=100, metadata={"Software": None})
        plt.close(fig)
        written.append(path)
    return written


def write_report(rows: Sequence[MetricsRow], out_dir: str | Path, metric: str = "total",
                 figures: bool = True, **summary_kw) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = {"metrics.csv": emit_report(rows, "csv"),
             "impact.csv": emit_report(rows, "impact-csv", metric=metric),
             "summary.md": emit_report(rows, "summary", metric=metric, **summary_kw)}
    written = []
    for name, data in files.items():
        (out_dir / name).write_bytes(data)
        written.append(out_dir / name)
    if figures:
        written += write_figures(rows, out_dir / "figures", metric)
    return written
