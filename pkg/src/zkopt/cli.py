"""Command-line entry point: ``zkopt <subcommand> ...``.

Exit codes: 0 success, 1 oracle divergence, 2 configuration or tool errors.
Machine-readable results go to stdout, diagnostics to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from pathlib import Path

import yaml

from . import __version__
from .analyzer import UndecodableImage, scan
from .corpus import ManifestError, Program, load_manifest, resolve_program
from .cost import CostModelError, account, get_model
from .elf import ElfError, load_elf
from .harness.bench import bench, execute
from .harness.oracle import diff_oracle
from .harness.report import ReportError, read_metrics_csv, write_report
from .toolchain.driver import Toolchain, ToolchainConfig, ToolchainError
from .toolchain.profiles import DEFAULT_PASSES, OptProfile, PassCatalog, ProfileError, expand_profiles
from .tuner import InsufficientCandidates, TuneConfig, TunerError, load_results, mine_subsequences, tune

log = logging.getLogger("zkopt")

EXIT_OK, EXIT_DIVERGENT, EXIT_CONFIG = 0, 1, 2


class ConfigError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    try:
        data = yaml.safe_load(Path(path).read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"config {path} must be a mapping")
    return data


def _setting(args, cfg: dict, name: str, default=None):
    """Flag wins over config file, config wins over default."""
    value = getattr(args, name, None)
    if value is not None:
        return value
    return cfg.get(name, default)


def _toolchain(args, cfg) -> Toolchain:
    tc_cfg = ToolchainConfig.load(cfg.get("toolchain"))
    store = _setting(args, cfg, "store")
    return Toolchain(tc_cfg, store)


def _manifest(cfg) -> dict[str, Program]:
    return load_manifest(cfg.get("manifest"))


def _catalog(cfg) -> PassCatalog:
    passes = cfg.get("catalog")
    if isinstance(passes, str):
        passes = [ln.strip() for ln in Path(passes).read_text().splitlines() if ln.strip() and not ln.startswith("#")]
    return PassCatalog(tuple(passes or DEFAULT_PASSES))


def _jobs(args, cfg) -> int:
    return int(_setting(args, cfg, "jobs", os.cpu_count() or 1))


def cmd_run(args, cfg) -> int:
    model = get_model(_setting(args, cfg, "model", "r0-like"))
    target = Path(args.target)
    if target.exists() and target.suffix != ".c":
        elf, profile_id = target.read_bytes(), "prebuilt"
        limit = args.limit or 10_000_000
    else:
        prog = resolve_program(args.target, _manifest(cfg))
        profile = OptProfile.parse(args.profile)
        tc = _toolchain(args, cfg)
        if prog.elf is not None:
            elf, profile_id = prog.elf.read_bytes(), "prebuilt"
        else:
            elf, profile_id = tc.compile(prog.unit(), profile).elf, profile.id
        limit = args.limit or prog.limit
    ex = execute(elf, limit)
    out = {"target": args.target, "profile": profile_id, "status": ex.status, "artifact": ex.artifact}
    if ex.trace is not None:
        out.update(account(ex.trace, model).to_dict())
        out.update(retired=ex.trace.retired, exit_code=ex.trace.exit_code,
                   output=ex.trace.output.decode("utf-8", "replace"))
    if ex.detail:
        out["error"] = ex.detail
    print(json.dumps(out, indent=2, sort_keys=True))
    if ex.status in ("load-failed",):
        return EXIT_CONFIG
    return EXIT_OK


def _profiles(args, cfg) -> list[OptProfile]:
    names = args.profiles or cfg.get("profiles")
    if names:
        if isinstance(names, str):
            names = [n for n in names.split(";") if n]
        return [OptProfile.parse(n) for n in names]
    return expand_profiles(_catalog(cfg))


def _programs(args, cfg) -> list[Program]:
    manifest = _manifest(cfg)
    names = args.programs or cfg.get("programs")
    if not names:
        return list(manifest.values())
    if isinstance(names, str):
        names = names.split(",")
    return [resolve_program(n, manifest) for n in names]


def cmd_bench(args, cfg) -> int:
    model = get_model(_setting(args, cfg, "model", "r0-like"))
    out = Path(_setting(args, cfg, "out", "zkopt-out"))
    rows = bench(_programs(args, cfg), _profiles(args, cfg), model, _toolchain(args, cfg), jobs=_jobs(args, cfg),
                 native_reps=int(_setting(args, cfg, "native_reps", 0)))
    written = write_report(rows, out, figures=not args.no_figures)
    for p in written:
        print(p)
    failed = [r for r in rows if not r.ok]
    for r in failed:
        log.warning("%s [%s]: %s %s", r.program, r.profile, r.status, r.error.splitlines()[0] if r.error else "")
    return EXIT_OK


def cmd_tune(args, cfg) -> int:
    prog = resolve_program(args.program, _manifest(cfg))
    tc_kw = dict(
        catalog=_catalog(cfg).passes,
        max_depth=int(_setting(args, cfg, "depth", 20)),
        iterations=int(_setting(args, cfg, "iterations", 160)),
        population=int(cfg.get("population", 20)),
        mutation_rate=float(cfg.get("mutation_rate", 0.3)),
        tournament=int(cfg.get("tournament", 2)),
        elitism=int(cfg.get("elitism", 1)),
        seed=int(_setting(args, cfg, "seed", 0)),
        model=get_model(_setting(args, cfg, "model", "r0-like")),
    )
    result = tune(prog, TuneConfig(**tc_kw), _toolchain(args, cfg), jobs=_jobs(args, cfg))
    text = result.to_jsonl()
    out = _setting(args, cfg, "out")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text)
    summary = {"program": result.program, "best": list(result.best.passes), "fitness": result.best.fitness,
               "baseline": result.baseline, "levels": result.levels, "evaluations": len(result.log)}
    print(json.dumps(summary, sort_keys=True))
    return EXIT_OK


def cmd_mine(args, cfg) -> int:
    tables = mine_subsequences(load_results(args.logs), k=args.k)
    print(json.dumps(tables.to_dict(), indent=2))
    return EXIT_OK


def cmd_analyze(args, cfg) -> int:
    model = get_model(_setting(args, cfg, "model", "r0-like"))
    target = Path(args.target)
    if target.exists() and target.suffix != ".c":
        elf = target.read_bytes()
    else:
        prog = resolve_program(args.target, _manifest(cfg))
        elf = prog.elf.read_bytes() if prog.elf else \
            _toolchain(args, cfg).compile(prog.unit(), OptProfile.parse(args.profile)).elf
    for f in scan(load_elf(elf), model, page_threshold=args.page_threshold, ratio_threshold=args.ratio_threshold):
        print(f.to_json())
    return EXIT_OK


def cmd_oracle(args, cfg) -> int:
    prog = resolve_program(args.program, _manifest(cfg))
    verdict = diff_oracle(prog, OptProfile.parse(args.a), OptProfile.parse(args.b), _toolchain(args, cfg),
                          limit=args.limit)
    print(json.dumps({"program": prog.id, "a": args.a, "b": args.b, "verdict": verdict.kind,
                      "detail": verdict.detail}, sort_keys=True))
    return EXIT_DIVERGENT if verdict.divergent else EXIT_OK


def cmd_report(args, cfg) -> int:
    rows = read_metrics_csv(Path(args.rows).read_text())
    kw = {}
    if args.tune_logs:
        results = load_results(args.tune_logs)
        kw["tuned"] = {r.program: r.best.fitness for r in results if r.best.finite}
        kw["levels"] = {r.program: r.levels for r in results}
    out = Path(_setting(args, cfg, "out", "zkopt-report"))
    for p in write_report(rows, out, figures=not args.no_figures, **kw):
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="YAML config file; flags override its values")
    common.add_argument("--model", help="cost model: r0-like, uniform, or a model file")
    common.add_argument("--seed", type=int)
    common.add_argument("--iterations", type=int)
    common.add_argument("--jobs", type=int, help="parallel builds/runs (default: CPU count)")
    common.add_argument("--out", help="output file or directory")
    common.add_argument("--store", help="artifact store directory (default: temporary)")
    common.add_argument("-v", "--verbose", action="store_true")

    ap = argparse.ArgumentParser(prog="zkopt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"zkopt {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", parents=[common], help="run one program and print its cycle breakdown")
    p.add_argument("target", help="ELF file, C source, or manifest program id")
    p.add_argument("--profile", default="baseline")
    p.add_argument("--limit", type=int)
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("bench", parents=[common], help="corpus x profiles -> CSV, summary and figures")
    p.add_argument("--programs", help="comma-separated ids (default: whole manifest)")
    p.add_argument("--profiles", help="semicolon-separated profiles (default: baseline, every pass, six levels)")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_bench)

    p = sub.add_parser("tune", parents=[common], help="genetic search over pass sequences")
    p.add_argument("program")
    p.add_argument("--depth", type=int)
    p.set_defaults(fn=cmd_tune)

    p = sub.add_parser("mine", parents=[common], help="frequent passes among best and worst tuned sequences")
    p.add_argument("logs", nargs="+", help="tuning logs written by `tune --out`")
    p.add_argument("-k", type=int, default=5)
    p.set_defaults(fn=cmd_mine)

    p = sub.add_parser("analyze", parents=[common], help="static idiom findings as JSON lines")
    p.add_argument("target")
    p.add_argument("--profile", default="baseline")
    p.add_argument("--page-threshold", type=int, default=16)
    p.add_argument("--ratio-threshold", type=float, default=0.5)
    p.set_defaults(fn=cmd_analyze)

    p = sub.add_parser("oracle", parents=[common], help="differential check of two profiles")
    p.add_argument("program")
    p.add_argument("--a", default="baseline")
    p.add_argument("--b", default="O2")
    p.add_argument("--limit", type=int)
    p.set_defaults(fn=cmd_oracle)

    p = sub.add_parser("report", parents=[common], help="render summary and figures from a metrics CSV")
    p.add_argument("rows", help="metrics.csv written by bench")
    p.add_argument("--tune-logs", nargs="*", default=[])
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(fn=cmd_report)
    return ap


def main(argv=None) -> int:
    ap = build_parser()
    args = ap.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        cfg = _load_config(args.config)
        return args.fn(args, cfg)
    except (ConfigError, CostModelError, ManifestError, ProfileError, ToolchainError, TunerError, ElfError,
            UndecodableImage, ReportError, InsufficientCandidates, OSError) as exc:
        print(f"zkopt {args.command}: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
