"""Genetic search over pass sequences with emulated cycles as fitness."""

from __future__ import annotations

import json
import logging
import random
from collections import Counter
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

from .corpus import Program
from .cost import R0_LIKE, CostModel, ProvingEstimator, account, estimate_proving
from .harness.bench import OK, Execution, execute
from .harness.oracle import compare
from .toolchain.driver import Toolchain, ToolchainError
from .toolchain.profiles import DEFAULT_MAX_DEPTH, DEFAULT_PASSES, OptProfile

log = logging.getLogger(__name__)

# candidate statuses; anything but OK means infinite fitness
BUILD_FAILED, RUN_FAILED, LIMIT, DIVERGENT = "build-failed", "run-failed", "limit", "divergent"


class TunerError(Exception):
    pass


class ConfigInvalid(TunerError):
    pass


class BaselineBuildFailed(TunerError):
    pass


class InsufficientCandidates(TunerError):
    pass


@dataclass(frozen=True)
class TuneConfig:
    catalog: tuple[str, ...] = DEFAULT_PASSES
    max_depth: int = DEFAULT_MAX_DEPTH
    iterations: int = 160
    population: int = 20
    mutation_rate: float = 0.3
    tournament: int = 2
    elitism: int = 1
    seed: int = 0
    limit: int | None = None
    target: str = "cycles"  # or "proving"
    model: CostModel = R0_LIKE
    estimator: ProvingEstimator | None = None
    levels: tuple[str, ...] = ("O3",)

    def __post_init__(self):
        object.__setattr__(self, "catalog", tuple(self.catalog))
        object.__setattr__(self, "levels", tuple(self.levels))
        if not self.catalog:
            raise ConfigInvalid("pass catalog is empty")
        if self.max_depth < 1:
            raise ConfigInvalid("max depth must be at least 1")
        if self.population < 2:
            raise ConfigInvalid("population must be at least 2")
        if not 0 <= self.mutation_rate <= 1:
            raise ConfigInvalid("mutation rate must be in [0, 1]")
        if self.tournament < 1 or self.iterations < 1:
            raise ConfigInvalid("tournament size and iterations must be positive")
        if not 0 <= self.elitism < self.population:
            raise ConfigInvalid("elitism must be below the population size")
        if self.target not in ("cycles", "proving"):
            raise ConfigInvalid(f"unknown fitness target {self.target!r}")
        if self.target == "proving" and self.estimator is None:
            raise ConfigInvalid("fitness target 'proving' needs an estimator")

    def to_dict(self) -> dict:
        return {"catalog": list(self.catalog), "max_depth": self.max_depth, "iterations": self.iterations,
                "population": self.population, "mutation_rate": self.mutation_rate,
                "tournament": self.tournament, "elitism": self.elitism, "seed": self.seed, "limit": self.limit,
                "target": self.target, "model": self.model.name, "levels": list(self.levels)}


@dataclass(frozen=True)
class Candidate:
    passes: tuple[str, ...]
    status: str
    fitness: int | float | None = None
    artifact: str = ""
    detail: str = ""

    @property
    def finite(self) -> bool:
        return self.status == OK

    def sort_key(self):
        # finite first, then cheaper, then shorter, then lexicographic
        return (0 if self.finite else 1, self.fitness if self.finite else 0, len(self.passes), self.passes)

    def to_dict(self) -> dict:
        return {"passes": list(self.passes), "status": self.status,
                "fitness": self.fitness if self.finite else None, "artifact": self.artifact,
                "detail": self.detail}

    @classmethod
    def from_dict(cls, d) -> "Candidate":
        return cls(tuple(d["passes"]), d["status"], d.get("fitness"), d.get("artifact", ""), d.get("detail", ""))


@dataclass(frozen=True)
class TuneResult:
    program: str
    config: dict
    best: Candidate
    history: tuple
    log: tuple[Candidate, ...]
    baseline: int | float
    levels: dict = field(default_factory=dict)
    oracle_findings: tuple = ()

    def to_jsonl(self) -> str:
        lines = [{"type": "config", "program": self.program, **self.config}]
        lines += [{"type": "eval", "index": i, **c.to_dict()} for i, c in enumerate(self.log)]
        lines.append({"type": "result", "best": self.best.to_dict(), "history": list(self.history),
                      "baseline": self.baseline, "levels": self.levels,
                      "oracle_findings": list(self.oracle_findings)})
        return "".join(json.dumps(rec, sort_keys=True) + "\n" for rec in lines)

    @classmethod
    def from_jsonl(cls, text: str) -> "TuneResult":
        cfg, evals, res = None, [], None
        for line in text.splitlines():
            if not line.strip():
                continue
            rec = json.loads(line)
            kind = rec.pop("type")
            if kind == "config":
                cfg = rec
            elif kind == "eval":
                rec.pop("index")
                evals.append(Candidate.from_dict(rec))
            elif kind == "result":
                res = rec
        if cfg is None or res is None:
            raise TunerError("truncated tuning log")
        program = cfg.pop("program")
        return cls(program, cfg, Candidate.from_dict(res["best"]), tuple(res["history"]), tuple(evals),
                   res["baseline"], res.get("levels", {}), tuple(res.get("oracle_findings", ())))


class Evaluator:
    """Fitness of pass sequences for one program, checked against the baseline build."""

    def __init__(self, program: Program, config: TuneConfig, toolchain: Toolchain | None = None):
        self.program = program
        self.config = config
        self.toolchain = toolchain or Toolchain()
        self.limit = config.limit or program.limit
        self._by_artifact: dict[str, tuple[Execution, int | float | None]] = {}
        self.oracle_findings: list[dict] = []
        try:
            art = self.toolchain.compile(program.unit(), OptProfile.baseline())
        except ToolchainError as exc:
            raise BaselineBuildFailed(f"{program.id}: {exc}") from None
        self.reference = execute(art.elf, self.limit)
        if self.reference.status != OK:
            raise BaselineBuildFailed(f"{program.id}: baseline run failed ({self.reference.status}: "
                                      f"{self.reference.detail})")
        self.baseline = self._fitness(self.reference)

    def _fitness(self, ex: Execution):
        b = account(ex.trace, self.config.model)
        if self.config.target == "proving":
            return estimate_proving(b, self.config.estimator)
        return b.total

    def evaluate_profile(self, profile: OptProfile) -> Candidate:
        try:
            art = self.toolchain.compile(self.program.unit(), profile)
        except ToolchainError as exc:
            return Candidate(profile.passes, BUILD_FAILED, detail=str(exc).splitlines()[0][:200])
        if art.hash not in self._by_artifact:
            ex = execute(art.elf, self.limit)
            self._by_artifact[art.hash] = (ex, self._fitness(ex) if ex.status == OK else None)
        ex, fit = self._by_artifact[art.hash]
        if ex.status != OK:
            status = LIMIT if ex.status == "limit" else RUN_FAILED
            return Candidate(profile.passes, status, artifact=art.hash, detail=ex.detail[:200])
        verdict = compare(self.reference, ex)
        if verdict.divergent:
            self.oracle_findings.append({"program": self.program.id, "profile": profile.id,
                                         "artifact": art.hash, "verdict": str(verdict)})
            return Candidate(profile.passes, DIVERGENT, artifact=art.hash, detail=str(verdict))
        return Candidate(profile.passes, OK, fit, art.hash)

    def evaluate(self, passes: Sequence[str]) -> Candidate:
        passes = tuple(passes)
        if len(passes) > self.config.max_depth:
            raise ConfigInvalid(f"sequence longer than max depth {self.config.max_depth}")
        unknown = [p for p in passes if p not in self.config.catalog]
        if unknown:
            raise ConfigInvalid(f"passes not in catalog: {', '.join(unknown)}")
        if not passes:
            return Candidate((), OK, self.baseline, "")
        return self.evaluate_profile(OptProfile.sequence(passes))


def evaluate(passes: Sequence[str], program: Program, config: TuneConfig,
             toolchain: Toolchain | None = None) -> Candidate:
    return Evaluator(program, config, toolchain).evaluate(passes)


class _GA:
    def __init__(self, config: TuneConfig, rng: random.Random):
        self.c = config
        self.rng = rng

    def random_sequence(self) -> tuple[str, ...]:
        n = self.rng.randint(0, self.c.max_depth)
        return tuple(self.rng.choice(self.c.catalog) for _ in range(n))

    def select(self, pop: list[Candidate]) -> Candidate:
        contestants = [pop[self.rng.randrange(len(pop))] for _ in range(self.c.tournament)]
        return min(contestants, key=Candidate.sort_key)

    def crossover(self, a: Sequence[str], b: Sequence[str]) -> tuple[str, ...]:
        i = self.rng.randint(0, len(a))
        j = self.rng.randint(0, len(b))
        return tuple(a[:i]) + tuple(b[j:])[: self.c.max_depth - i]

    def mutate(self, seq: tuple[str, ...]) -> tuple[str, ...]:
        if self.rng.random() >= self.c.mutation_rate:
            return seq
        ops = []
        if seq:
            ops += ["replace", "delete"]
        if len(seq) < self.c.max_depth:
            ops.append("insert")
        op = self.rng.choice(ops)
        s = list(seq)
        if op == "replace":
            s[self.rng.randrange(len(s))] = self.rng.choice(self.c.catalog)
        elif op == "delete":
            del s[self.rng.randrange(len(s))]
        else:
            s.insert(self.rng.randint(0, len(s)), self.rng.choice(self.c.catalog))
        return tuple(s)


def tune(program: Program, config: TuneConfig | None = None, toolchain: Toolchain | None = None,
         jobs: int = 1, evaluator: Evaluator | None = None) -> TuneResult:
    """Run the search until ``config.iterations`` candidate evaluations have been spent.

    Every evaluation counts against the budget, including repeats served from
    the cache; elites carried into the next generation are not re-evaluated.
    """
    config = config or TuneConfig()
    ev = evaluator or Evaluator(program, config, toolchain)
    rng = random.Random(config.seed)
    ga = _GA(config, rng)
    budget = config.iterations
    log_: list[Candidate] = []
    history: list = []
    best: Candidate | None = None

    def run_batch(seqs: list[tuple[str, ...]]) -> list[Candidate]:
        if jobs <= 1:
            return [ev.evaluate(s) for s in seqs]
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            return list(pool.map(ev.evaluate, seqs))

    seqs = [ga.random_sequence() for _ in range(config.population)]
    pop: list[Candidate] = []
    while budget > 0:
        seqs = seqs[:budget]
        evaluated = run_batch(seqs)
        budget -= len(evaluated)
        log_.extend(evaluated)
        pop = sorted(pop[: config.elitism] + evaluated, key=Candidate.sort_key)
        if best is None or pop[0].sort_key() < best.sort_key():
            best = pop[0]
        history.append(best.fitness if best.finite else None)
        if budget <= 0:
            break
        elites = pop[: config.elitism]
        seqs = []
        for _ in range(config.population - len(elites)):
            a, b = ga.select(pop), ga.select(pop)
            seqs.append(ga.mutate(ga.crossover(a.passes, b.passes)))
        pop = elites

    levels = {}
    for lvl in config.levels:
        cand = ev.evaluate_profile(OptProfile.standard(lvl))
        levels[f"-{lvl}"] = cand.fitness if cand.finite else None
    return TuneResult(program.id, config.to_dict(), best, tuple(history), tuple(log_), ev.baseline, levels,
                      tuple(ev.oracle_findings))


def exhaustive_depth1(program: Program, config: TuneConfig | None = None, toolchain: Toolchain | None = None,
                      jobs: int = 1) -> list[Candidate]:
    """Every single-pass sequence plus the empty one, best first."""
    config = config or TuneConfig()
    ev = Evaluator(program, config, toolchain)
    seqs = [()] + [(p,) for p in config.catalog]
    if jobs <= 1:
        cands = [ev.evaluate(s) for s in seqs]
    else:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            cands = list(pool.map(ev.evaluate, seqs))
    return sorted(cands, key=Candidate.sort_key)


@dataclass
class GramTables:
    best_unigrams: Counter
    best_bigrams: Counter
    worst_unigrams: Counter
    worst_bigrams: Counter

    def to_dict(self) -> dict:
        def enc(c: Counter):
            return [{"gram": list(k) if isinstance(k, tuple) else [k], "count": v}
                    for k, v in sorted(c.items(), key=lambda kv: (-kv[1], kv[0]))]
        return {"best_unigrams": enc(self.best_unigrams), "best_bigrams": enc(self.best_bigrams),
                "worst_unigrams": enc(self.worst_unigrams), "worst_bigrams": enc(self.worst_bigrams)}


def count_grams(sequences: Iterable[Sequence[str]], n: int = 1) -> Counter:
    """How many sequences contain each gram (a gram counts once per sequence)."""
    if n not in (1, 2):
        raise ValueError("gram length must be 1 or 2")
    out: Counter = Counter()
    for seq in sequences:
        if n == 1:
            out.update(set(seq))
        else:
            out.update({(a, b) for a, b in zip(seq, seq[1:])})
    return out


def mine_subsequences(results: Iterable[TuneResult], k: int = 5) -> GramTables:
    """Unigram and bigram frequencies among each result's k best and k worst finite candidates.

    Candidates are deduplicated by pass list before ranking.
    """
    best_pool, worst_pool = [], []
    for res in results:
        uniq: dict[tuple, Candidate] = {}
        for c in res.log:
            if c.finite:
                uniq.setdefault(c.passes, c)
        ranked = sorted(uniq.values(), key=Candidate.sort_key)
        if len(ranked) < k or k < 1:
            raise InsufficientCandidates(f"{res.program}: {len(ranked)} finite candidates, need {k}")
        best_pool += [c.passes for c in ranked[:k]]
        worst_pool += [c.passes for c in ranked[-k:]]
    return GramTables(count_grams(best_pool, 1), count_grams(best_pool, 2),
                      count_grams(worst_pool, 1), count_grams(worst_pool, 2))


def load_results(paths: Iterable[str | Path]) -> list[TuneResult]:
    return [TuneResult.from_jsonl(Path(p).read_text()) for p in paths]
