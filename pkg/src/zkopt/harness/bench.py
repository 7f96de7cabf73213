"""Building, running and measuring corpus programs."""

from __future__ import annotations

import hashlib
import logging
import statistics
import subprocess
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from ..corpus import Program
from ..cost import CostModel, CycleBreakdown, ProvingEstimator, account, estimate_proving
from ..elf import ElfError, load_elf
from ..isa import EmulationError
from ..machine import CycleLimitExceeded, RunTrace, run
from ..toolchain.driver import Toolchain, ToolchainConfig, ToolchainError, expand_argv
from ..toolchain.profiles import LEVEL, OptProfile

log = logging.getLogger(__name__)

# run statuses
OK, LIMIT, FAULT, BUILD_FAILED, LOAD_FAILED = "ok", "limit", "fault", "build-failed", "load-failed"
PREBUILT = "prebuilt"


@dataclass(frozen=True)
class Execution:
    status: str
    trace: RunTrace | None = None
    detail: str = ""
    artifact: str = ""
    seconds: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status == OK


def execute(elf: bytes, limit: int) -> Execution:
    """Load and run one ELF, folding every failure into a status."""
    digest = hashlib.sha256(elf).hexdigest()
    try:
        image = load_elf(elf)
    except ElfError as exc:
        return Execution(LOAD_FAILED, detail=str(exc), artifact=digest)
    t0 = time.perf_counter()
    try:
        trace = run(image, limit=limit)
    except CycleLimitExceeded as exc:
        return Execution(LIMIT, exc.trace, str(exc), digest, time.perf_counter() - t0)
    except EmulationError as exc:
        return Execution(FAULT, None, f"{type(exc).__name__}: {exc}", digest, time.perf_counter() - t0)
    return Execution(OK, trace, "", digest, time.perf_counter() - t0)


def build(program: Program, profile: OptProfile, toolchain: Toolchain) -> tuple[bytes, str]:
    """ELF bytes and the profile id they stand for; prebuilt programs ignore the profile."""
    if program.elf is not None:
        return Path(program.elf).read_bytes(), PREBUILT
    art = toolchain.compile(program.unit(), profile)
    return art.elf, profile.id


def execute_program(program: Program, profile: OptProfile, toolchain: Toolchain,
                    limit: int | None = None) -> Execution:
    try:
        elf, _ = build(program, profile, toolchain)
    except (ToolchainError, OSError) as exc:
        return Execution(BUILD_FAILED, detail=str(exc))
    return execute(elf, limit or program.limit)


@dataclass(frozen=True)
class MetricsRow:
    program: str
    profile: str
    model: str
    status: str
    artifact: str = ""
    cycles: CycleBreakdown | None = None
    retired: int | None = None
    exit_code: int | None = None
    output_hash: str = ""
    emu_seconds: float = 0.0
    proving_seconds: float | None = None
    native_seconds: float | None = None
    error: str = ""

    @property
    def ok(self) -> bool:
        return self.status == OK

    def metric(self, name: str):
        if name in ("total", "compute", "paging", "page_ins", "page_outs"):
            return None if self.cycles is None else getattr(self.cycles, name)
        return getattr(self, name)

    def key(self) -> tuple[str, str, str]:
        return self.program, self.profile, self.model


def row_from_execution(program: str, profile: str, model: CostModel, ex: Execution,
                       estimator: ProvingEstimator | None = None) -> MetricsRow:
    if ex.trace is None:
        return MetricsRow(program, profile, model.name, ex.status, ex.artifact, error=ex.detail,
                          emu_seconds=ex.seconds)
    cycles = account(ex.trace, model)
    tr = ex.trace
    return MetricsRow(
        program, profile, model.name, ex.status, ex.artifact, cycles, tr.retired, tr.exit_code,
        hashlib.sha256(tr.output).hexdigest()[:16], ex.seconds,
        None if estimator is None or not ex.ok else estimate_proving(cycles, estimator), error=ex.detail)


def run_benchmark(program: Program, profile: OptProfile, model: CostModel, toolchain: Toolchain | None = None,
                  limit: int | None = None, estimator: ProvingEstimator | None = None,
                  native_reps: int = 0) -> MetricsRow:
    """One measured row; build and run failures become failed rows, never exceptions."""
    toolchain = toolchain or Toolchain()
    try:
        elf, pid = build(program, profile, toolchain)
    except (ToolchainError, OSError) as exc:
        return MetricsRow(program.id, profile.id, model.name, BUILD_FAILED, error=str(exc))
    row = row_from_execution(program.id, pid, model, execute(elf, limit or program.limit), estimator)
    if native_reps and row.ok and program.source is not None:
        level = profile.level if profile.kind == LEVEL else "O0"
        try:
            secs = native_time(program, level, native_reps, toolchain.config)
        except HostBuildFailed as exc:
            log.warning("native timing skipped for %s: %s", program.id, exc)
        else:
            row = MetricsRow(**{**row.__dict__, "native_seconds": secs})
    return row


def bench(programs: Sequence[Program], profiles: Sequence[OptProfile], model: CostModel,
          toolchain: Toolchain | None = None, jobs: int = 1, estimator: ProvingEstimator | None = None,
          native_reps: int = 0) -> list[MetricsRow]:
    """Every (program, profile) pair, ordered by input position regardless of completion order."""
    toolchain = toolchain or Toolchain()
    pairs = [(p, prof) for p in programs for prof in profiles]

    def one(pair):
        return run_benchmark(pair[0], pair[1], model, toolchain, estimator=estimator, native_reps=native_reps)

    if jobs <= 1:
        return [one(pair) for pair in pairs]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(one, pairs))


class HostBuildFailed(Exception):
    pass


def native_time(program: Program | str | Path, level: str = "O2", reps: int = 10,
                config: ToolchainConfig | None = None) -> float:
    """Median wall time of ``reps`` runs of a host build at ``-<level>``."""
    if reps < 1:
        raise ValueError("reps must be at least 1")
    config = config or ToolchainConfig.load()
    if not isinstance(program, Program):
        program = Program(Path(program).stem, source=Path(program).resolve())
    if program.source is None:
        raise HostBuildFailed(f"{program.id}: no source to build for the host")
    with tempfile.TemporaryDirectory(prefix="zkopt-native-") as tmp:
        exe = Path(tmp) / "prog"
        argv = expand_argv(config.host_cc, {
            "runtime": str(config.runtime_dir), "defines": [f"-D{k}={v}" for k, v in sorted(program.defines.items())],
            "level": [f"-{level.lstrip('-')}"], "input": str(program.source), "output": str(exe)})
        try:
            proc = subprocess.run(argv, capture_output=True, text=True, timeout=config.timeout)
        except (OSError, subprocess.TimeoutExpired) as exc:
            raise HostBuildFailed(f"host compiler failed to start: {exc}") from None
        if proc.returncode != 0:
            raise HostBuildFailed(proc.stderr.strip()[-2000:] or f"exit code {proc.returncode}")
        samples = []
        for _ in range(reps):
            t0 = time.perf_counter()
            subprocess.run([str(exe)], stdout=subprocess.DEVNULL, stderr=subprocess.DEVNULL, check=False)
            samples.append(time.perf_counter() - t0)
    return statistics.median(samples)


def rows_by_key(rows: Iterable[MetricsRow]) -> dict[tuple[str, str, str], MetricsRow]:
    return {r.key(): r for r in rows}
