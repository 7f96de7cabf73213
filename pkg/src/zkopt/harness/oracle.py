"""Differential oracle: two builds of one program must agree on exit code and output."""

from __future__ import annotations

from dataclasses import dataclass

from ..corpus import Program
from ..toolchain.driver import Toolchain
from ..toolchain.profiles import OptProfile
from .bench import BUILD_FAILED, LIMIT, LOAD_FAILED, OK, Execution, build, execute, execute_program

EQUIVALENT, DIVERGENT, INCONCLUSIVE = "equivalent", "divergent", "inconclusive"


@dataclass(frozen=True)
class OracleVerdict:
    kind: str
    detail: str = ""

    @property
    def divergent(self) -> bool:
        return self.kind == DIVERGENT

    def __str__(self):
        return f"{self.kind}({self.detail})" if self.detail else self.kind


def compare(a: Execution, b: Execution) -> OracleVerdict:
    """Symmetric verdict for two executions."""
    if a.status in (BUILD_FAILED, LOAD_FAILED) or b.status in (BUILD_FAILED, LOAD_FAILED):
        why = "; ".join(f"{s}: {e.detail}" for s, e in (("a", a), ("b", b)) if e.status in (BUILD_FAILED, LOAD_FAILED))
        return OracleVerdict(INCONCLUSIVE, why)
    if a.ok and b.ok:
        ta, tb = a.trace, b.trace
        if ta.exit_code != tb.exit_code:
            return OracleVerdict(DIVERGENT, f"exit {ta.exit_code} vs {tb.exit_code}")
        if ta.output != tb.output:
            return OracleVerdict(DIVERGENT, "output")
        return OracleVerdict(EQUIVALENT)
    if (a.status == LIMIT) != (b.status == LIMIT):
        return OracleVerdict(DIVERGENT, "limit")
    if a.ok or b.ok:
        bad = b if a.ok else a
        return OracleVerdict(DIVERGENT, f"fault: {bad.detail}")
    return OracleVerdict(INCONCLUSIVE, f"both failed ({a.status}, {b.status})")


def diff_oracle(program: Program, a: OptProfile, b: OptProfile, toolchain: Toolchain | None = None,
                limit: int | None = None) -> OracleVerdict:
    toolchain = toolchain or Toolchain()
    return compare(execute_program(program, a, toolchain, limit), execute_program(program, b, toolchain, limit))


class NoFaultSite(ValueError):
    pass


def inject_output_fault(elf: bytes, expected_output: bytes, min_len: int = 3) -> bytes:
    """Flip one bit in the ELF inside a string the program prints.

    Looks for the longest prefix of ``expected_output`` (at least ``min_len``
    bytes) stored verbatim in the file and flips the low bit of its first byte,
    so the patched binary still runs but prints something different.
    """
    for n in range(min(len(expected_output), 32), min_len - 1, -1):
        at = elf.find(expected_output[:n])
        if at >= 0:
            patched = bytearray(elf)
            patched[at] ^= 0x01
            return bytes(patched)
    raise NoFaultSite("no printed string found verbatim in the ELF")


def fault_fixture(program: Program, toolchain: Toolchain | None = None,
                  profile: OptProfile | None = None) -> tuple[Execution, Execution]:
    """(reference, fault-injected) executions for one program."""
    toolchain = toolchain or Toolchain()
    profile = profile or OptProfile.baseline()
    elf, _ = build(program, profile, toolchain)
    ref = execute(elf, program.limit)
    if ref.status != OK:
        raise NoFaultSite(f"{program.id}: reference run failed ({ref.status})")
    return ref, execute(inject_output_fault(elf, ref.trace.output), program.limit)
