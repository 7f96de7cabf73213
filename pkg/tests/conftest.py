import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from zkopt.asm import assemble, to_bytes  # noqa: E402
from zkopt.corpus import load_manifest  # noqa: E402
from zkopt.elf import PF_R, PF_W, PF_X, build_elf, load_elf  # noqa: E402
from zkopt.toolchain.driver import Toolchain  # noqa: E402

HAVE_TOOLCHAIN = bool(shutil.which("clang") or shutil.which("clang-14")) and bool(
    shutil.which("ld.lld") or shutil.which("ld.lld-14"))

needs_toolchain = pytest.mark.skipif(not HAVE_TOOLCHAIN, reason="clang/lld not installed")

CODE_BASE = 0x10000


def asm_elf(source: str, data: bytes = b"", data_addr: int = 0x20000, bss: int = 0) -> bytes:
    """ELF with the assembled code at CODE_BASE and an optional writable data segment."""
    segs = [(CODE_BASE, to_bytes(assemble(source, CODE_BASE)), PF_R | PF_X)]
    if data or bss:
        segs.append((data_addr, data, PF_R | PF_W, len(data) + bss))
    return build_elf(segs, CODE_BASE)


def asm_image(source: str, **kw):
    return load_elf(asm_elf(source, **kw))


@pytest.fixture(scope="session")
def toolchain(tmp_path_factory):
    tc = Toolchain(store=tmp_path_factory.mktemp("store"))
    yield tc
    tc.close()


@pytest.fixture(scope="session")
def manifest():
    return load_manifest()


# -- acceptance reporting -------------------------------------------------------

_CRITERIA: dict[int, str] = {}


class _Criterion:
    def __init__(self, number: int, title: str, budget: float):
        self.number, self.title, self.budget = number, title, budget
        self.detail = ""

    def __enter__(self):
        import time
        self._t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        import time
        elapsed = time.perf_counter() - self._t0
        ok = exc_type is None and elapsed < self.budget
        why = self.detail
        if exc_type is not None:
            why = f"{why}; {exc_type.__name__}: {str(exc).splitlines()[0] if str(exc) else ''}".lstrip("; ")
        elif elapsed >= self.budget:
            why = f"{why}; over time budget".lstrip("; ")
        _CRITERIA[self.number] = (f"criterion {self.number:2d} {'PASS' if ok else 'FAIL'}  {self.title}  "
                                  f"[{elapsed:.1f}s / {self.budget:g}s]  {why}")
        if exc_type is None and not ok:
            raise AssertionError(f"criterion {self.number} took {elapsed:.1f}s, budget {self.budget}s")
        return False


@pytest.fixture
def criterion():
    return _Criterion


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_CRITERIA):
        terminalreporter.write_line(_CRITERIA[n])
