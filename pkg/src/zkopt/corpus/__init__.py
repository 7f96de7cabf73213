"""Desk-scale benchmark corpus and its manifest."""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import yaml

from ..toolchain.driver import SourceUnit

CORPUS_DIR = Path(__file__).parent
MANIFEST = CORPUS_DIR / "manifest.yaml"
DEFAULT_LIMIT = 10_000_000


class ManifestError(ValueError):
    pass


@dataclass(frozen=True)
class Program:
    id: str
    source: Path | None = None
    elf: Path | None = None
    defines: dict = field(default_factory=dict)
    limit: int = DEFAULT_LIMIT

    def unit(self) -> SourceUnit:
        if self.source is None:
            raise ManifestError(f"{self.id}: prebuilt program has no source")
        return SourceUnit(self.id, self.source, self.defines)

    def with_defines(self, **defines) -> "Program":
        return Program(self.id, self.source, self.elf, {**self.defines, **defines}, self.limit)


def load_manifest(path: str | Path | None = None) -> dict[str, Program]:
    """Programs keyed by id, in manifest order.  Relative paths resolve against the manifest."""
    path = Path(path or MANIFEST)
    try:
        data = yaml.safe_load(path.read_text()) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ManifestError(f"cannot read manifest {path}: {exc}") from None
    out = {}
    for pid, entry in (data.get("programs") or {}).items():
        entry = entry or {}
        src, elf = entry.get("source"), entry.get("elf")
        if bool(src) == bool(elf):
            raise ManifestError(f"{path}: program {pid!r} needs exactly one of source/elf")
        out[pid] = Program(
            id=str(pid),
            source=(path.parent / src).resolve() if src else None,
            elf=(path.parent / elf).resolve() if elf else None,
            defines={str(k): str(v) for k, v in (entry.get("defines") or {}).items()},
            limit=int(entry.get("limit", DEFAULT_LIMIT)),
        )
    return out


def resolve_program(name: str, manifest: dict[str, Program] | None = None) -> Program:
    """A manifest id, or a path to a ``.c`` source or a prebuilt ELF."""
    manifest = load_manifest() if manifest is None else manifest
    if name in manifest:
        return manifest[name]
    p = Path(name)
    if p.exists():
        if p.suffix == ".c":
            return Program(p.stem, source=p.resolve())
        return Program(p.stem, elf=p.resolve())
    raise ManifestError(f"unknown program {name!r}: not in the manifest and not a file")
