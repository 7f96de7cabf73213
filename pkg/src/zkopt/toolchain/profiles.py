"""Optimization profiles and the pass catalog."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

BASELINE, LEVEL, SEQUENCE = "baseline", "level", "sequence"
STANDARD_LEVELS = ("O0", "O1", "O2", "O3", "Os", "Oz")
DEFAULT_MAX_DEPTH = 20

# Passes named in the per-pass impact discussion. The full list used in the
# original measurements was not published, so this is configuration.
DEFAULT_PASSES = (
    "inline", "always-inline", "licm", "instcombine", "sroa", "simplifycfg", "loop-unroll",
    "loop-deletion", "loop-extract", "jump-threading", "reg2mem", "ipsccp", "attributor",
    "speculative-execution", "loop-data-prefetch", "hot-cold-splitting", "mem2reg", "gvn", "dce",
    "sccp", "indvars", "loop-rotate", "tailcallelim", "early-cse", "correlated-propagation",
)

# new-pass-manager spellings for names that need adaptors or parameters
_PIPELINE_TEXT = {
    "licm": "function(loop-mssa(licm))",
    "indvars": "function(loop(indvars))",
    "loop-rotate": "function(loop(loop-rotate))",
    "loop-deletion": "function(loop(loop-deletion))",
    "loop-unroll": "function(loop-unroll)",
    "simplifycfg": "function(simplifycfg)",
    "hot-cold-splitting": "hotcoldsplit",
}


class ProfileError(ValueError):
    pass


@dataclass(frozen=True)
class PassCatalog:
    passes: tuple[str, ...] = DEFAULT_PASSES
    notes: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self):
        if len(set(self.passes)) != len(self.passes):
            dupes = sorted({p for p in self.passes if self.passes.count(p) > 1})
            raise ProfileError(f"duplicate pass names in catalog: {', '.join(dupes)}")
        object.__setattr__(self, "passes", tuple(self.passes))

    def __len__(self):
        return len(self.passes)

    def __iter__(self):
        return iter(self.passes)

    def __contains__(self, name):
        return name in self.passes


@dataclass(frozen=True)
class OptProfile:
    kind: str
    level: str | None = None
    passes: tuple[str, ...] = ()
    thresholds: tuple[tuple[str, int], ...] = ()
    lto: bool = False

    def __post_init__(self):
        object.__setattr__(self, "passes", tuple(self.passes))
        thr = self.thresholds.items() if isinstance(self.thresholds, Mapping) else self.thresholds
        object.__setattr__(self, "thresholds", tuple(sorted((str(k), int(v)) for k, v in thr)))
        if self.kind == BASELINE:
            if self.passes or self.thresholds or self.level or self.lto:
                raise ProfileError("the baseline profile takes no passes, level, thresholds or LTO")
        elif self.kind == LEVEL:
            if self.level not in STANDARD_LEVELS:
                raise ProfileError(f"unknown optimization level {self.level!r}")
            if self.passes:
                raise ProfileError("a standard-level profile takes no explicit passes")
        elif self.kind == SEQUENCE:
            if self.level:
                raise ProfileError("a pass-sequence profile takes no level")
            if self.lto:
                raise ProfileError("LTO is only supported for standard levels")
        else:
            raise ProfileError(f"unknown profile kind {self.kind!r}")

    @classmethod
    def baseline(cls) -> "OptProfile":
        return cls(BASELINE)

    @classmethod
    def standard(cls, level: str, thresholds: Mapping[str, int] | None = None, lto: bool = False):
        return cls(LEVEL, level=level.lstrip("-"), thresholds=tuple((thresholds or {}).items()), lto=lto)

    @classmethod
    def sequence(cls, passes: Iterable[str], thresholds: Mapping[str, int] | None = None):
        return cls(SEQUENCE, passes=tuple(passes), thresholds=tuple((thresholds or {}).items()))

    @property
    def id(self) -> str:
        if self.kind == BASELINE:
            base = "baseline"
        elif self.kind == LEVEL:
            base = f"-{self.level}"
        elif len(self.passes) == 1:
            base = self.passes[0]
        else:
            base = "seq:" + ",".join(self.passes)
        extras = [f"{k}={v}" for k, v in self.thresholds] + (["lto"] if self.lto else [])
        return base + "".join(f"+{e}" for e in extras)

    def validate(self, catalog: PassCatalog | None = None, max_depth: int = DEFAULT_MAX_DEPTH) -> None:
        if self.kind != SEQUENCE:
            return
        if len(self.passes) > max_depth:
            raise ProfileError(f"sequence of {len(self.passes)} passes exceeds max depth {max_depth}")
        if catalog is not None:
            unknown = [p for p in self.passes if p not in catalog]
            if unknown:
                raise ProfileError(f"passes not in catalog: {', '.join(unknown)}")

    def pipeline_text(self) -> str:
        return ",".join(_PIPELINE_TEXT.get(p, p) for p in self.passes)

    def to_dict(self) -> dict:
        return {"kind": self.kind, "level": self.level, "passes": list(self.passes),
                "thresholds": dict(self.thresholds), "lto": self.lto}

    @classmethod
    def from_dict(cls, data: Mapping) -> "OptProfile":
        return cls(data["kind"], data.get("level"), tuple(data.get("passes") or ()),
                   tuple((data.get("thresholds") or {}).items()), bool(data.get("lto", False)))

    @classmethod
    def parse(cls, text: str) -> "OptProfile":
        """Parse the short spellings used on the command line.

        ``baseline``, ``O2``/``-O2``, ``licm`` or ``seq:inline,licm``, each
        optionally followed by ``+inline-threshold=4328`` style thresholds.
        """
        head, *extras = text.split("+")
        thresholds, lto = {}, False
        for e in extras:
            if e == "lto":
                lto = True
                continue
            k, _, v = e.partition("=")
            if not v:
                raise ProfileError(f"bad threshold {e!r}")
            thresholds[k] = int(v)
        if head == "baseline":
            if thresholds or lto:
                raise ProfileError("the baseline profile takes no thresholds")
            return cls.baseline()
        if head.lstrip("-") in STANDARD_LEVELS:
            return cls.standard(head, thresholds, lto)
        if lto:
            raise ProfileError("LTO is only supported for standard levels")
        if head.startswith("seq:"):
            names = [p for p in head[4:].split(",") if p]
            return cls.sequence(names, thresholds)
        return cls.sequence([head], thresholds)


def expand_profiles(catalog: PassCatalog | Iterable[str]) -> list[OptProfile]:
    """Baseline, one single-pass profile per catalog entry, then the six levels."""
    if not isinstance(catalog, PassCatalog):
        catalog = PassCatalog(tuple(catalog))
    if not len(catalog):
        raise ProfileError("pass catalog is empty")
    return ([OptProfile.baseline()] + [OptProfile.sequence([p]) for p in catalog]
            + [OptProfile.standard(lvl) for lvl in STANDARD_LEVELS])
