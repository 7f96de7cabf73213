from .driver import (BuildArtifact, CompileFailed, SourceUnit, Toolchain, ToolchainConfig, ToolchainError,
                     ToolNotFound, UnknownPass)
from .profiles import DEFAULT_PASSES, STANDARD_LEVELS, OptProfile, PassCatalog, ProfileError, expand_profiles

__all__ = ["BuildArtifact", "CompileFailed", "SourceUnit", "Toolchain", "ToolchainConfig", "ToolchainError",
           "ToolNotFound", "UnknownPass", "DEFAULT_PASSES", "STANDARD_LEVELS", "OptProfile", "PassCatalog",
           "ProfileError", "expand_profiles"]
