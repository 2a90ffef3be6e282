"""Exception types shared across the package.

Plain ``ValueError`` covers ordinary bad arguments; the subclasses below exist
where callers want a distinct except target.
"""


class ClipFormatError(ValueError):
    """A clip, skeleton, narration, or checkpoint file failed to parse."""


class DegenerateGeometryError(ValueError):
    """Point configuration is rank-deficient; alignment is underdetermined."""


class ConfigError(ValueError):
    """A run configuration is inconsistent or references missing files."""


class StageError(RuntimeError):
    """A pipeline stage failed. Carries the stage name for diagnostics."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage
