"""Exception hierarchy shared by the library and the CLI."""

from __future__ import annotations


class LdrError(Exception):
    """Base class for all ldrkit errors."""


class DimensionError(LdrError, ValueError):
    pass


class PotencyError(LdrError, ValueError):
    """Operator has no usable potency ``A^q = a I``."""


class SingularOperatorError(LdrError, ValueError):
    """``I - a B^q`` is singular or too badly conditioned to invert."""


class NotDiagonalizableError(LdrError, ValueError):
    pass


class ConstraintError(LdrError, ValueError):
    """Defining vectors violate a structured-family constraint."""


class RankError(LdrError, ValueError):
    """Displacement rank exceeds the requested generator width."""

    def __init__(self, measured: int, requested: int):
        super().__init__(
            f"displacement rank {measured} exceeds requested width {requested}"
        )
        self.measured = measured
        self.requested = requested


class SelectorError(LdrError, RuntimeError):
    """No (h, j) with a nonsingular selector diagonal was found."""

    def __init__(self, best: float):
        super().__init__(
            f"candidate budget exhausted; best minimal |D_i| = {best:.3e}"
        )
        self.best = best


class CertificateError(LdrError, RuntimeError):
    """A constructed object failed its numerical certificate."""


class StaleCacheError(LdrError, RuntimeError):
    pass


class ModelFileError(LdrError, ValueError):
    """Malformed, truncated or version-mismatched model/config file."""


class TrainingError(LdrError, RuntimeError):
    """Training diverged (non-finite loss)."""


class InvariantError(LdrError, RuntimeError):
    """An experiment report violated a property it is expected to satisfy."""
