"""Exception hierarchy shared by every couplekit module."""

from __future__ import annotations

import numpy as np


class CouplekitError(Exception):
    """Base class for all couplekit failures."""


class ValidationError(CouplekitError, ValueError):
    """Bad arguments or input files. The CLI exits 2 on these."""


class BoundsError(ValidationError):
    def __init__(self, name: str, value: float, lower: float, upper: float):
        super().__init__(f"{name}={value!r} outside bounds [{lower!r}, {upper!r}]")
        self.name = name
        self.value = value


class DomainError(ValidationError):
    """Normalized coordinate outside [0, 1]."""


class DegenerateChannelError(ValidationError):
    def __init__(self, name: str, detail: str = "constant output column"):
        super().__init__(f"{name}: {detail}")
        self.name = name


class UnknownNameError(ValidationError):
    def __init__(self, kind: str, name: str):
        super().__init__(f"unknown {kind} {name!r}")
        self.kind = kind
        self.name = name


class ConditioningError(CouplekitError, np.linalg.LinAlgError):
    """Cholesky failed even at the largest allowed jitter."""


class SweepError(CouplekitError):
    """A sweep cell hit an infeasible sub-optimization under the fail policy."""


class InfeasibleStageError(CouplekitError):
    def __init__(self, stage: int, result):
        super().__init__(
            f"stage {stage} infeasible (max violation {result.max_violation:.3g})"
        )
        self.stage = stage
        self.result = result
