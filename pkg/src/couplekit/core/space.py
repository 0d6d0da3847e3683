"""Design variables, bounds, and the [0, 1] hat-space normalization."""

from __future__ import annotations

import json
import math
from collections.abc import Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from couplekit.errors import BoundsError, DomainError, UnknownNameError, ValidationError

ROLES = ("plant", "control")
BOUND_TOL = 1e-12


@dataclass(frozen=True, slots=True)
class DesignVariable:
    name: str
    lower: float
    upper: float
    nominal: float
    role: str = "plant"

    def __post_init__(self):
        if not self.name:
            raise ValidationError("design variable name must be non-empty")
        for attr in ("lower", "upper", "nominal"):
            if not math.isfinite(getattr(self, attr)):
                raise ValidationError(f"{self.name}: {attr} must be finite")
        if not self.lower < self.upper:
            raise ValidationError(
                f"{self.name}: lower {self.lower!r} must be < upper {self.upper!r}"
            )
        if not self.lower <= self.nominal <= self.upper:
            raise BoundsError(self.name, self.nominal, self.lower, self.upper)
        if self.role not in ROLES:
            raise ValidationError(f"{self.name}: role must be one of {ROLES}, got {self.role!r}")

    @property
    def span(self) -> float:
        return self.upper - self.lower

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "lower": self.lower,
            "upper": self.upper,
            "nominal": self.nominal,
            "role": self.role,
        }


@dataclass(frozen=True, slots=True)
class DesignSpace:
    """Ordered design variables; index order is the order used in every matrix."""

    variables: tuple[DesignVariable, ...]
    fixed_parameters: dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "variables", tuple(self.variables))
        if not self.variables:
            raise ValidationError("design space needs at least one variable")
        seen: set[str] = set()
        for v in self.variables:
            if v.name in seen:
                raise ValidationError(f"duplicate design variable {v.name!r}")
            seen.add(v.name)
        for name, value in self.fixed_parameters.items():
            if name in seen:
                raise ValidationError(f"fixed parameter {name!r} shadows a design variable")
            if not math.isfinite(value):
                raise ValidationError(f"fixed parameter {name!r} must be finite")

    # -- shape and lookup --------------------------------------------------

    @property
    def dim(self) -> int:
        return len(self.variables)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(v.name for v in self.variables)

    @property
    def lower(self) -> np.ndarray:
        return np.array([v.lower for v in self.variables])

    @property
    def upper(self) -> np.ndarray:
        return np.array([v.upper for v in self.variables])

    @property
    def span(self) -> np.ndarray:
        return self.upper - self.lower

    @property
    def nominal(self) -> np.ndarray:
        return np.array([v.nominal for v in self.variables])

    def nominal_unit(self) -> np.ndarray:
        return self.normalize(self.nominal)

    def index(self, name: str) -> int:
        for i, v in enumerate(self.variables):
            if v.name == name:
                return i
        raise UnknownNameError("design variable", name)

    def indices(self, names: Iterable[str]) -> tuple[int, ...]:
        return tuple(self.index(n) for n in names)

    # -- normalization -----------------------------------------------------

    def normalize(self, x: Sequence[float] | np.ndarray) -> np.ndarray:
        """Map model units to [0, 1]^N_x using the declared bounds."""
        x = self._as_point(x)
        lo, hi = self.lower, self.upper
        tol = BOUND_TOL * np.maximum(1.0, np.maximum(np.abs(lo), np.abs(hi)))
        bad = np.argwhere((x < lo - tol) | (x > hi + tol))
        if bad.size:
            v = self.variables[bad[0][-1]]
            raise BoundsError(v.name, float(x[tuple(bad[0])]), v.lower, v.upper)
        return np.clip((x - lo) / (hi - lo), 0.0, 1.0)

    def denormalize(self, u: Sequence[float] | np.ndarray) -> np.ndarray:
        """Map a point of [0, 1]^N_x back to model units."""
        u = self._as_point(u)
        bad = np.argwhere((u < -BOUND_TOL) | (u > 1.0 + BOUND_TOL))
        if bad.size:
            name = self.variables[bad[0][-1]].name
            value = float(u[tuple(bad[0])])
            raise DomainError(f"{name}: normalized value {value!r} outside [0, 1]")
        u = np.clip(u, 0.0, 1.0)
        return self.lower + u * self.span

    def _as_point(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1:] != (self.dim,):
            raise ValidationError(f"expected {self.dim} coordinates, got shape {x.shape}")
        if not np.all(np.isfinite(x)):
            raise ValidationError("point has non-finite coordinates")
        return x

    # -- derived spaces ----------------------------------------------------

    def reordered(self, names: Sequence[str]) -> DesignSpace:
        if sorted(names) != sorted(self.names):
            raise ValidationError("reordering must name every variable exactly once")
        return DesignSpace(
            tuple(self.variables[self.index(n)] for n in names),
            dict(self.fixed_parameters),
        )

    def named(self, x: np.ndarray) -> dict[str, float]:
        return {n: float(v) for n, v in zip(self.names, x)}

    # -- files -------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "variables": [v.to_dict() for v in self.variables],
            "fixed_parameters": dict(self.fixed_parameters),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> DesignSpace:
        try:
            variables = tuple(
                DesignVariable(
                    name=str(v["name"]),
                    lower=float(v["lower"]),
                    upper=float(v["upper"]),
                    nominal=float(v["nominal"]),
                    role=str(v.get("role", "plant")),
                )
                for v in d["variables"]
            )
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"malformed design space: missing {exc}") from exc
        fixed = {str(k): float(v) for k, v in (d.get("fixed_parameters") or {}).items()}
        return cls(variables, fixed)

    @classmethod
    def load(cls, path: Path) -> DesignSpace:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ValidationError(f"design space file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(raw)

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")
