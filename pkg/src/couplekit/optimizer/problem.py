"""Constrained design problems over surrogate or analytic response channels."""

from __future__ import annotations

import json
import math
from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Protocol

import numpy as np

from couplekit.core.dataset import OutputChannel
from couplekit.core.space import DesignSpace
from couplekit.errors import UnknownNameError, ValidationError

DIRECTIONS = ("<=", ">=")
STEP_TOL = 1e-8
FEASIBILITY_TOL = 1e-6


class ResponseModel(Protocol):
    """A smooth channel in hat space.

    value/gradient take normalized inputs and return the standardized output;
    model units are offset + scale * value.
    """

    name: str
    offset: float
    scale: float

    def value(self, u: np.ndarray) -> float: ...

    def gradient(self, u: np.ndarray) -> np.ndarray: ...


@dataclass(frozen=True, slots=True, eq=False)
class AnalyticChannel:
    """Closed-form channel fn(x) in model units, exposed through the hat-space protocol."""

    name: str
    space: DesignSpace
    fn: Callable[[np.ndarray], float]
    grad: Callable[[np.ndarray], np.ndarray] | None = None
    offset: float = 0.0
    scale: float = 1.0

    def __post_init__(self):
        if not self.scale > 0:
            raise ValidationError(f"{self.name}: scale must be positive")

    def evaluate(self, x: np.ndarray) -> float:
        return float(self.fn(np.asarray(x, dtype=float)))

    def value(self, u: np.ndarray) -> float:
        return (self.evaluate(self.space.denormalize(u)) - self.offset) / self.scale

    def gradient(self, u: np.ndarray) -> np.ndarray:
        x = self.space.denormalize(u)
        if self.grad is not None:
            g = np.asarray(self.grad(x), dtype=float)
        else:
            g = _central_gradient(self.fn, x, self.space.span)
        return g * self.space.span / self.scale


def _central_gradient(fn, x: np.ndarray, span: np.ndarray) -> np.ndarray:
    g = np.empty_like(x)
    for i in range(x.size):
        h = 1e-6 * span[i]
        xp, xm = x.copy(), x.copy()
        xp[i] += h
        xm[i] -= h
        g[i] = (fn(xp) - fn(xm)) / (2 * h)
    return g


@dataclass(frozen=True, slots=True)
class Constraint:
    channel: str
    limit: float
    direction: str = "<="

    def __post_init__(self):
        if self.direction not in DIRECTIONS:
            raise ValidationError(f"{self.channel}: direction must be one of {DIRECTIONS}")
        if not math.isfinite(self.limit):
            raise ValidationError(f"{self.channel}: constraint limit must be finite")

    def to_dict(self) -> dict[str, Any]:
        return {"channel": self.channel, "limit": self.limit, "direction": self.direction}


@dataclass(frozen=True, slots=True, eq=False)
class ProblemDefinition:
    """Minimize one channel subject to inequality limits on others.

    reference optionally maps channels to ground-truth functions in model
    units (synthetic benchmarks), used for reporting only.
    """

    space: DesignSpace
    objective: str
    constraints: tuple[Constraint, ...]
    models: Mapping[str, ResponseModel]
    reference: Mapping[str, Callable[[np.ndarray], float]] = field(default_factory=dict)
    label: str = ""
    channels: dict[str, OutputChannel] = field(init=False, default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, "constraints", tuple(self.constraints))
        for name in [self.objective] + [c.channel for c in self.constraints]:
            if name not in self.models:
                raise UnknownNameError("channel without a model", name)
        limited = {c.channel for c in self.constraints}
        channels = {}
        for name, model in self.models.items():
            dim = getattr(model, "dim", self.space.dim)
            if dim != self.space.dim:
                raise ValidationError(
                    f"model {name!r} expects {dim} inputs, space has {self.space.dim}"
                )
            if name == self.objective:
                kind = "objective"
            elif name in limited:
                kind = "constraint"
            else:
                kind = "auxiliary"
            channels[name] = OutputChannel(name, kind, float(model.offset), float(model.scale))
        object.__setattr__(self, "channels", channels)

    # -- hat-space evaluation ----------------------------------------------

    def objective_hat(self, u: np.ndarray) -> float:
        return self.models[self.objective].value(u)

    def objective_value(self, u: np.ndarray) -> float:
        return self.channels[self.objective].destandardize(self.objective_hat(u))

    def constraint_hat(self, u: np.ndarray) -> np.ndarray:
        """Constraint values in standardized units, feasible when <= 0."""
        out = np.empty(len(self.constraints))
        for j, c in enumerate(self.constraints):
            bound = self.channels[c.channel].standardize(c.limit)
            v = self.models[c.channel].value(u)
            out[j] = v - bound if c.direction == "<=" else bound - v
        return out

    def constraint_jacobian(self, u: np.ndarray) -> np.ndarray:
        rows = []
        for c in self.constraints:
            g = self.models[c.channel].gradient(u)
            rows.append(g if c.direction == "<=" else -g)
        return np.array(rows).reshape(len(self.constraints), self.space.dim)

    def reference_objective(self, x: np.ndarray) -> float | None:
        fn = self.reference.get(self.objective)
        return None if fn is None else float(fn(np.asarray(x, dtype=float)))

    # -- derived problems --------------------------------------------------

    def reordered(self, names: Sequence[str]) -> ProblemDefinition:
        """Same problem with the design variables in another order."""
        space = self.space.reordered(names)
        perm = np.array(self.space.indices(names))
        inverse = np.argsort(perm)
        models = {k: _PermutedModel(m, inverse) for k, m in self.models.items()}
        reference = {
            k: (lambda x, fn=fn: fn(np.asarray(x)[inverse])) for k, fn in self.reference.items()
        }
        return ProblemDefinition(space, self.objective, self.constraints, models, reference, self.label)

    # -- files -------------------------------------------------------------

    @classmethod
    def load(cls, path: Path, space: DesignSpace | None = None) -> ProblemDefinition:
        """Read {"space", "objective", "constraints", "model_files"}; paths are file-relative."""
        from couplekit.sgp.fitc import FitcModel

        path = Path(path)
        try:
            raw = json.loads(path.read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ValidationError(f"problem file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
        base = path.parent
        if space is None:
            spec = raw.get("space")
            if spec is None:
                raise ValidationError(f"{path}: missing 'space'")
            space = (
                DesignSpace.from_dict(spec)
                if isinstance(spec, dict)
                else DesignSpace.load(base / spec)
            )
        try:
            objective = str(raw["objective"])
            constraints = tuple(
                Constraint(str(c["channel"]), float(c["limit"]), str(c.get("direction", "<=")))
                for c in raw.get("constraints", [])
            )
            files = dict(raw["model_files"])
        except (KeyError, TypeError) as exc:
            raise ValidationError(f"{path}: malformed problem file ({exc})") from exc
        models = {name: FitcModel.load(base / p) for name, p in files.items()}
        return cls(space, objective, constraints, models, label=str(raw.get("label", "")))


@dataclass(frozen=True, slots=True, eq=False)
class _PermutedModel:
    inner: ResponseModel
    inverse: np.ndarray

    @property
    def name(self) -> str:
        return self.inner.name

    @property
    def offset(self) -> float:
        return self.inner.offset

    @property
    def scale(self) -> float:
        return self.inner.scale

    @property
    def dim(self) -> int:
        return len(self.inverse)

    def value(self, u: np.ndarray) -> float:
        return self.inner.value(np.asarray(u)[self.inverse])

    def gradient(self, u: np.ndarray) -> np.ndarray:
        # inner gradient is in the original order; map it to the new order
        g = self.inner.gradient(np.asarray(u)[self.inverse])
        return np.asarray(g)[np.argsort(self.inverse)]


def problem_file_dict(
    space_path: str, objective: str, constraints: Sequence[Constraint], model_files: dict[str, str], label: str = ""
) -> dict[str, Any]:
    d: dict[str, Any] = {
        "space": space_path,
        "objective": objective,
        "constraints": [c.to_dict() for c in constraints],
        "model_files": dict(model_files),
    }
    if label:
        d["label"] = label
    return d
