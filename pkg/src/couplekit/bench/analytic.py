"""Closed-form benchmark problems with known optima and coupling oracles."""

from __future__ import annotations

from collections.abc import Callable, Mapping, Sequence
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from couplekit.core.space import DesignSpace, DesignVariable
from couplekit.dca.report import CouplingReport
from couplekit.dca.sweep import aggregate, sweep_grid
from couplekit.errors import UnknownNameError, ValidationError
from couplekit.optimizer.problem import AnalyticChannel, Constraint, ProblemDefinition

OBJECTIVE = "f"


@dataclass(frozen=True, slots=True)
class AnalyticConstraint:
    channel: str
    fn: Callable[[np.ndarray], float]
    limit: float
    direction: str = "<="
    grad: Callable[[np.ndarray], np.ndarray] | None = None


@dataclass(frozen=True, slots=True)
class QuadraticForm:
    """f = sum w_i d_i^2 + sum_{i<j} C_ij d_i d_j with d = x - center."""

    weights: np.ndarray
    coupling: np.ndarray
    center: np.ndarray

    @property
    def hessian(self) -> np.ndarray:
        return 2.0 * np.diag(self.weights) + self.coupling

    def value(self, x: np.ndarray) -> float:
        d = np.asarray(x, dtype=float) - self.center
        return float(self.weights @ d**2 + 0.5 * d @ self.coupling @ d)

    def gradient(self, x: np.ndarray) -> np.ndarray:
        d = np.asarray(x, dtype=float) - self.center
        return 2.0 * self.weights * d + self.coupling @ d

    def response_slope(self, a: int, b: int) -> float:
        """d x*_A / d x_B with every other variable frozen (model units)."""
        return -self.coupling[a, b] / (2.0 * self.weights[a])


@dataclass(frozen=True, slots=True, eq=False)
class AnalyticProblem:
    name: str
    space: DesignSpace
    objective: Callable[[np.ndarray], float]
    gradient: Callable[[np.ndarray], np.ndarray] | None = None
    constraints: tuple[AnalyticConstraint, ...] = ()
    scale: float = 1.0
    optimum: np.ndarray | None = None
    optimum_value: float | None = None
    quadratic: QuadraticForm | None = None
    notes: dict[str, Any] = field(default_factory=dict)

    def problem(self) -> ProblemDefinition:
        models = {
            OBJECTIVE: AnalyticChannel(OBJECTIVE, self.space, self.objective, self.gradient, scale=self.scale)
        }
        for c in self.constraints:
            models[c.channel] = AnalyticChannel(c.channel, self.space, c.fn, c.grad)
        return ProblemDefinition(
            self.space,
            OBJECTIVE,
            tuple(Constraint(c.channel, c.limit, c.direction) for c in self.constraints),
            models,
            reference={OBJECTIVE: self.objective},
            label=self.name,
        )

    def oracle_matrices(self, norm: str = "rms", n_sweep: int = 11) -> CouplingReport:
        """Exact J_x and J_psi assuming every swept optimum stays inside the box.

        Only quadratic problems carry this oracle.
        """
        q = self.quadratic
        if q is None:
            raise ValidationError(f"{self.name}: no analytic coupling oracle")
        space = self.space
        n = space.dim
        lo, span, nominal = space.lower, space.span, space.nominal
        t = sweep_grid(n_sweep)
        jx = np.full((n, n), np.nan)
        jpsi = np.full((n, n), np.nan)
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                slope = q.response_slope(a, b)
                jx[a, b] = aggregate(np.full(t.size, slope * span[b] / span[a]), norm)
                samples = np.empty(t.size)
                for i, ti in enumerate(t):
                    x = nominal.copy()
                    x[b] = lo[b] + ti * span[b]
                    x[a] = q.center[a] + slope * (x[b] - q.center[b]) + sum(
                        q.response_slope(a, k) * (x[k] - q.center[k])
                        for k in range(n)
                        if k not in (a, b)
                    )
                    # envelope theorem: total derivative is the partial in x_B
                    samples[i] = q.gradient(x)[b] * span[b] / self.scale
                jpsi[a, b] = aggregate(samples, norm)
        return CouplingReport.from_matrices(space.names, jx, jpsi, label=f"{self.name} (oracle)")


def _box(n: int, bounds, nominal, prefix: str = "x") -> DesignSpace:
    lo, hi = bounds
    nominal = np.zeros(n) if nominal is None else np.broadcast_to(np.asarray(nominal, dtype=float), (n,))
    return DesignSpace(tuple(
        DesignVariable(f"{prefix}{i + 1}", float(lo), float(hi), float(nominal[i])) for i in range(n)
    ))


def quadratic_coupled(
    n: int = 2,
    coupling: Sequence[Sequence[float]] | np.ndarray | None = None,
    bounds: tuple[float, float] = (-1.0, 1.0),
    weights: Sequence[float] | None = None,
    center: Sequence[float] | None = None,
    nominal: Sequence[float] | float | None = None,
    name: str = "quadratic_coupled",
) -> AnalyticProblem:
    """Coupled convex quadratic; the objective scale is the box width.

    With n=2 and coupling [[0, 1], [1, 0]] this is x1^2 + x2^2 + x1*x2.
    """
    if n < 1:
        raise ValidationError(f"n must be >= 1, got {n}")
    c = np.zeros((n, n)) if coupling is None else np.array(coupling, dtype=float)
    if c.shape != (n, n):
        raise ValidationError(f"coupling matrix must be {n}x{n}, got {c.shape}")
    if not np.allclose(c, c.T, rtol=0, atol=1e-12):
        raise ValidationError("coupling matrix must be symmetric")
    if np.any(np.diag(c) != 0):
        raise ValidationError("coupling matrix diagonal must be zero (use weights)")
    w = np.ones(n) if weights is None else np.array(weights, dtype=float)
    ctr = np.zeros(n) if center is None else np.array(center, dtype=float)
    if w.shape != (n,) or ctr.shape != (n,):
        raise ValidationError(f"weights and center need {n} entries")
    q = QuadraticForm(w, c, ctr)
    if np.linalg.eigvalsh(q.hessian).min() <= 0:
        raise ValidationError("2*diag(weights) + coupling must be positive definite")

    space = _box(n, bounds, nominal)
    x_star = np.clip(ctr, space.lower, space.upper)
    inside = bool(np.all(x_star == ctr))
    return AnalyticProblem(
        name=name,
        space=space,
        objective=q.value,
        gradient=q.gradient,
        scale=float(np.max(space.span)),
        optimum=x_star if inside else None,
        optimum_value=0.0 if inside else None,
        quadratic=q,
    )


def separable(n: int = 3) -> AnalyticProblem:
    """Uncoupled quadratic; every optimum sits at its own center."""
    return quadratic_coupled(n, center=np.linspace(-0.5, 0.5, n), name="separable")


def sequence_benchmark() -> AnalyticProblem:
    """Four variables: x1 and x2 strongly coupled, x3 weakly tied to x1, x4 independent."""
    c = np.zeros((4, 4))
    c[0, 1] = c[1, 0] = 3.0
    c[0, 2] = c[2, 0] = 1.0
    return quadratic_coupled(
        4,
        c,
        weights=[2.0, 2.0, 1.0, 1.0],
        center=[0.5, 0.3, 0.0, 0.4],
        name="sequence_benchmark",
    )


def cubic_asymmetric() -> AnalyticProblem:
    """f = x1^2 + x2^2 + x1*x2^3 on [-1, 1]^2.

    x1*(x2) = -x2^3/2 moves with x2, while x2*(x1) = 0 across the swept range,
    so the coupling is one-directional.
    """

    def f(x):
        return float(x[0] ** 2 + x[1] ** 2 + x[0] * x[1] ** 3)

    def grad(x):
        return np.array([2 * x[0] + x[1] ** 3, 2 * x[1] + 3 * x[0] * x[1] ** 2])

    space = _box(2, (-1.0, 1.0), None)
    return AnalyticProblem(
        "cubic_asymmetric", space, f, grad, scale=2.0, optimum=np.zeros(2), optimum_value=0.0
    )


def double_well() -> AnalyticProblem:
    """Tilted double well on [-2, 2]; the nominal start sits in the worse basin."""

    def f(x):
        return float((x[0] ** 2 - 1) ** 2 + 0.3 * x[0])

    def grad(x):
        return np.array([4 * x[0] ** 3 - 4 * x[0] + 0.3])

    roots = np.roots([4.0, 0.0, -4.0, 0.3])
    real = roots[np.abs(roots.imag) < 1e-12].real
    best = min(real, key=lambda r: f([r]))
    space = DesignSpace((DesignVariable("x1", -2.0, 2.0, 1.0),))
    return AnalyticProblem(
        "double_well",
        space,
        f,
        grad,
        optimum=np.array([best]),
        optimum_value=f([best]),
        notes={"local_minimum": float(max(real))},
    )


def constrained_linear() -> AnalyticProblem:
    """min x subject to -x <= -0.3 on [0, 1]; the constraint is active at 0.3."""
    space = DesignSpace((DesignVariable("x1", 0.0, 1.0, 0.5),))
    return AnalyticProblem(
        "constrained_linear",
        space,
        lambda x: float(x[0]),
        lambda x: np.array([1.0]),
        constraints=(AnalyticConstraint("g", lambda x: float(-x[0]), -0.3, "<=", lambda x: np.array([-1.0])),),
        optimum=np.array([0.3]),
        optimum_value=0.3,
    )


def influence_benchmark() -> AnalyticProblem:
    """Five variables where the most coupled partner of the top variable is not the second most sensitive.

    f = 4(x1 + x3/2 - 1.4)^2 + (x3 - 0.8)^2/2 + 6(x2 - 0.1)^2 + 5.5(x4 - 0.1)^2
        + (x5 - 0.1)^2 + 0.6 x1 x2
    """

    def f(x):
        return float(
            4 * (x[0] + 0.5 * x[2] - 1.4) ** 2
            + 0.5 * (x[2] - 0.8) ** 2
            + 6 * (x[1] - 0.1) ** 2
            + 5.5 * (x[3] - 0.1) ** 2
            + (x[4] - 0.1) ** 2
            + 0.6 * x[0] * x[1]
        )

    def grad(x):
        r = x[0] + 0.5 * x[2] - 1.4
        return np.array([
            8 * r + 0.6 * x[1],
            12 * (x[1] - 0.1) + 0.6 * x[0],
            4 * r + (x[2] - 0.8),
            11 * (x[3] - 0.1),
            2 * (x[4] - 0.1),
        ])

    return AnalyticProblem("influence_benchmark", _box(5, (-1.0, 1.0), None), f, grad)


BENCHMARKS: Mapping[str, Callable[..., AnalyticProblem]] = {
    "quadratic_coupled": quadratic_coupled,
    "separable": separable,
    "sequence_benchmark": sequence_benchmark,
    "cubic_asymmetric": cubic_asymmetric,
    "double_well": double_well,
    "constrained_linear": constrained_linear,
    "influence_benchmark": influence_benchmark,
}


def benchmark(name: str, **params) -> AnalyticProblem:
    try:
        factory = BENCHMARKS[name]
    except KeyError:
        raise UnknownNameError("benchmark", name) from None
    try:
        return factory(**params)
    except TypeError as exc:
        raise ValidationError(f"benchmark {name!r}: bad parameters ({exc})") from exc
