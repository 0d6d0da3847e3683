"""Bound- and inequality-constrained minimization in hat space.

Outer loop: Powell-Hestenes-Rockafellar augmented Lagrangian for g(u) <= 0.
Inner loop: L-BFGS-B over the free coordinates with box [0, 1].
"""

from __future__ import annotations

import dataclasses
import json
from collections.abc import Mapping, Sequence
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import minimize as scipy_minimize

from couplekit.common import parallel_map
from couplekit.errors import ValidationError
from couplekit.optimizer.problem import FEASIBILITY_TOL, STEP_TOL, ProblemDefinition

STATUSES = ("converged", "max_iter", "infeasible")


@dataclass(slots=True)
class SolverConfig:
    step_tol: float = STEP_TOL
    feasibility_tol: float = FEASIBILITY_TOL
    max_outer: int = 50
    max_inner: int = 1000
    rho_init: float = 10.0
    rho_growth: float = 10.0
    rho_max: float = 1e8
    ftol: float = 1e-15
    gtol: float = 1e-10


@dataclass(frozen=True, slots=True, eq=False)
class OptimizationSpec:
    """Which variables move, where the others sit, and where to start (model units)."""

    problem: ProblemDefinition
    free: tuple[int, ...]
    frozen: dict[str, float]
    start: np.ndarray

    def __post_init__(self):
        space = self.problem.space
        free = tuple(int(i) for i in self.free)
        object.__setattr__(self, "free", free)
        if not free:
            raise ValidationError("free variable set is empty")
        if len(set(free)) != len(free) or not all(0 <= i < space.dim for i in free):
            raise ValidationError(f"invalid free variable indices {free}")
        expected = {space.names[i] for i in range(space.dim) if i not in free}
        if set(self.frozen) != expected:
            raise ValidationError("frozen values must cover exactly the non-free variables")
        start = np.asarray(self.start, dtype=float)
        object.__setattr__(self, "start", start)
        space.normalize(start)
        space.normalize(self.frozen_point())

    @classmethod
    def build(
        cls,
        problem: ProblemDefinition,
        free: Sequence[int | str],
        frozen: Mapping[str, float] | None = None,
        start: np.ndarray | None = None,
    ) -> OptimizationSpec:
        space = problem.space
        idx = tuple(space.index(f) if isinstance(f, str) else int(f) for f in free)
        start = space.nominal if start is None else np.asarray(start, dtype=float)
        frozen = dict(frozen or {})
        for n in frozen:
            space.index(n)
        values = {
            space.names[i]: float(frozen.get(space.names[i], start[i]))
            for i in range(space.dim)
            if i not in idx
        }
        return cls(problem, idx, values, start)

    def frozen_point(self) -> np.ndarray:
        """start with every frozen coordinate replaced by its frozen value."""
        x = self.start.copy()
        for name, value in self.frozen.items():
            x[self.problem.space.index(name)] = value
        return x

    def base_unit(self) -> np.ndarray:
        return self.problem.space.normalize(self.frozen_point())


@dataclass(frozen=True, slots=True, eq=False)
class OptimizationResult:
    names: tuple[str, ...]
    x: np.ndarray
    u: np.ndarray
    objective: float
    objective_hat: float
    feasible: bool
    max_violation: float
    violations: tuple[float, ...]
    iterations: int
    evaluations: int
    status: str

    def to_dict(self) -> dict[str, Any]:
        return {
            "x": {n: float(v) for n, v in zip(self.names, self.x)},
            "objective": self.objective,
            "status": self.status,
            "feasible": self.feasible,
            "max_violation": self.max_violation,
            "violations": list(self.violations),
            "iterations": self.iterations,
            "evaluations": self.evaluations,
        }

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")


def _result(spec, u, iterations, evaluations, status, cfg) -> OptimizationResult:
    problem = spec.problem
    g = problem.constraint_hat(u)
    viol = np.maximum(g, 0.0)
    max_v = float(viol.max()) if viol.size else 0.0
    feasible = max_v <= cfg.feasibility_tol
    if not feasible:
        status = "infeasible"
    return OptimizationResult(
        names=problem.space.names,
        x=problem.space.denormalize(u),
        u=u,
        objective=float(problem.objective_value(u)),
        objective_hat=float(problem.objective_hat(u)),
        feasible=feasible,
        max_violation=max_v,
        violations=tuple(float(v) for v in viol),
        iterations=int(iterations),
        evaluations=int(evaluations),
        status=status,
    )


def _solve(spec: OptimizationSpec, z0: np.ndarray, cfg: SolverConfig) -> OptimizationResult:
    problem = spec.problem
    free = np.array(spec.free)
    base = spec.base_unit()
    objective = problem.models[problem.objective]
    bounds = [(0.0, 1.0)] * free.size
    options = {"maxiter": cfg.max_inner, "ftol": cfg.ftol, "gtol": cfg.gtol}

    def full(z: np.ndarray) -> np.ndarray:
        u = base.copy()
        u[free] = np.clip(z, 0.0, 1.0)
        return u

    z = np.clip(np.asarray(z0, dtype=float), 0.0, 1.0)

    if not problem.constraints:

        def fg(z):
            u = full(z)
            return objective.value(u), np.asarray(objective.gradient(u))[free]

        res = scipy_minimize(fg, z, jac=True, method="L-BFGS-B", bounds=bounds, options=options)
        status = "max_iter" if res.status == 1 else "converged"
        return _result(spec, full(res.x), res.nit, res.nfev, status, cfg)

    n_con = len(problem.constraints)
    lam = np.zeros(n_con)
    rho = cfg.rho_init
    prev_violation = np.inf
    iterations = evaluations = 0
    status = "max_iter"

    for _ in range(cfg.max_outer):

        def lagrangian(z, lam=lam, rho=rho):
            u = full(z)
            shifted = np.maximum(0.0, lam + rho * problem.constraint_hat(u))
            jac = problem.constraint_jacobian(u)[:, free]
            val = objective.value(u) + (shifted @ shifted - lam @ lam) / (2.0 * rho)
            grad = np.asarray(objective.gradient(u))[free] + jac.T @ shifted
            return val, grad

        res = scipy_minimize(
            lagrangian, z, jac=True, method="L-BFGS-B", bounds=bounds, options=options
        )
        iterations += res.nit
        evaluations += res.nfev
        z_new = np.clip(res.x, 0.0, 1.0)
        g = problem.constraint_hat(full(z_new))
        violation = float(max(0.0, g.max()))
        step = float(np.max(np.abs(z_new - z)))
        lam_new = np.maximum(0.0, lam + rho * g)
        dlam = float(np.max(np.abs(lam_new - lam)))
        lam, z = lam_new, z_new
        if violation <= cfg.feasibility_tol and (
            step <= cfg.step_tol or dlam <= 1e-8 * max(1.0, float(lam.max()))
        ):
            status = "converged"
            break
        if violation > 0.25 * prev_violation:
            rho = min(rho * cfg.rho_growth, cfg.rho_max)
        prev_violation = violation

    return _result(spec, full(z), iterations, evaluations, status, cfg)


def minimize(spec: OptimizationSpec, config: SolverConfig | None = None) -> OptimizationResult:
    """Local constrained minimum of the objective over spec.free, from spec.start."""
    cfg = config or SolverConfig()
    return _solve(spec, spec.base_unit()[np.array(spec.free)], cfg)


def multistart_points(spec: OptimizationSpec, n_starts: int, seed: int) -> list[np.ndarray]:
    """Start 0 is spec.start; start k >= 1 comes from its own stream seeded by (seed, k)."""
    k_free = len(spec.free)
    points = [spec.base_unit()[np.array(spec.free)]]
    for k in range(1, n_starts):
        points.append(np.random.default_rng([seed, k]).uniform(size=k_free))
    return points


def minimize_multistart(
    spec: OptimizationSpec,
    n_starts: int,
    seed: int,
    config: SolverConfig | None = None,
    workers: int = 1,
) -> OptimizationResult:
    """Best feasible local minimum over n_starts starts (the first one is spec.start).

    Ties go to the lower objective, then the lexicographically smaller u.
    If no start is feasible the least-violating result is returned.
    """
    if n_starts < 1:
        raise ValidationError(f"n_starts must be >= 1, got {n_starts}")
    if seed < 0:
        raise ValidationError(f"seed must be >= 0, got {seed}")
    cfg = config or SolverConfig()
    points = multistart_points(spec, n_starts, seed)
    results = parallel_map(lambda z: _solve(spec, z, cfg), points, workers=workers)
    total = sum(r.evaluations for r in results)
    feasible = [r for r in results if r.feasible]
    if feasible:
        best = min(feasible, key=lambda r: (r.objective, tuple(r.u)))
    else:
        best = min(results, key=lambda r: (r.max_violation, r.objective, tuple(r.u)))
    return dataclasses.replace(best, evaluations=total)
