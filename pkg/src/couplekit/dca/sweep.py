"""Perturbation sweeps: re-optimize one variable while another moves across its range.

For an ordered pair (A, B), B is frozen at each point of a uniform grid over
its normalized range, A is re-optimized with every other variable at nominal,
and the optimal response x*_A(B) and optimal objective are differentiated
along the grid. Aggregating those derivative samples gives one entry of the
design coupling matrix J_x and of the objective sensitivity matrix J_psi.
"""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Any

import numpy as np

from couplekit.common import derive_seed, fmt_duration, parallel_map, worker_count
from couplekit.dca.report import CellRecord, CouplingReport
from couplekit.errors import SweepError, ValidationError
from couplekit.optimizer.auglag import OptimizationSpec, SolverConfig, minimize_multistart
from couplekit.optimizer.problem import ProblemDefinition

NORMS = ("rms", "l2", "max")
SCHEMES = ("central", "forward")
POLICIES = ("exclude", "fail")
ENDPOINT_NUDGE = 1e-9
MIN_INCLUDED = 3
AT_BOUND_TOL = 1e-7


@dataclass(slots=True)
class SweepConfig:
    n_sweep: int = 11
    norm: str = "rms"
    scheme: str = "central"
    infeasible: str = "exclude"
    n_starts: int = 3
    seed: int = 0

    def __post_init__(self):
        if self.n_sweep < 3:
            raise ValidationError(f"n_sweep must be >= 3, got {self.n_sweep}")
        if self.norm not in NORMS:
            raise ValidationError(f"norm must be one of {NORMS}, got {self.norm!r}")
        if self.scheme not in SCHEMES:
            raise ValidationError(f"scheme must be one of {SCHEMES}, got {self.scheme!r}")
        if self.infeasible not in POLICIES:
            raise ValidationError(f"infeasible policy must be one of {POLICIES}")
        if self.n_starts < 1:
            raise ValidationError(f"n_starts must be >= 1, got {self.n_starts}")
        if self.seed < 0:
            raise ValidationError(f"seed must be >= 0, got {self.seed}")

    def to_dict(self) -> dict[str, Any]:
        return asdict(self)


def sweep_grid(n_sweep: int) -> np.ndarray:
    """Uniform grid over [0, 1] with the two endpoints nudged inside the box."""
    t = np.linspace(0.0, 1.0, n_sweep)
    t[0] += ENDPOINT_NUDGE
    t[-1] -= ENDPOINT_NUDGE
    return t


def aggregate(samples: np.ndarray, norm: str) -> float:
    samples = np.asarray(samples, dtype=float)
    if norm == "rms":
        return float(np.sqrt(np.mean(samples**2)))
    if norm == "l2":
        return float(np.linalg.norm(samples))
    if norm == "max":
        return float(np.max(np.abs(samples)))
    raise ValidationError(f"unknown norm {norm!r}")


def derivative_samples(t: np.ndarray, y: np.ndarray, scheme: str) -> np.ndarray:
    """dy/dt at every grid point.

    central: second-order differences inside, second-order one-sided at the
    ends (the grid may be non-uniform after exclusions). forward: first-order
    forward differences, backward at the last point.
    """
    if scheme == "central":
        return np.gradient(y, t, edge_order=2)
    d = np.diff(y) / np.diff(t)
    return np.append(d, d[-1])


def _flat_at_bound(y: np.ndarray) -> np.ndarray:
    """Points where the optimum sits on the same bound as a neighbouring point."""
    flat = np.zeros(y.size, dtype=bool)
    for side in (y <= AT_BOUND_TOL, y >= 1.0 - AT_BOUND_TOL):
        pair = side[:-1] & side[1:]
        flat[:-1] |= pair
        flat[1:] |= pair
    return flat


def sweep_cell(
    problem: ProblemDefinition,
    optimized: int | str,
    perturbed: int | str,
    config: SweepConfig | None = None,
    solver: SolverConfig | None = None,
) -> CellRecord:
    cfg = config or SweepConfig()
    space = problem.space
    a = space.index(optimized) if isinstance(optimized, str) else int(optimized)
    b = space.index(perturbed) if isinstance(perturbed, str) else int(perturbed)
    if a == b:
        raise ValidationError("optimized and perturbed variables must differ")
    name_a, name_b = space.names[a], space.names[b]
    var_b = space.variables[b]

    t = sweep_grid(cfg.n_sweep)
    nominal = space.nominal
    x_opt = np.full(t.size, np.nan)
    psi = np.full(t.size, np.nan)
    statuses: list[str] = []
    evaluations = 0
    for i, ti in enumerate(t):
        frozen = {n: float(nominal[j]) for j, n in enumerate(space.names) if j != a}
        frozen[name_b] = var_b.lower + ti * var_b.span
        spec = OptimizationSpec.build(problem, [a], frozen=frozen, start=nominal)
        seed = derive_seed(cfg.seed, "dca", name_a, name_b, i)
        res = minimize_multistart(spec, cfg.n_starts, seed, solver)
        evaluations += res.evaluations
        statuses.append(res.status)
        if not res.feasible:
            if cfg.infeasible == "fail":
                raise SweepError(
                    f"{name_a} vs {name_b}: sub-optimization {i} infeasible "
                    f"(max violation {res.max_violation:.3g})"
                )
            continue
        x_opt[i] = res.u[a]
        psi[i] = res.objective_hat

    included = np.isfinite(x_opt)
    n_inc = int(included.sum())
    if n_inc < MIN_INCLUDED:
        return CellRecord(
            optimized=name_a,
            perturbed=name_b,
            grid=t,
            x_opt=x_opt,
            objective=psi,
            included=included,
            dx=np.array([]),
            dpsi=np.array([]),
            flat=0,
            statuses=tuple(statuses),
            evaluations=evaluations,
            jx=float("nan"),
            jpsi=float("nan"),
            note=f"only {n_inc} of {t.size} sweep points feasible",
        )

    ti, yi, pi = t[included], x_opt[included], psi[included]
    dx = derivative_samples(ti, yi, cfg.scheme)
    flat = _flat_at_bound(yi)
    dx[flat] = 0.0
    dpsi = derivative_samples(ti, pi, cfg.scheme)
    return CellRecord(
        optimized=name_a,
        perturbed=name_b,
        grid=t,
        x_opt=x_opt,
        objective=psi,
        included=included,
        dx=dx,
        dpsi=dpsi,
        flat=int(flat.sum()),
        statuses=tuple(statuses),
        evaluations=evaluations,
        jx=aggregate(dx, cfg.norm),
        jpsi=aggregate(dpsi, cfg.norm),
    )


def coupling_matrices(
    problem: ProblemDefinition,
    config: SweepConfig | None = None,
    solver: SolverConfig | None = None,
    workers: int | None = None,
    verbose: bool = False,
) -> CouplingReport:
    """Run every off-diagonal sweep cell and assemble J_x and J_psi."""
    cfg = config or SweepConfig()
    space = problem.space
    n = space.dim
    if n < 2:
        raise ValidationError("coupling analysis needs at least 2 design variables")
    pairs = [(a, b) for a in range(n) for b in range(n) if a != b]
    n_workers = worker_count() if workers is None else workers
    if verbose:
        print(
            f"DCA: {len(pairs)} cells x {cfg.n_sweep} sweep points "
            f"({len(pairs) * cfg.n_sweep:,} sub-optimizations, {n_workers} workers)"
        )
    t0 = time.perf_counter()
    cells = parallel_map(
        lambda p: sweep_cell(problem, p[0], p[1], cfg, solver), pairs, workers=n_workers
    )
    report = CouplingReport.from_cells(space.names, cells, cfg.to_dict(), label=problem.label)
    if verbose:
        masked = sum(1 for c in cells if not c.available)
        evals = sum(c.evaluations for c in cells)
        print(
            f"DCA: done, {masked} masked cell(s), {evals:,} evaluations "
            f"in {fmt_duration(time.perf_counter() - t0)}"
        )
    return report
