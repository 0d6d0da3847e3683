"""Shared fixtures: hand-encoded coupling matrices and a dense-grid sweep oracle."""

from __future__ import annotations

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from couplekit.dca.report import CouplingReport
from couplekit.dca.sweep import aggregate, derivative_samples, sweep_grid
from couplekit.optimizer.problem import ProblemDefinition

PLATFORM_NAMES = (
    "D_main",
    "D_pnt_up",
    "D_pnt_low",
    "D_outer",
    "R_cs",
    "z_keel",
    "z_frbrd",
    "ps_pct",
)


def platform_coupling_matrix() -> np.ndarray:
    """J_x encoding: ps_pct steers every plant variable, a mutually coupled core of four,
    and three weakly coupled variables steered by the core in a fixed order."""
    idx = {n: i for i, n in enumerate(PLATFORM_NAMES)}
    j = np.full((8, 8), 0.05)
    np.fill_diagonal(j, np.nan)
    plant = [n for n in PLATFORM_NAMES if n != "ps_pct"]
    for a in plant:
        j[idx[a], idx["ps_pct"]] = 0.9
        j[idx["ps_pct"], idx[a]] = 0.05
    core = ("D_pnt_low", "D_outer", "R_cs", "z_keel")
    for a in core:
        for b in core:
            if a != b:
                j[idx[a], idx[b]] = 0.7
    weak = ("D_main", "z_frbrd", "D_pnt_up")
    for s in weak:
        for g in core:
            j[idx[s], idx[g]] = 0.3
    j[idx["z_frbrd"], idx["D_main"]] = 0.3
    j[idx["D_pnt_up"], idx["D_main"]] = 0.3
    j[idx["D_pnt_up"], idx["z_frbrd"]] = 0.3
    return j


def platform_sensitivity_matrix() -> np.ndarray:
    """J_psi whose column maxima rank D_pnt_low, z_keel, D_outer, R_cs, z_frbrd, D_pnt_up, D_main."""
    column = {
        "D_pnt_low": 0.9,
        "z_keel": 0.6,
        "D_outer": 0.5,
        "R_cs": 0.4,
        "z_frbrd": 0.2,
        "D_pnt_up": 0.15,
        "D_main": 0.1,
        "ps_pct": 0.05,
    }
    j = np.tile([column[n] for n in PLATFORM_NAMES], (8, 1))
    np.fill_diagonal(j, np.nan)
    return j


@pytest.fixture
def platform_report() -> CouplingReport:
    return CouplingReport.from_matrices(
        PLATFORM_NAMES, platform_coupling_matrix(), platform_sensitivity_matrix(), label="encoded"
    )


@pytest.fixture
def ranking_report() -> CouplingReport:
    """Sensitivity ranking as above; D_pnt_low is most strongly coupled to D_main."""
    idx = {n: i for i, n in enumerate(PLATFORM_NAMES)}
    jx = np.full((8, 8), 0.1)
    np.fill_diagonal(jx, np.nan)
    jx[idx["D_pnt_low"], idx["D_main"]] = 0.8
    jx[idx["D_main"], idx["D_pnt_low"]] = 0.75
    jx[idx["D_pnt_low"], idx["z_keel"]] = 0.3
    return CouplingReport.from_matrices(PLATFORM_NAMES, jx, platform_sensitivity_matrix())


# ---------------------------------------------------------------------------
# Dense-grid oracle
# ---------------------------------------------------------------------------


def dense_argmin(fn, lo: float, hi: float, n_grid: int = 10_001) -> tuple[float, float]:
    """Global 1-D minimum: dense grid scan, then bounded refinement around the best node."""
    grid = np.linspace(lo, hi, n_grid)
    values = np.array([fn(v) for v in grid])
    k = int(np.argmin(values))
    left, right = grid[max(k - 1, 0)], grid[min(k + 1, n_grid - 1)]
    best_x, best_f = float(grid[k]), float(values[k])
    if right > left:
        res = minimize_scalar(fn, bounds=(left, right), method="bounded", options={"xatol": 1e-12})
        if res.fun < best_f:
            best_x, best_f = float(res.x), float(res.fun)
    return best_x, best_f


def dense_cell(
    problem: ProblemDefinition, a: int, b: int, n_sweep: int = 11, norm: str = "rms"
) -> tuple[float, float]:
    """(J_x, J_psi) of one cell with each sub-optimization solved by brute force."""
    space = problem.space
    model = problem.models[problem.objective]
    t = sweep_grid(n_sweep)
    u_opt = np.empty(t.size)
    psi = np.empty(t.size)
    for i, ti in enumerate(t):
        u = space.nominal_unit()
        u[b] = ti

        def f(ua, u=u):
            v = u.copy()
            v[a] = ua
            return model.value(v)

        u_opt[i], psi[i] = dense_argmin(f, 0.0, 1.0)
    dx = derivative_samples(t, u_opt, "central")
    dpsi = derivative_samples(t, psi, "central")
    return aggregate(dx, norm), aggregate(dpsi, norm)
