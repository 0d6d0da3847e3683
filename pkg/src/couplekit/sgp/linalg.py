"""Cholesky factorization with bounded jitter escalation."""

from __future__ import annotations

import numpy as np
import scipy.linalg as la

from couplekit.errors import ConditioningError

JITTER_START = 1e-10
JITTER_MAX = 1e-4


def jitchol(
    a: np.ndarray, jitter: float = JITTER_START, max_jitter: float = JITTER_MAX
) -> tuple[np.ndarray, float]:
    """Lower Cholesky factor of a + jitter*I, escalating jitter x10 on failure.

    Returns (L, jitter actually added).
    """
    if not np.all(np.isfinite(a)):
        raise ConditioningError("matrix has non-finite entries")
    di = np.diag_indices(a.shape[0])
    jit = jitter
    while jit <= max_jitter * (1 + 1e-9):
        aj = a.copy()
        aj[di] += jit
        try:
            return la.cholesky(aj, lower=True, check_finite=False), jit
        except la.LinAlgError:
            jit *= 10
    raise ConditioningError(f"matrix not positive definite with jitter up to {max_jitter:g}")


def solve_lower(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    return la.solve_triangular(chol, b, lower=True, check_finite=False)


def solve_upper_t(chol: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve L^T x = b for lower-triangular L."""
    return la.solve_triangular(chol, b, lower=True, trans="T", check_finite=False)
