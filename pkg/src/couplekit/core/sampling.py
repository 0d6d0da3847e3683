"""Latin hypercube sampling over a design space."""

from __future__ import annotations

import numpy as np

from couplekit.core.space import DesignSpace
from couplekit.errors import ValidationError


def unit_latin_hypercube(n: int, dim: int, rng: np.random.Generator) -> np.ndarray:
    """n points in [0, 1)^dim, one per stratum [k/n, (k+1)/n) in every dimension.

    Each column is an independent permutation of the strata with a uniform
    jitter inside the stratum.
    """
    jitter = rng.uniform(size=(n, dim))
    strata = np.column_stack([rng.permutation(n) for _ in range(dim)])
    return (strata + jitter) / n


def latin_hypercube(space: DesignSpace, n: int, seed: int) -> np.ndarray:
    """n x N_x LHS design in model units, deterministic for a given seed."""
    if n < 2:
        raise ValidationError(f"latin hypercube needs n >= 2, got {n}")
    rng = np.random.default_rng(seed)
    u = unit_latin_hypercube(n, space.dim, rng)
    return space.lower + u * space.span
