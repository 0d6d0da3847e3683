"""Surrogate quality checks: dense exact-GP comparison and hold-out accuracy."""

from __future__ import annotations

import math
from collections.abc import Sequence
from dataclasses import dataclass
from typing import Any

import numpy as np
import scipy.linalg as la

from couplekit.core.dataset import Dataset, standardize_channel
from couplekit.core.space import DesignSpace
from couplekit.errors import ValidationError
from couplekit.sgp.fitc import FitcModel, FitConfig, predict
from couplekit.sgp.kernel import KernelParams, cross
from couplekit.sgp.train import train_channels

EXACT_CHECK_MAX_N = 50
EXACT_CHECK_TOL = 1e-6


def exact_gp_predict(
    params: KernelParams, x: np.ndarray, y: np.ndarray, prior_mean: float, xs: np.ndarray
) -> tuple[np.ndarray, np.ndarray]:
    """Dense GP latent mean and variance with the same kernel and noise floor."""
    k = cross(params, x, x) + params.effective_noise * np.eye(len(x))
    cf = la.cho_factor(k, lower=True)
    ks = cross(params, x, xs)
    mean = prior_mean + ks.T @ la.cho_solve(cf, y - prior_mean)
    var = params.signal_variance - np.sum(ks * la.cho_solve(cf, ks), axis=0)
    return mean, var


def exact_gp_check(model: FitcModel, x: np.ndarray, y: np.ndarray) -> dict[str, Any]:
    """Compare a Z = X model against the dense GP at the training inputs."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    applicable = model.summary.m == len(x) <= EXACT_CHECK_MAX_N and np.array_equal(
        model.inducing, x
    )
    if not applicable:
        return {"applicable": False}
    mean, var = predict(model, x)
    ref_mean, ref_var = exact_gp_predict(model.params, x, y, model.prior_mean, x)
    mean_err = float(np.max(np.abs(mean - ref_mean)))
    var_err = float(np.max(np.abs(var - np.maximum(ref_var, 0.0))))
    return {
        "applicable": True,
        "max_mean_error": mean_err,
        "max_variance_error": var_err,
        "passed": mean_err <= EXACT_CHECK_TOL and var_err <= EXACT_CHECK_TOL,
    }


# ---------------------------------------------------------------------------
# Hold-out validation
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class ChannelAccuracy:
    name: str
    n_test: int
    rmse: float
    nrmse: float
    r2: float

    def to_dict(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "n_test": self.n_test,
            "rmse": self.rmse,
            "nrmse": self.nrmse,
            "r2": self.r2,
        }


def holdout_split(n: int, fraction: float, seed: int) -> tuple[np.ndarray, np.ndarray]:
    if not 0.0 < fraction < 1.0:
        raise ValidationError(f"hold-out fraction must be in (0, 1), got {fraction}")
    n_test = max(1, int(round(fraction * n)))
    if n - n_test < 2:
        raise ValidationError(f"{n} rows leave fewer than 2 training rows")
    perm = np.random.default_rng(seed).permutation(n)
    return np.sort(perm[n_test:]), np.sort(perm[:n_test])


def accuracy(name: str, predicted: np.ndarray, actual: np.ndarray) -> ChannelAccuracy:
    resid = actual - predicted
    rmse = float(math.sqrt(np.mean(resid**2)))
    spread = float(np.ptp(actual))
    ss_tot = float(np.sum((actual - np.mean(actual)) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else float("nan")
    return ChannelAccuracy(name, actual.size, rmse, rmse / spread if spread > 0 else float("nan"), r2)


def validate_channels(
    ds: Dataset,
    space: DesignSpace,
    channels: Sequence[str],
    holdout: float = 0.2,
    m: int | None = None,
    seed: int = 0,
    config: FitConfig | None = None,
    verbose: bool = False,
) -> list[ChannelAccuracy]:
    """Train on a seeded split and score mean predictions on the held-out rows."""
    for name in channels:
        standardize_channel(ds, name)
    train_idx, test_idx = holdout_split(ds.n_rows, holdout, seed)
    train = Dataset(ds.inputs[train_idx], ds.outputs[train_idx], ds.input_names, ds.output_names)
    models = train_channels(train, space, channels, m=m, seed=seed, config=config, verbose=verbose)
    x_test = space.normalize(ds.aligned_inputs(space)[test_idx])
    results = []
    for name in channels:
        acc = accuracy(name, models[name].predict_value(x_test), ds.output(name)[test_idx])
        if verbose:
            print(f"SGP: {name}: hold-out RMSE={acc.rmse:.4g} R2={acc.r2:.4f} (n={acc.n_test})")
        results.append(acc)
    return results
