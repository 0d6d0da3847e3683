"""FITC sparse Gaussian process regression for one output channel.

All inputs are normalized to [0, 1]^N_x. Targets are usually z-scored; the
model remembers the (offset, scale) pair so callers can map predictions back
to model units.

Prediction never forms the N x N FITC covariance. With V = L_uu^-1 K_uf,
D = diag(K_ff - V^T V) + noise and B = I + V D^-1 V^T, the cached pieces are
L_uu, L_B and the weight vector alpha = L_uu^-T B^-1 V D^-1 (y - prior mean).
"""

from __future__ import annotations

import json
import math
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np
from scipy.optimize import minimize
from scipy.spatial.distance import cdist, pdist

from couplekit.common import fmt_duration
from couplekit.errors import ConditioningError, ValidationError
from couplekit.sgp.kernel import KernelParams, cross
from couplekit.sgp.linalg import JITTER_MAX, JITTER_START, jitchol, solve_lower, solve_upper_t

MODEL_FORMAT = "couplekit.fitc/1"
LOG_2PI = math.log(2.0 * math.pi)
NEGATIVE_VARIANCE_TOL = 1e-8
PENALTY = 1e25


@dataclass(slots=True)
class FitConfig:
    n_restarts: int = 5
    max_iter: int = 200
    ftol: float = 1e-10
    log_signal_variance_bounds: tuple[float, float] = (math.log(1e-3), math.log(1e3))
    log_length_scale_bounds: tuple[float, float] = (math.log(1e-2), math.log(1e2))
    log_noise_variance_bounds: tuple[float, float] = (math.log(1e-10), math.log(1.0))
    jitter: float = JITTER_START
    max_jitter: float = JITTER_MAX

    def bounds(self) -> list[tuple[float, float]]:
        return [
            self.log_signal_variance_bounds,
            self.log_length_scale_bounds,
            self.log_noise_variance_bounds,
        ]


@dataclass(frozen=True, slots=True)
class TrainingSummary:
    n: int
    m: int
    seed: int
    iterations: int
    log_likelihood: float
    jitter: float
    restarts: int = 1

    def to_dict(self) -> dict[str, Any]:
        return {
            "n": self.n,
            "m": self.m,
            "seed": self.seed,
            "iterations": self.iterations,
            "log_likelihood": self.log_likelihood,
            "jitter": self.jitter,
            "restarts": self.restarts,
        }


class VarianceDiagnostics:
    """Counts predictions whose variance came out slightly negative and was clamped."""

    def __init__(self):
        self._lock = threading.Lock()
        self.clamped = 0

    def add(self, n: int) -> None:
        with self._lock:
            self.clamped += n


def default_inducing_count(n: int) -> int:
    return min(n, max(50, math.ceil(n / 5)))


# ---------------------------------------------------------------------------
# Factorization
# ---------------------------------------------------------------------------


@dataclass(slots=True)
class _Factors:
    chol_uu: np.ndarray
    chol_b: np.ndarray
    alpha: np.ndarray
    log_likelihood: float
    jitter: float


def _factorize(
    params: KernelParams,
    x: np.ndarray,
    r: np.ndarray,
    z: np.ndarray,
    jitter: float = JITTER_START,
    max_jitter: float = JITTER_MAX,
) -> _Factors:
    m = z.shape[0]
    luu, j_uu = jitchol(cross(params, z, z), jitter, max_jitter)
    v = solve_lower(luu, cross(params, z, x))
    lam = np.maximum(params.signal_variance - np.sum(v**2, axis=0), 0.0)
    d = lam + params.effective_noise
    b = np.eye(m) + (v / d) @ v.T
    lb, j_b = jitchol(b, jitter, max_jitter)
    a = v @ (r / d)
    c = solve_lower(lb, a)
    lml = -0.5 * (
        float(np.sum(r**2 / d))
        - float(c @ c)
        + float(np.sum(np.log(d)))
        + 2.0 * float(np.sum(np.log(np.diag(lb))))
        + r.size * LOG_2PI
    )
    alpha = solve_upper_t(luu, solve_upper_t(lb, c))
    return _Factors(luu, lb, alpha, lml, max(j_uu, j_b))


def select_inducing(x: np.ndarray, m: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: m distinct training rows, spread by D^2 sampling."""
    n = x.shape[0]
    if m == n:
        return x.copy()
    chosen = [int(rng.integers(n))]
    d2 = cdist(x, x[chosen], "sqeuclidean").ravel()
    d2[chosen[0]] = 0.0
    for _ in range(1, m):
        total = d2.sum()
        if total > 0:
            idx = int(rng.choice(n, p=d2 / total))
        else:
            # duplicates only; fall back to an unused row
            free = np.setdiff1d(np.arange(n), chosen)
            idx = int(rng.choice(free))
        chosen.append(idx)
        d2 = np.minimum(d2, cdist(x, x[idx : idx + 1], "sqeuclidean").ravel())
        d2[chosen] = 0.0
    return x[chosen].copy()


# ---------------------------------------------------------------------------
# Model
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True, eq=False)
class FitcModel:
    name: str
    params: KernelParams
    inducing: np.ndarray
    alpha: np.ndarray
    chol_uu: np.ndarray
    chol_b: np.ndarray
    prior_mean: float
    offset: float
    scale: float
    summary: TrainingSummary
    diagnostics: VarianceDiagnostics = field(default_factory=VarianceDiagnostics)

    @property
    def dim(self) -> int:
        return self.inducing.shape[1]

    @property
    def log_likelihood(self) -> float:
        return self.summary.log_likelihood

    def _points(self, x) -> tuple[np.ndarray, bool]:
        x = np.asarray(x, dtype=float)
        single = x.ndim == 1
        x = np.atleast_2d(x)
        if x.shape[1] != self.dim:
            raise ValidationError(f"{self.name}: expected {self.dim} inputs, got {x.shape[1]}")
        if not np.all(np.isfinite(x)):
            raise ValidationError(f"{self.name}: prediction input must be finite")
        return x, single

    def predict(self, x) -> tuple[Any, Any]:
        """Latent mean and variance at one point (d,) or many points (n, d)."""
        xs, single = self._points(x)
        kus = cross(self.params, self.inducing, xs)
        mean = self.prior_mean + kus.T @ self.alpha
        w = solve_lower(self.chol_uu, kus)
        c = solve_lower(self.chol_b, w)
        var = self.params.signal_variance - np.sum(w**2, axis=0) + np.sum(c**2, axis=0)
        neg = var < 0
        if np.any(neg):
            if np.any(var < -NEGATIVE_VARIANCE_TOL):
                raise ConditioningError(
                    f"{self.name}: predictive variance {var.min():.3g} below tolerance"
                )
            self.diagnostics.add(int(neg.sum()))
            var = np.where(neg, 0.0, var)
        if single:
            return float(mean[0]), float(var[0])
        return mean, var

    def predict_mean(self, x) -> Any:
        xs, single = self._points(x)
        mean = self.prior_mean + cross(self.params, self.inducing, xs).T @ self.alpha
        return float(mean[0]) if single else mean

    def predict_gradient(self, x) -> np.ndarray:
        """d mean / d x at a single normalized point."""
        xs, _ = self._points(x)
        x0 = xs[0]
        k = cross(self.params, self.inducing, xs)[:, 0]
        diff = x0 - self.inducing
        return -((self.alpha * k) @ diff) / self.params.length_scale**2

    def predict_value(self, x) -> Any:
        """Mean prediction mapped back to model units."""
        return self.offset + self.scale * self.predict_mean(x)

    # response-model protocol used by the optimizer
    def value(self, u: np.ndarray) -> float:
        return self.predict_mean(u)

    def gradient(self, u: np.ndarray) -> np.ndarray:
        return self.predict_gradient(u)

    # -- files -------------------------------------------------------------

    def to_dict(self) -> dict[str, Any]:
        return {
            "format": MODEL_FORMAT,
            "name": self.name,
            "kernel": self.params.to_dict(),
            "inducing": self.inducing.tolist(),
            "alpha": self.alpha.tolist(),
            "chol_uu": self.chol_uu.tolist(),
            "chol_b": self.chol_b.tolist(),
            "prior_mean": self.prior_mean,
            "standardization": {"mean": self.offset, "std": self.scale},
            "training": self.summary.to_dict(),
        }

    @classmethod
    def from_dict(cls, d: dict[str, Any]) -> FitcModel:
        if d.get("format") != MODEL_FORMAT:
            raise ValidationError(f"not a FITC model file (format {d.get('format')!r})")
        k = d["kernel"]
        t = d["training"]
        return cls(
            name=d["name"],
            params=KernelParams(
                k["log_signal_variance"], k["log_length_scale"], k["log_noise_variance"]
            ),
            inducing=np.array(d["inducing"], dtype=float),
            alpha=np.array(d["alpha"], dtype=float),
            chol_uu=np.array(d["chol_uu"], dtype=float),
            chol_b=np.array(d["chol_b"], dtype=float),
            prior_mean=float(d["prior_mean"]),
            offset=float(d["standardization"]["mean"]),
            scale=float(d["standardization"]["std"]),
            summary=TrainingSummary(**t),
        )

    def save(self, path: Path) -> None:
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(json.dumps(self.to_dict(), indent=2) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> FitcModel:
        try:
            raw = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ValidationError(f"model file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ValidationError(f"{path}: invalid JSON ({exc.msg})") from exc
        return cls.from_dict(raw)


# ---------------------------------------------------------------------------
# Building and fitting
# ---------------------------------------------------------------------------


def _check_training_data(x, y) -> tuple[np.ndarray, np.ndarray]:
    x = np.atleast_2d(np.asarray(x, dtype=float))
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.size:
        raise ValidationError(f"{x.shape[0]} input rows but {y.size} targets")
    if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
        raise ValidationError("training data must be finite")
    return x, y


def condition(
    x,
    y,
    params: KernelParams,
    inducing: np.ndarray | None = None,
    prior_mean: float | None = None,
    name: str = "y",
    standardization: tuple[float, float] = (0.0, 1.0),
    seed: int = 0,
    jitter: float = JITTER_START,
    max_jitter: float = JITTER_MAX,
) -> FitcModel:
    """Build a model from fixed hyperparameters (inducing points default to X)."""
    x, y = _check_training_data(x, y)
    z = x.copy() if inducing is None else np.atleast_2d(np.asarray(inducing, dtype=float))
    if z.shape[1] != x.shape[1]:
        raise ValidationError("inducing points and inputs differ in dimension")
    if z.shape[0] > x.shape[0]:
        raise ValidationError(f"m={z.shape[0]} exceeds N={x.shape[0]}")
    mu = float(np.mean(y)) if prior_mean is None else float(prior_mean)
    f = _factorize(params, x, y - mu, z, jitter, max_jitter)
    summary = TrainingSummary(x.shape[0], z.shape[0], seed, 0, f.log_likelihood, f.jitter)
    return FitcModel(
        name=name,
        params=params,
        inducing=z,
        alpha=f.alpha,
        chol_uu=f.chol_uu,
        chol_b=f.chol_b,
        prior_mean=mu,
        offset=float(standardization[0]),
        scale=float(standardization[1]),
        summary=summary,
    )


def _start_points(x: np.ndarray, y: np.ndarray, cfg: FitConfig, rng: np.random.Generator):
    bounds = np.array(cfg.bounds())
    sample = x[: min(len(x), 200)]
    dists = pdist(sample) if len(sample) > 1 else np.array([1.0])
    dists = dists[dists > 0]
    ell = float(np.median(dists)) if dists.size else 1.0
    var = max(float(np.var(y)), 1e-2)
    heuristic = np.array([math.log(var), math.log(ell), math.log(1e-2 * var)])
    starts = [np.clip(heuristic, bounds[:, 0], bounds[:, 1])]
    lo = np.array([math.log(0.1), math.log(0.05), math.log(1e-6)])
    hi = np.array([math.log(10.0), math.log(2.0), math.log(1e-1)])
    for _ in range(cfg.n_restarts - 1):
        starts.append(np.clip(rng.uniform(lo, hi), bounds[:, 0], bounds[:, 1]))
    return starts


def fit(
    x,
    y,
    m: int | None = None,
    seed: int = 0,
    config: FitConfig | None = None,
    name: str = "y",
    standardization: tuple[float, float] = (0.0, 1.0),
    verbose: bool = False,
) -> FitcModel:
    """Fit kernel hyperparameters by maximizing the FITC log marginal likelihood.

    Inducing points are picked once by k-means++ seeding and then held fixed.
    L-BFGS-B runs from a heuristic start plus n_restarts - 1 seeded starts;
    the best likelihood wins (earlier start on ties).
    """
    cfg = config or FitConfig()
    x, y = _check_training_data(x, y)
    n = x.shape[0]
    if n < 2:
        raise ValidationError(f"{name}: fitting needs N >= 2, got {n}")
    m = default_inducing_count(n) if m is None else int(m)
    if not 1 <= m <= n:
        raise ValidationError(f"{name}: inducing count m={m} must be in [1, N={n}]")

    t0 = time.perf_counter()
    rng = np.random.default_rng(seed)
    z = select_inducing(x, m, rng)
    mu = float(np.mean(y))
    r = y - mu

    def nll(theta: np.ndarray) -> float:
        try:
            f = _factorize(KernelParams.from_vector(theta), x, r, z, cfg.jitter, cfg.max_jitter)
        except ConditioningError:
            return PENALTY
        return -f.log_likelihood if math.isfinite(f.log_likelihood) else PENALTY

    best = None
    for theta0 in _start_points(x, y, cfg, rng):
        res = minimize(
            nll,
            theta0,
            method="L-BFGS-B",
            bounds=cfg.bounds(),
            options={"maxiter": cfg.max_iter, "ftol": cfg.ftol},
        )
        if best is None or res.fun < best.fun:
            best = res
    if best is None or best.fun >= PENALTY:
        raise ConditioningError(f"{name}: no hyperparameter start could be factorized")

    params = KernelParams.from_vector(best.x)
    f = _factorize(params, x, r, z, cfg.jitter, cfg.max_jitter)
    summary = TrainingSummary(n, m, seed, int(best.nit), f.log_likelihood, f.jitter, cfg.n_restarts)
    model = FitcModel(
        name=name,
        params=params,
        inducing=z,
        alpha=f.alpha,
        chol_uu=f.chol_uu,
        chol_b=f.chol_b,
        prior_mean=mu,
        offset=float(standardization[0]),
        scale=float(standardization[1]),
        summary=summary,
    )
    if verbose:
        print(
            f"SGP: {name}: N={n:,} M={m} lml={f.log_likelihood:.4f} "
            f"iterations={best.nit} l={params.length_scale:.4g} "
            f"({fmt_duration(time.perf_counter() - t0)})"
        )
    return model


# Module-level spellings of the model operations.


def predict(model: FitcModel, x) -> tuple[Any, Any]:
    return model.predict(x)


def predict_gradient(model: FitcModel, x) -> np.ndarray:
    return model.predict_gradient(x)


def log_marginal_likelihood(model: FitcModel) -> float:
    return model.log_likelihood
