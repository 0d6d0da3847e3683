"""Isotropic squared-exponential kernel with log-space hyperparameters."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from couplekit.errors import ValidationError

NOISE_FLOOR = 1e-10


@dataclass(frozen=True, slots=True)
class KernelParams:
    log_signal_variance: float
    log_length_scale: float
    log_noise_variance: float

    @classmethod
    def from_values(
        cls, signal_variance: float, length_scale: float, noise_variance: float = 0.0
    ) -> KernelParams:
        if signal_variance <= 0 or length_scale <= 0 or noise_variance < 0:
            raise ValidationError(
                "kernel needs signal_variance > 0, length_scale > 0, noise_variance >= 0"
            )
        return cls(
            math.log(signal_variance),
            math.log(length_scale),
            math.log(max(noise_variance, NOISE_FLOOR)),
        )

    @classmethod
    def from_vector(cls, theta: np.ndarray) -> KernelParams:
        return cls(float(theta[0]), float(theta[1]), float(theta[2]))

    def vector(self) -> np.ndarray:
        return np.array([self.log_signal_variance, self.log_length_scale, self.log_noise_variance])

    @property
    def signal_variance(self) -> float:
        return math.exp(self.log_signal_variance)

    @property
    def length_scale(self) -> float:
        return math.exp(self.log_length_scale)

    @property
    def noise_variance(self) -> float:
        return math.exp(self.log_noise_variance)

    @property
    def effective_noise(self) -> float:
        """Noise variance used in factorizations (never below the jitter floor)."""
        return max(self.noise_variance, NOISE_FLOOR)

    def to_dict(self) -> dict[str, float]:
        return {
            "log_signal_variance": self.log_signal_variance,
            "log_length_scale": self.log_length_scale,
            "log_noise_variance": self.log_noise_variance,
        }


def cross(k: KernelParams, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kernel matrix between the rows of a and b."""
    d2 = cdist(np.atleast_2d(a), np.atleast_2d(b), "sqeuclidean")
    return k.signal_variance * np.exp(-0.5 * d2 / k.length_scale**2)


def kernel_eval(k: KernelParams, x1, x2) -> float:
    x1 = np.asarray(x1, dtype=float).ravel()
    x2 = np.asarray(x2, dtype=float).ravel()
    if x1.shape != x2.shape:
        raise ValidationError(f"dimension mismatch: {x1.size} vs {x2.size}")
    if not (np.all(np.isfinite(x1)) and np.all(np.isfinite(x2))):
        raise ValidationError("kernel arguments must be finite")
    d2 = float(np.sum((x1 - x2) ** 2))
    return k.signal_variance * math.exp(-0.5 * d2 / k.length_scale**2)
