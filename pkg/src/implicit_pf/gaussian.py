"""One-dimensional Gaussian algebra.

Everything the filter does reduces to multiplying two scalar Gaussian
densities and sampling the result with a fixed unit-normal draw::

    exp(-(x-A1)^2 / 2V1) * exp(-(x-A2)^2 / 2V2) = exp(-(x-a)^2 / 2v) * exp(-phase)

with ``v = V1 V2 / (V1 + V2)``, ``a = (A1 V2 + A2 V1) / (V1 + V2)`` and
``phase = (A2 - A1)^2 / (2 (V1 + V2))``.  ``merge_arrays`` is the vectorized
form used by the filter kernels; ``merge`` wraps it for scalar values.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidInputError


@dataclass(frozen=True)
class Gaussian1D:
    mean: float
    variance: float

    def __post_init__(self):
        if not math.isfinite(self.mean):
            raise InvalidInputError(f"mean must be finite, got {self.mean!r}")
        if not (math.isfinite(self.variance) and self.variance > 0):
            raise InvalidInputError(f"variance must be finite and > 0, got {self.variance!r}")

    @property
    def sd(self) -> float:
        return math.sqrt(self.variance)


@dataclass(frozen=True)
class MergeResult:
    merged: Gaussian1D
    phase: float


def merge_arrays(a1, v1, a2, v2):
    """Elementwise product of N(a1, v1) and N(a2, v2).

    Returns ``(mean, variance, phase)``; inputs broadcast.  No validation is
    done here, callers guarantee positive variances.
    """
    vs = v1 + v2
    mean = (a1 * v2 + a2 * v1) / vs
    var = v1 * v2 / vs
    phase = (a2 - a1) ** 2 / (2.0 * vs)
    return mean, var, phase


def merge(g1: Gaussian1D, g2: Gaussian1D) -> MergeResult:
    """Product of two Gaussian laws, renormalized, with its phase."""
    mean, var, phase = merge_arrays(g1.mean, g1.variance, g2.mean, g2.variance)
    return MergeResult(Gaussian1D(float(mean), float(var)), float(phase))


def sample_from(g: Gaussian1D, xi: float) -> float:
    """Map a unit-normal draw onto ``g``."""
    if not math.isfinite(xi):
        raise InvalidInputError(f"reference draw must be finite, got {xi!r}")
    return g.mean + math.sqrt(g.variance) * xi


def log_density_unnormalized(g: Gaussian1D, x):
    """``-(x - mean)^2 / (2 variance)``; accepts scalars or arrays."""
    return -((x - g.mean) ** 2) / (2.0 * g.variance)
