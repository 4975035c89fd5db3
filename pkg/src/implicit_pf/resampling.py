"""Phase-weighted resampling and the policies deciding when to apply it."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfigError, InvalidInputError
from .seeding import uniforms_open_closed

POLICY_KINDS = ("every_step", "ratio_threshold", "subsets", "never")


@dataclass(frozen=True)
class ResamplePolicy:
    kind: str = "every_step"
    threshold: float = math.inf  # L for ratio_threshold
    size: int = 0  # block size for subsets

    def __post_init__(self):
        if self.kind not in POLICY_KINDS:
            raise InvalidConfigError(f"unknown resampling policy {self.kind!r}")
        if self.kind == "ratio_threshold" and not self.threshold > 1:
            raise InvalidConfigError(f"ratio threshold L must exceed 1, got {self.threshold!r}")
        if self.kind == "subsets" and self.size < 2:
            raise InvalidConfigError(f"subset size must be >= 2, got {self.size!r}")

    @classmethod
    def parse(cls, text: str) -> "ResamplePolicy":
        """Parse ``every``, ``never``, ``ratio:L`` or ``subsets:k``."""
        name, _, arg = text.strip().partition(":")
        try:
            if name in ("every", "every_step"):
                return cls("every_step")
            if name == "never":
                return cls("never")
            if name in ("ratio", "ratio_threshold"):
                return cls("ratio_threshold", threshold=float(arg))
            if name == "subsets":
                return cls("subsets", size=int(arg))
        except ValueError as exc:
            raise InvalidConfigError(f"bad resampling policy {text!r}: {exc}") from None
        raise InvalidConfigError(f"unknown resampling policy {text!r}")

    def __str__(self):
        if self.kind == "ratio_threshold":
            return f"ratio:{self.threshold:g}"
        if self.kind == "subsets":
            return f"subsets:{self.size}"
        return "every" if self.kind == "every_step" else "never"


@dataclass
class Ensemble:
    """Particles of one or several runs; the particle axis is the last one.

    ``state`` has shape ``(..., M, 4)`` with columns ``x, y, dx, dy``.
    ``past`` optionally carries earlier states, shape ``(..., M, K, 4)``,
    oldest first; it travels with its particle through resampling.
    """

    state: np.ndarray
    phase: np.ndarray
    past: np.ndarray | None = None

    @property
    def size(self) -> int:
        return self.phase.shape[-1]

    def take(self, idx) -> "Ensemble":
        state = np.take_along_axis(self.state, idx[..., None], axis=-2)
        past = None
        if self.past is not None:
            past = np.take_along_axis(self.past, idx[..., None, None], axis=-3)
        return Ensemble(state, np.take_along_axis(self.phase, idx, axis=-1), past)


def normalized_weights(phase) -> np.ndarray:
    """``exp(-(phase - min phase))`` per row, normalized to sum one.

    Non-finite phases get zero weight; a row with no finite phase is uniform.
    """
    phase = np.asarray(phase, dtype=float)
    ph = np.where(np.isfinite(phase), phase, np.inf)
    lo = ph.min(axis=-1, keepdims=True)
    none = ~np.isfinite(lo)
    with np.errstate(invalid="ignore"):
        w = np.exp(-(ph - np.where(none, 0.0, lo)))
    w = np.where(none, 1.0, w)
    return w / w.sum(axis=-1, keepdims=True)


def select_indices(phase, theta) -> np.ndarray:
    """CDF inversion: index ``i`` with ``C[i-1] < theta <= C[i]`` per draw.

    ``C`` is the normalized cumulative weight, with its last entry pinned to 1
    so draws in ``(0, 1]`` always land on a particle of positive weight.
    """
    phase = np.asarray(phase, dtype=float)
    theta = np.asarray(theta, dtype=float)
    if phase.shape[-1] == 0:
        raise InvalidInputError("cannot resample an empty ensemble")
    if theta.shape[:-1] != phase.shape[:-1]:
        raise InvalidInputError("draws and phases disagree on batch shape")
    cdf = np.cumsum(normalized_weights(phase), axis=-1)
    cdf[..., -1] = 1.0
    flat_cdf = cdf.reshape(-1, cdf.shape[-1])
    flat_theta = theta.reshape(-1, theta.shape[-1])
    out = np.empty(flat_theta.shape, dtype=np.int64)
    for row in range(flat_cdf.shape[0]):
        out[row] = np.searchsorted(flat_cdf[row], flat_theta[row], side="left")
    return np.minimum(out, cdf.shape[-1] - 1).reshape(theta.shape)


def resample(particles: Ensemble, uniform_draws) -> Ensemble:
    """Copy particles by their phase weights; all phases reset to zero."""
    idx = select_indices(particles.phase, uniform_draws)
    out = particles.take(idx)
    out.phase = np.zeros_like(out.phase)
    return out


def policy_indices(phase, policy: ResamplePolicy, theta):
    """Indices chosen by ``policy`` and a mask of rows whose phases reset.

    Rows that are not resampled get the identity permutation.
    """
    phase = np.asarray(phase, dtype=float)
    m = phase.shape[-1]
    ident = np.broadcast_to(np.arange(m), phase.shape).copy()
    batch = phase.shape[:-1]
    if policy.kind == "never":
        return ident, np.zeros(batch, dtype=bool)
    if policy.kind == "every_step":
        return select_indices(phase, theta), np.ones(batch, dtype=bool)
    if policy.kind == "ratio_threshold":
        spread = phase.max(axis=-1) - phase.min(axis=-1)
        rows = spread > math.log(policy.threshold)
        idx = np.where(rows[..., None], select_indices(phase, theta), ident)
        return idx, rows
    # subsets: contiguous blocks, the last one possibly shorter
    if policy.size > m:
        raise InvalidConfigError(f"subset size {policy.size} exceeds ensemble size {m}")
    idx = ident
    for start in range(0, m, policy.size):
        stop = min(start + policy.size, m)
        idx[..., start:stop] = start + select_indices(phase[..., start:stop], theta[..., start:stop])
    return idx, np.ones(batch, dtype=bool)


def maybe_resample(particles: Ensemble, policy: ResamplePolicy, rng=None, uniforms=None) -> Ensemble:
    """Apply ``policy``; draws ``M`` uniforms from ``rng`` unless given."""
    if uniforms is None:
        uniforms = uniforms_open_closed(rng, particles.phase.shape)
    idx, reset = policy_indices(particles.phase, policy, np.asarray(uniforms, dtype=float))
    out = particles.take(idx)
    out.phase = np.where(reset[..., None], 0.0, out.phase)
    return out
