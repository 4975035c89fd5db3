"""Interpolatory (chainless) sampling of a scalar SDE path pinned at both ends.

The SDE ``dx = f(x, t) dt + sqrt(sigma) dw`` is discretized on ``N = 2**levels``
steps with the balanced implicit scheme, which makes each increment Gaussian
with drift ``a_n = delta f / (1 - delta f')`` and variance
``var_n = sigma delta / (1 - delta f')**2``.  Given those, the interior nodes
are filled in by recursive midpoint sampling: the midpoint of a span is the
product of the law reached from the left end and the law implied by the right
end.  When ``f`` depends on ``x`` the step parameters are re-evaluated along
the current path and the construction repeated, with the unit-normal vector
``Xi`` held fixed, until the path stops moving.

``Xi`` is consumed breadth first: the global midpoint first, then the quarter
points left to right, then the eighth points, and so on.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .errors import ConvergenceError, InvalidInputError, SingularSchemeError
from .gaussian import merge_arrays

SINGULAR_EPS = 1e-8


@dataclass(frozen=True)
class BridgeSpec:
    """A conditioned scalar SDE problem.

    ``drift(x, t)`` and ``drift_slope(x, t)`` must accept numpy arrays.
    """

    drift: Callable
    drift_slope: Callable
    noise_scale: float
    horizon: float = 1.0
    levels: int = 4
    x_start: float = 0.0
    x_end: float = 0.0

    def __post_init__(self):
        if int(self.levels) != self.levels or self.levels < 1:
            raise InvalidInputError(f"levels must be an integer >= 1, got {self.levels!r}")
        for name in ("noise_scale", "horizon"):
            value = getattr(self, name)
            if not (np.isfinite(value) and value > 0):
                raise InvalidInputError(f"{name} must be finite and > 0, got {value!r}")

    @property
    def n_steps(self) -> int:
        return 1 << self.levels

    @property
    def delta(self) -> float:
        return self.horizon / self.n_steps

    def times(self) -> np.ndarray:
        return np.arange(self.n_steps + 1) * self.delta


@dataclass(frozen=True)
class StepParams:
    a: np.ndarray
    var: np.ndarray


@dataclass(frozen=True)
class IterationConfig:
    tol: float = 1e-10
    max_iter: int = 100
    relaxation: float = 1.0
    min_relaxation: float = 1.0 / 16


@dataclass(frozen=True)
class PathSample:
    values: np.ndarray
    endpoint_phase: float
    iterations_used: int

    def full_path(self, spec: BridgeSpec) -> np.ndarray:
        return np.concatenate(([spec.x_start], self.values, [spec.x_end]))


def zero_drift(x, t):
    return np.zeros(np.broadcast(x, t).shape)


def constant_drift(c: float):
    def drift(x, t):
        return np.full(np.broadcast(x, t).shape, float(c))

    return drift


def step_params(path, spec: BridgeSpec) -> StepParams:
    """Balanced-implicit drift and variance of each of the ``N`` increments."""
    path = np.asarray(path, dtype=float)
    n = spec.n_steps
    if path.shape[-1] != n + 1:
        raise InvalidInputError(f"path must hold {n + 1} nodes, got {path.shape[-1]}")
    delta = spec.delta
    x = path[..., :-1]
    t = spec.times()[:-1]
    f = np.broadcast_to(spec.drift(x, t), x.shape)
    fp = np.broadcast_to(spec.drift_slope(x, t), x.shape)
    denom = 1.0 - delta * fp
    bad = np.abs(denom) <= SINGULAR_EPS
    if bad.any():
        idx = np.argwhere(bad)[0]
        raise SingularSchemeError(int(idx[-1]), float(denom[tuple(idx)]))
    return StepParams(a=delta * f / denom, var=spec.noise_scale * delta / denom**2)


def subdivide_sample(spec: BridgeSpec, p: StepParams, Xi) -> np.ndarray:
    """Fill the ``N - 1`` interior nodes by recursive midpoint sampling.

    ``Xi`` may carry leading batch dimensions; ``p`` broadcasts against them.
    """
    n = spec.n_steps
    Xi = np.asarray(Xi, dtype=float)
    if Xi.shape[-1] != n - 1:
        raise InvalidInputError(f"Xi must hold {n - 1} draws, got {Xi.shape[-1]}")
    a = np.asarray(p.a, dtype=float)
    var = np.asarray(p.var, dtype=float)
    if a.shape[-1] != n or var.shape[-1] != n:
        raise InvalidInputError(f"step parameters must hold {n} entries")
    batch = np.broadcast_shapes(Xi.shape[:-1], a.shape[:-1], var.shape[:-1])
    nodes = np.empty(batch + (n + 1,))
    nodes[..., 0] = spec.x_start
    nodes[..., n] = spec.x_end

    used = 0
    for level in range(spec.levels):
        spans = 1 << level
        width = n >> level
        half = width >> 1
        # per span: sums over the left and right halves of its increments
        a_halves = a.reshape(a.shape[:-1] + (spans, 2, half)).sum(axis=-1)
        v_halves = var.reshape(var.shape[:-1] + (spans, 2, half)).sum(axis=-1)
        left = nodes[..., 0:n:width]
        right = nodes[..., width : n + 1 : width]
        mean, v, _ = merge_arrays(
            left + a_halves[..., 0],
            v_halves[..., 0],
            right - a_halves[..., 1],
            v_halves[..., 1],
        )
        xi = Xi[..., used : used + spans]
        nodes[..., half:n:width] = mean + np.sqrt(v) * xi
        used += spans
    return nodes[..., 1:n]


def endpoint_phase(spec: BridgeSpec, p: StepParams) -> float:
    """Negative log probability (up to a constant) of reaching ``x_end``."""
    gap = spec.x_end - spec.x_start - np.sum(p.a, axis=-1)
    return gap**2 / (2.0 * np.sum(p.var, axis=-1))


def bridge_iterate(spec: BridgeSpec, Xi, cfg: IterationConfig = IterationConfig()) -> PathSample:
    """Sample a conditioned path by fixed-point iteration with ``Xi`` frozen.

    The first guess is the straight line between the endpoints.  The relaxation
    factor is halved (down to ``cfg.min_relaxation``) whenever the residual grows.
    """
    Xi = np.asarray(Xi, dtype=float)
    n = spec.n_steps
    if Xi.shape != (n - 1,):
        raise InvalidInputError(f"Xi must have shape ({n - 1},), got {Xi.shape}")
    path = np.linspace(spec.x_start, spec.x_end, n + 1)
    omega = cfg.relaxation
    prev_res = np.inf
    res = np.inf
    for it in range(cfg.max_iter + 1):
        proposal = subdivide_sample(spec, step_params(path, spec), Xi)
        res = float(np.max(np.abs(proposal - path[1:-1])))
        if res < cfg.tol:
            path[1:-1] = proposal
            p = step_params(path, spec)
            return PathSample(path[1:-1].copy(), float(endpoint_phase(spec, p)), it)
        if res > prev_res:
            omega = max(omega / 2.0, cfg.min_relaxation)
        prev_res = res
        path[1:-1] += omega * (proposal - path[1:-1])
    raise ConvergenceError(
        f"bridge iteration did not converge in {cfg.max_iter} iterations (residual {res:.3e})",
        residual=res,
    )


def residual_history(spec: BridgeSpec, Xi, n_iter: int, relaxation: float = 1.0) -> np.ndarray:
    """Max-norm change of the iterate over ``n_iter`` plain relaxed iterations."""
    Xi = np.asarray(Xi, dtype=float)
    path = np.linspace(spec.x_start, spec.x_end, spec.n_steps + 1)
    out = []
    for _ in range(n_iter):
        proposal = subdivide_sample(spec, step_params(path, spec), Xi)
        out.append(np.max(np.abs(proposal - path[1:-1])))
        path[1:-1] += relaxation * (proposal - path[1:-1])
    return np.array(out)


def quadratic_form_residual(spec: BridgeSpec, sample: PathSample, Xi) -> float:
    """Relative mismatch of the discrete path-density identity at ``sample``.

    At the fixed point, ``sum (dx_n - a_n)^2 / var_n`` equals
    ``sum Xi^2 + (x_end - x_start - sum a)^2 / sum var``.
    """
    path = sample.full_path(spec)
    p = step_params(path, spec)
    lhs = float(np.sum((np.diff(path) - p.a) ** 2 / p.var))
    rhs = float(np.sum(np.asarray(Xi) ** 2) + 2.0 * endpoint_phase(spec, p))
    return abs(lhs - rhs) / abs(rhs) if rhs else abs(lhs)
