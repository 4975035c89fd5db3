"""Forward step: sample each particle's next displacement directly.

For one particle at ``(x, y)`` with previous displacement ``(dx, dy)`` and the
next bearing ``b``, the new displacement ``d`` is found by iterating::

    linearize the bearing at (x, y) + d_j
    eta   = component of d along the bearing gradient   (observed direction)
    eta+  = component orthogonal to it                  (unobserved direction)
    eta  ~ N(a1, s / r^2) from the observation, N(a2, sigma) from the motion
    eta  <- merge of the two, sampled with xi_x; the merge yields the phase
    eta+ <- N(a+, sigma) sampled with xi_y
    d_{j+1} = rotate (eta, eta+) back to (dX, dY)

with the reference draws ``(xi_x, xi_y)`` frozen for the whole iteration.  At
the fixed point the particle's motion prior times the bearing likelihood equals
``exp(-(xi_x^2 + xi_y^2) / 2) * exp(-phase)``; ``exp(-phase)`` becomes the
particle's resampling weight.

All kernels are elementwise over arbitrarily shaped particle arrays.  Each
element iterates independently and is frozen once converged, so a particle's
result never depends on which other particles share its batch.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

from .azimuth import ModelParams, ShipState, azimuth_linearization
from .errors import ConvergenceError, DegeneratePositionError
from .gaussian import merge_arrays


@dataclass(frozen=True)
class RefPair:
    xi_x: float
    xi_y: float


@dataclass(frozen=True)
class ForwardConfig:
    tol: float = 1e-12
    max_iter: int = 50
    relaxation: float = 1.0
    min_relaxation: float = 1.0 / 16
    warm_start: bool = False

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if not 0 < self.relaxation <= 1:
            raise ValueError("relaxation must lie in (0, 1]")


@dataclass(frozen=True)
class ForwardResult:
    new_disp: tuple
    new_state: ShipState
    phase: float
    iterations_used: int


@dataclass
class KernelResult:
    """Elementwise output of a fixed-point kernel."""

    dX: np.ndarray
    dY: np.ndarray
    phase: np.ndarray
    iterations: np.ndarray
    converged: np.ndarray
    residual: np.ndarray


def rotation(fx, fy):
    """Orthogonal matrix taking ``(dX, dY)`` to ``(eta, eta+)``; shape ``(..., 2, 2)``."""
    r = np.hypot(fx, fy)
    ux, uy = fx / r, fy / r
    return np.stack([np.stack([ux, uy], -1), np.stack([-uy, ux], -1)], -2)


def _forward_map(x, y, dx, dy, b, sigma, s, xi_x, xi_y, dX, dY, lin):
    f, fx, fy = lin(x + dX, y + dY)
    r = np.hypot(fx, fy)
    ux, uy = fx / r, fy / r
    a_obs = (b - f + fx * dX + fy * dY) / r
    v_obs = s / (r * r)
    a_mot = ux * dx + uy * dy
    a_perp = -uy * dx + ux * dy
    mean, var, phase = merge_arrays(a_obs, v_obs, a_mot, sigma)
    eta = mean + np.sqrt(var) * xi_x
    eta_perp = a_perp + np.sqrt(sigma) * xi_y
    return ux * eta - uy * eta_perp, uy * eta + ux * eta_perp, phase


def fixed_point(step_map: Callable, start, shape, cfg: ForwardConfig) -> KernelResult:
    """Masked elementwise fixed-point iteration of ``(dX, dY) -> (dX', dY', phase)``.

    ``iterations`` counts map applications before the one that confirmed
    convergence; a map that is already exact after one application reports 1.
    """
    dX = np.broadcast_to(start[0], shape).astype(float)
    dY = np.broadcast_to(start[1], shape).astype(float)
    out = KernelResult(
        dX=dX.copy(),
        dY=dY.copy(),
        phase=np.full(shape, np.nan),
        iterations=np.full(shape, -1, dtype=np.int64),
        converged=np.zeros(shape, dtype=bool),
        residual=np.full(shape, np.inf),
    )
    omega = np.full(shape, float(cfg.relaxation))
    prev = np.full(shape, np.inf)
    with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
        for k in range(cfg.max_iter + 1):
            nX, nY, phase = step_map(dX, dY)
            res = np.maximum(np.abs(nX - dX), np.abs(nY - dY))
            active = ~out.converged
            out.residual = np.where(active, res, out.residual)
            newly = active & (res < cfg.tol)
            if newly.any():
                out.dX[newly] = nX[newly]
                out.dY[newly] = nY[newly]
                out.phase[newly] = phase[newly]
                out.iterations[newly] = k
                out.converged |= newly
            if out.converged.all():
                break
            omega = np.where(res > prev, np.maximum(omega / 2.0, cfg.min_relaxation), omega)
            prev = res
            still = ~out.converged
            dX = np.where(still, dX + omega * (nX - dX), dX)
            dY = np.where(still, dY + omega * (nY - dY), dY)
    failed = ~out.converged
    if failed.any():
        out.dX[failed] = dX[failed]
        out.dY[failed] = dY[failed]
    return out


def forward_kernel(x, y, dx, dy, b, sigma, s, xi_x, xi_y, cfg: ForwardConfig = ForwardConfig(), lin=azimuth_linearization):
    """Vectorized forward step.  ``lin(X, Y) -> (f, f_x, f_y)`` is the observation model."""
    arrays = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, dx, dy, b, sigma, s, xi_x, xi_y)))
    x, y, dx, dy, b, sigma, s, xi_x, xi_y = arrays
    shape = x.shape

    def step_map(dX, dY):
        return _forward_map(x, y, dx, dy, b, sigma, s, xi_x, xi_y, dX, dY, lin)

    start = (dx, dy) if cfg.warm_start else (0.0, 0.0)
    out = fixed_point(step_map, start, shape, cfg)
    # deterministic motion: the prior is a point mass, nothing to sample
    frozen = sigma == 0.0
    if frozen.any():
        out.dX = np.where(frozen, dx, out.dX)
        out.dY = np.where(frozen, dy, out.dY)
        out.phase = np.where(frozen, 0.0, out.phase)
        out.iterations = np.where(frozen, 0, out.iterations)
        out.residual = np.where(frozen, 0.0, out.residual)
        out.converged = out.converged | frozen
    return out


def forward_step(state: ShipState, b_next: float, p: ModelParams, refs: RefPair, cfg: ForwardConfig = ForwardConfig(), lin=azimuth_linearization) -> ForwardResult:
    out = forward_kernel(state.x, state.y, state.dx, state.dy, b_next, p.sigma, p.s, refs.xi_x, refs.xi_y, cfg, lin)
    if not out.converged:
        res = float(out.residual)
        if not np.isfinite(res):
            raise DegeneratePositionError("forward iteration reached a degenerate position")
        raise ConvergenceError(f"forward step did not converge in {cfg.max_iter} iterations (residual {res:.3e})", residual=res)
    dX, dY = float(out.dX), float(out.dY)
    new_state = ShipState(state.x + dX, state.y + dY, dX, dY)
    return ForwardResult((dX, dY), new_state, float(out.phase), int(out.iterations))


def forward_log_identity_residual(x, y, dx, dy, b, sigma, s, xi_x, xi_y, dX, dY, phase, lin=azimuth_linearization):
    """Mismatch of the forward density identity at a converged step, in log space.

    Compares ``-(|d - d_prev|^2) / 2 sigma - (f(x + d) - b)^2 / 2 s + phase`` with
    ``-(xi_x^2 + xi_y^2) / 2``.
    """
    f, _, _ = lin(x + dX, y + dY)
    lhs = -((dX - dx) ** 2 + (dY - dy) ** 2) / (2.0 * sigma) - (f - b) ** 2 / (2.0 * s) + phase
    rhs = -(xi_x**2 + xi_y**2) / 2.0
    return np.abs(lhs - rhs)
