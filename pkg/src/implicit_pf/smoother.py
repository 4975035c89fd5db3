"""One-step backward sampling.

Given a particle's states at times ``n-1`` and ``n+1``, the time-``n`` position
is re-drawn between them.  Two successive displacements combine so that the
doubled time-``n`` displacement ``d_new = 2 dX^n`` has prior
``N(2 dX^{n-1}, 4 sigma)`` and, knowing ``d_tot = dX^n + dX^{n+1}``, an endpoint
law ``N(d_tot, sigma)``.  The bearing observed at time ``n`` constrains the
midpoint ``X^{n-1} + d_new / 2``.

As in the forward step the iteration works in coordinates rotated onto the
bearing gradient: along it, prior and observation merge first (phase
``phi_0``), then the endpoint law (phase ``phi_eta``); across it only prior and
endpoint merge (phase ``phi_perp``).  The endpoint law is isotropic, so the
rotated form is exact and the reported phase is ``phi_0 + phi_eta + phi_perp``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .azimuth import ModelParams, ShipState, azimuth_linearization
from .errors import ConvergenceError, DegeneratePositionError
from .forward import ForwardConfig, RefPair, fixed_point, forward_kernel
from .gaussian import merge_arrays


@dataclass(frozen=True)
class BackwardInput:
    state_prev: ShipState
    d_tot: tuple
    b_mid: float
    refs: RefPair


@dataclass(frozen=True)
class BackwardResult:
    d_new: tuple
    phase: float
    iterations_used: int

    @property
    def displacement(self) -> tuple:
        """The corrected time-``n`` displacement, ``d_new / 2``."""
        return (self.d_new[0] / 2.0, self.d_new[1] / 2.0)


def _backward_map(xp, yp, dxp, dyp, dtx, dty, b, sigma, s, xi_x, xi_y, dX, dY, lin):
    f, fx, fy = lin(xp + 0.5 * dX, yp + 0.5 * dY)
    r = np.hypot(fx, fy)
    ux, uy = fx / r, fy / r
    a_obs = ux * dX + uy * dY + 2.0 * (b - f) / r
    v_obs = 4.0 * s / (r * r)
    m1, v1, phi0 = merge_arrays(a_obs, v_obs, 2.0 * (ux * dxp + uy * dyp), 4.0 * sigma)
    m_eta, v_eta, phi_eta = merge_arrays(m1, v1, ux * dtx + uy * dty, sigma)
    m_perp, v_perp, phi_perp = merge_arrays(2.0 * (-uy * dxp + ux * dyp), 4.0 * sigma, -uy * dtx + ux * dty, sigma)
    eta = m_eta + np.sqrt(v_eta) * xi_x
    eta_perp = m_perp + np.sqrt(v_perp) * xi_y
    return ux * eta - uy * eta_perp, uy * eta + ux * eta_perp, phi0 + phi_eta + phi_perp


def backward_kernel(xp, yp, dxp, dyp, dtx, dty, b_mid, sigma, s, xi_x, xi_y, cfg: ForwardConfig = ForwardConfig(), lin=azimuth_linearization):
    """Vectorized backward step; returns ``d_new`` in ``dX, dY``."""
    arrays = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (xp, yp, dxp, dyp, dtx, dty, b_mid, sigma, s, xi_x, xi_y)))
    xp, yp, dxp, dyp, dtx, dty, b_mid, sigma, s, xi_x, xi_y = arrays

    def step_map(dX, dY):
        return _backward_map(xp, yp, dxp, dyp, dtx, dty, b_mid, sigma, s, xi_x, xi_y, dX, dY, lin)

    start = (2.0 * dxp, 2.0 * dyp) if cfg.warm_start else (0.0, 0.0)
    out = fixed_point(step_map, start, xp.shape, cfg)
    frozen = sigma == 0.0
    if frozen.any():
        out.dX = np.where(frozen, 2.0 * dxp, out.dX)
        out.dY = np.where(frozen, 2.0 * dyp, out.dY)
        out.phase = np.where(frozen, 0.0, out.phase)
        out.iterations = np.where(frozen, 0, out.iterations)
        out.residual = np.where(frozen, 0.0, out.residual)
        out.converged = out.converged | frozen
    return out


def backward_step(inp: BackwardInput, p: ModelParams, cfg: ForwardConfig = ForwardConfig(), lin=azimuth_linearization) -> BackwardResult:
    st = inp.state_prev
    out = backward_kernel(st.x, st.y, st.dx, st.dy, inp.d_tot[0], inp.d_tot[1], inp.b_mid, p.sigma, p.s, inp.refs.xi_x, inp.refs.xi_y, cfg, lin)
    if not out.converged:
        res = float(out.residual)
        if not np.isfinite(res):
            raise DegeneratePositionError("backward iteration reached a degenerate position")
        raise ConvergenceError(f"backward step did not converge in {cfg.max_iter} iterations (residual {res:.3e})", residual=res)
    return BackwardResult((float(out.dX), float(out.dY)), float(out.phase), int(out.iterations))


def backward_log_identity_residual(xp, yp, dxp, dyp, dtx, dty, b, sigma, s, xi_x, xi_y, dX, dY, phase, lin=azimuth_linearization):
    """Mismatch of the three-factor backward density identity, in log space."""
    f, _, _ = lin(xp + 0.5 * dX, yp + 0.5 * dY)
    lhs = (
        -((dX - 2.0 * dxp) ** 2 + (dY - 2.0 * dyp) ** 2) / (8.0 * sigma)
        - (f - b) ** 2 / (2.0 * s)
        - ((dX - dtx) ** 2 + (dY - dty) ** 2) / (2.0 * sigma)
        + phase
    )
    return np.abs(lhs + (xi_x**2 + xi_y**2) / 2.0)


@dataclass
class SmoothingResult:
    state_mid: np.ndarray  # (..., 4) corrected time-n state
    state_end: np.ndarray  # (..., 4) re-forwarded time-(n+1) state
    phase_back: np.ndarray
    phase_fwd: np.ndarray
    converged: np.ndarray
    iterations: np.ndarray


def apply_smoothing(history, b_mid, b_next, sigma, s, refs_back, refs_fwd, cfg: ForwardConfig = ForwardConfig(), lin=azimuth_linearization) -> SmoothingResult:
    """Correct time ``n`` from its neighbours, then redo the step to ``n + 1``.

    ``history`` has shape ``(..., 3, 4)``: states at ``n-1, n, n+1`` with
    columns ``x, y, dx, dy``.  ``refs_back`` and ``refs_fwd`` are ``(..., 2)``
    unit-normal arrays.  No resampling happens here; callers add both phases
    to the particle's accumulated phase.
    """
    history = np.asarray(history, dtype=float)
    prev, mid, end = history[..., 0, :], history[..., 1, :], history[..., 2, :]
    dtx = mid[..., 2] + end[..., 2]
    dty = mid[..., 3] + end[..., 3]
    back = backward_kernel(prev[..., 0], prev[..., 1], prev[..., 2], prev[..., 3], dtx, dty, b_mid, sigma, s, refs_back[..., 0], refs_back[..., 1], cfg, lin)
    dxn, dyn = back.dX / 2.0, back.dY / 2.0
    state_mid = np.stack([prev[..., 0] + dxn, prev[..., 1] + dyn, dxn, dyn], axis=-1)
    fwd = forward_kernel(state_mid[..., 0], state_mid[..., 1], dxn, dyn, b_next, sigma, s, refs_fwd[..., 0], refs_fwd[..., 1], cfg, lin)
    state_end = np.stack([state_mid[..., 0] + fwd.dX, state_mid[..., 1] + fwd.dY, fwd.dX, fwd.dY], axis=-1)
    return SmoothingResult(
        state_mid,
        state_end,
        back.phase,
        fwd.phase,
        back.converged & fwd.converged,
        np.maximum(back.iterations, fwd.iterations),
    )
