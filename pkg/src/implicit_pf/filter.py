"""Filter driver: forward steps, optional smoothing, resampling, estimates.

``run_filter_batch`` advances several independent runs at once; every array is
``(runs, particles, ...)``.  Each run draws from its own stream
(``seeding.run_generator(seed, "filter", run)``) in a fixed order per step:

1. ``(M, 2)`` forward reference draws,
2. with smoothing: ``(M, 2)`` backward and ``(M, 2)`` re-forward draws,
3. ``M`` resampling uniforms (drawn whatever the policy, keeping streams aligned).

The first displacement ``(dx1, dy1)`` is known, so at step 1 every particle
sits at ``(x0 + dx1, y0 + dy1)``; filtering starts with the step-2 bearing.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .azimuth import ModelParams, azimuth_linearization
from .errors import ConvergenceError, InvalidInputError
from .forward import ForwardConfig, forward_kernel
from .resampling import Ensemble, ResamplePolicy, normalized_weights, policy_indices
from .seeding import run_generator, uniforms_open_closed
from .smoother import apply_smoothing


@dataclass
class FilterOutput:
    """Result of filtering one or more runs.

    ``estimates`` is ``(runs, steps, 2)``.  ``history`` (when kept) holds each
    final particle's ancestral states, ``(runs, M, steps, 4)``.
    """

    estimates: np.ndarray
    failed: np.ndarray
    fail_step: np.ndarray
    max_iterations: np.ndarray
    ensemble: Ensemble
    history: np.ndarray | None = None
    diagnostics: list = field(default_factory=list)


def initial_states(p: ModelParams, runs: int, init=None) -> np.ndarray:
    """``(runs, 4)`` step-1 states; ``init`` overrides ``(x0, y0, dx1, dy1)`` per run."""
    if init is None:
        init = np.array([p.x0, p.y0, p.dx1, p.dy1])
    init = np.broadcast_to(np.asarray(init, dtype=float), (runs, 4))
    dx = init[:, 2] + 0.0
    dy = init[:, 3] + 0.0
    return np.stack([init[:, 0] + dx, init[:, 1] + dy, dx, dy], axis=-1)


def run_filter_batch(
    b,
    p: ModelParams,
    M: int,
    policy: ResamplePolicy = ResamplePolicy(),
    cfg: ForwardConfig = ForwardConfig(),
    smoothing: bool = False,
    seed: int = 0,
    runs=None,
    sigma=None,
    init=None,
    keep_history: bool = False,
    record: bool = False,
    lin=azimuth_linearization,
) -> FilterOutput:
    """Filter the bearing records ``b`` of shape ``(R, T)``.

    ``runs`` names the stream of each row (default ``0..R-1``); ``sigma``
    optionally gives a per-run assumed motion variance.
    """
    b = np.atleast_2d(np.asarray(b, dtype=float))
    R, T = b.shape
    if T < 1:
        raise InvalidInputError("need at least one observation")
    if M < 1:
        raise InvalidInputError(f"need at least one particle, got {M}")
    runs = list(range(R)) if runs is None else list(runs)
    if len(runs) != R:
        raise InvalidInputError("one run index per observation record is required")
    sig = np.broadcast_to(np.asarray(p.sigma if sigma is None else sigma, dtype=float), (R,))[:, None]
    s = p.s
    gens = [run_generator(seed, "filter", r) for r in runs]

    state = np.repeat(initial_states(p, R, init)[:, None, :], M, axis=1)
    past = np.empty((R, M, 0, 4))
    ens = Ensemble(state, np.zeros((R, M)), past)
    estimates = np.empty((R, T, 2))
    estimates[:, 0] = state[:, 0, :2]
    failed = np.zeros(R, dtype=bool)
    fail_step = np.full(R, -1)
    max_iter = np.zeros((R, T), dtype=np.int64)
    diagnostics = []
    keep = None if keep_history else (1 if smoothing else 0)

    for t in range(1, T):
        refs = np.stack([g.standard_normal((M, 2)) for g in gens])
        if smoothing:
            brefs = np.stack([g.standard_normal((M, 2)) for g in gens])
            frefs = np.stack([g.standard_normal((M, 2)) for g in gens])
        theta = np.stack([uniforms_open_closed(g, M) for g in gens])

        cur = ens.state
        bt = b[:, t, None]
        fwd = forward_kernel(cur[..., 0], cur[..., 1], cur[..., 2], cur[..., 3], bt, sig, s, refs[..., 0], refs[..., 1], cfg, lin)
        ok = fwd.converged
        iters = fwd.iterations
        dX = np.where(ok, fwd.dX, cur[..., 2])
        dY = np.where(ok, fwd.dY, cur[..., 3])
        new = np.stack([cur[..., 0] + dX, cur[..., 1] + dY, dX, dY], axis=-1)
        phase = ens.phase + np.where(ok, fwd.phase, np.inf)
        if record:
            diagnostics.append(
                dict(step=t + 1, x=cur[..., 0], y=cur[..., 1], dx=cur[..., 2], dy=cur[..., 3], b=np.broadcast_to(bt, ok.shape),
                     xi_x=refs[..., 0], xi_y=refs[..., 1], dX=fwd.dX, dY=fwd.dY, phase=fwd.phase,
                     iterations=fwd.iterations, converged=fwd.converged, sigma=np.broadcast_to(sig, ok.shape))
            )

        if smoothing and t >= 2:
            hist = np.stack([ens.past[:, :, -1, :], cur, new], axis=-2)
            sm = apply_smoothing(hist, b[:, t - 1, None], bt, sig, s, brefs, frefs, cfg, lin)
            good = sm.converged & ok
            cur = np.where(good[..., None], sm.state_mid, cur)
            new = np.where(good[..., None], sm.state_end, new)
            phase = np.where(good, ens.phase + sm.phase_back + sm.phase_fwd, phase)
            ok = ok & sm.converged
            iters = np.maximum(iters, sm.iterations)

        max_iter[:, t] = iters.max(axis=1)
        bad_runs = ~ok.all(axis=1) & ~failed
        fail_step[bad_runs] = t + 1
        failed |= bad_runs

        past = np.concatenate([ens.past, cur[:, :, None, :]], axis=2)
        if keep is not None:
            past = past[:, :, past.shape[2] - keep :, :]
        ens = Ensemble(new, phase, past)
        idx, reset = policy_indices(ens.phase, policy, theta)
        ens = ens.take(idx)
        ens.phase = np.where(reset[:, None], 0.0, ens.phase)

        w = normalized_weights(ens.phase)
        estimates[:, t, 0] = np.sum(w * ens.state[..., 0], axis=1)
        estimates[:, t, 1] = np.sum(w * ens.state[..., 1], axis=1)

    history = None
    if keep_history:
        history = np.concatenate([ens.past, ens.state[:, :, None, :]], axis=2)
    return FilterOutput(estimates, failed, fail_step, max_iter, ens, history, diagnostics)


def run_filter(
    obs,
    p: ModelParams,
    M: int,
    policy: ResamplePolicy = ResamplePolicy(),
    cfg: ForwardConfig = ForwardConfig(),
    smoothing: bool = False,
    seed: int = 0,
    run: int = 0,
    **kwargs,
) -> FilterOutput:
    """Filter one bearing record (``Observation`` objects or floats).

    Raises ``ConvergenceError`` naming the step at which any particle failed.
    Output arrays keep a leading run axis of length one.
    """
    obs = list(obs)
    if not obs:
        raise InvalidInputError("need at least one observation")
    b = np.array([getattr(o, "b", o) for o in obs], dtype=float)[None, :]
    out = run_filter_batch(b, p, M, policy, cfg, smoothing, seed, runs=[run], **kwargs)
    if out.failed[0]:
        raise ConvergenceError(f"filter failed at step {out.fail_step[0]}", step=int(out.fail_step[0]))
    return out
