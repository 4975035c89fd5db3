"""Monte Carlo studies on the ship test bed.

* ``intrinsic_uncertainty``: how far trajectories consistent with one fixed
  bearing record spread from the one that produced it.
* ``discrepancy_study``: filter error statistics over many synthetic records.
* ``robustness_study``: reconstructions under wrong initial data or a randomly
  mis-specified motion variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .azimuth import ModelParams, integrate_truth, simulate_truth_batch, truth_draws
from .errors import FailureBudgetError, InfeasibleBandError
from .filter import run_filter_batch
from .forward import ForwardConfig
from .parallel import map_chunks
from .resampling import ResamplePolicy
from .seeding import run_generator

CHECKPOINTS = (40, 80, 120, 160)
FAILURE_BUDGET = 0.01
CHUNK = 50


@dataclass
class ExperimentConfig:
    runs: int = 2000
    particles: int = 100
    steps: int = 160
    smoothing: bool = False
    policy: ResamplePolicy = field(default_factory=ResamplePolicy)
    master_seed: int = 0
    output_path: str | None = None
    model: ModelParams = field(default_factory=ModelParams)
    forward: ForwardConfig = field(default_factory=ForwardConfig)
    workers: int = 1
    chunk: int = CHUNK

    def __post_init__(self):
        if self.runs < 1 or self.particles < 1 or self.steps < 1:
            raise ValueError("runs, particles and steps must all be >= 1")

    @property
    def params(self) -> ModelParams:
        return self.model.with_(n_steps=self.steps)

    def checkpoints(self) -> list[int]:
        return [c for c in CHECKPOINTS if c <= self.steps] or [self.steps]


@dataclass
class CheckpointStats:
    step: int
    mean_x: float
    sd_x: float | None
    mean_y: float
    sd_y: float | None
    se_x: float | None = None
    se_y: float | None = None


@dataclass
class RunStats:
    rows: list
    runs: int
    failures: int = 0

    def at(self, step: int) -> CheckpointStats:
        return next(r for r in self.rows if r.step == step)


# ---------------------------------------------------------------- intrinsic uncertainty


@dataclass
class IntrinsicResult:
    step: list
    sd_x: list
    sd_y: list
    accepted: int
    proposals: int
    reference_attempts: int


def _band(p: ModelParams) -> float:
    return p.s * math.sqrt(2.0 / p.n_steps)


def _residual_variance(b, x, y) -> np.ndarray:
    return np.mean((b - np.arctan2(y, x)) ** 2, axis=-1)


def intrinsic_uncertainty(cfg: ExperimentConfig, accepted_target: int = 200, batch: int = 2000,
                          max_proposals: int = 1_000_000, max_reference_attempts: int = 1000) -> IntrinsicResult:
    """Spread of trajectories compatible with one bearing record.

    A reference record is drawn (and redrawn until its own residual variance
    passes the acceptance band, so that it belongs to the family it defines).
    Candidates keep each step's motion innovation along the bearing gradient
    at the reference position and redraw the orthogonal part; a candidate is
    accepted when its maximum-likelihood residual variance lies within
    ``s * sqrt(2 / n)`` of ``s``.
    """
    p = cfg.params
    n = p.n_steps
    band = _band(p)
    for attempt in range(max_reference_attempts):
        motion, obs_noise = truth_draws(run_generator(cfg.master_seed, "reference", attempt), n)
        ref = integrate_truth(p, motion[None], obs_noise[None])
        if abs(_residual_variance(ref.b, ref.x, ref.y)[0] - p.s) <= band:
            break
    else:
        raise InfeasibleBandError("no reference record passes its own acceptance band")

    # bearing-gradient direction at the reference position of steps 2..n
    X, Y = ref.x[0, 1:], ref.y[0, 1:]
    rho = np.hypot(X, Y)
    u = np.stack([-Y / rho, X / rho], axis=-1)
    w = np.stack([-u[:, 1], u[:, 0]], axis=-1)
    along = np.sum(motion * u, axis=-1)

    accepted = []
    count = 0
    proposals = 0
    k = 0
    while count < accepted_target:
        if proposals >= max_proposals and count < 1e-3 * proposals:
            raise InfeasibleBandError(f"acceptance rate {count}/{proposals} below 0.1%")
        if proposals >= 100 * max_proposals:
            raise InfeasibleBandError(f"only {count} candidates accepted after {proposals} proposals")
        zeta = run_generator(cfg.master_seed, "candidates", k).standard_normal((batch, n - 1))
        k += 1
        cand_motion = along[None, :, None] * u[None] + zeta[..., None] * w[None]
        cand = integrate_truth(p, cand_motion, np.zeros((batch, n)))
        ok = np.abs(_residual_variance(ref.b, cand.x, cand.y) - p.s) <= band
        proposals += batch
        take = np.flatnonzero(ok)[: accepted_target - count]
        accepted.append((cand.x[take] - ref.x, cand.y[take] - ref.y))
        count += take.size
    ex = np.concatenate([a[0] for a in accepted])
    ey = np.concatenate([a[1] for a in accepted])
    steps = cfg.checkpoints()
    return IntrinsicResult(
        steps,
        [float(ex[:, c - 1].std()) for c in steps],
        [float(ey[:, c - 1].std()) for c in steps],
        count,
        proposals,
        attempt + 1,
    )


# ---------------------------------------------------------------- filter error statistics


def _discrepancy_chunk(run_ids, cfg: ExperimentConfig):
    p = cfg.params
    truth = simulate_truth_batch(p, cfg.master_seed, run_ids)
    out = run_filter_batch(truth.b, p, cfg.particles, cfg.policy, cfg.forward, cfg.smoothing, cfg.master_seed, runs=run_ids)
    idx = np.array(cfg.checkpoints()) - 1
    err = np.stack([out.estimates[:, idx, 0] - truth.x[:, idx], out.estimates[:, idx, 1] - truth.y[:, idx]], axis=-1)
    return err, out.failed, out.max_iterations.max(axis=1)


def discrepancy_errors(cfg: ExperimentConfig):
    """Per-run errors ``(runs, checkpoints, 2)``, failure mask, max iterations."""
    parts = map_chunks(_discrepancy_chunk, cfg.runs, cfg.chunk, cfg.workers, cfg=cfg)
    return tuple(np.concatenate(z) for z in zip(*parts))


def summarize_errors(err, steps) -> list[CheckpointStats]:
    n = err.shape[0]
    rows = []
    for k, step in enumerate(steps):
        ex, ey = err[:, k, 0], err[:, k, 1]
        if n > 1:
            sx, sy = float(ex.std()), float(ey.std())
            rows.append(CheckpointStats(step, float(ex.mean()), sx, float(ey.mean()), sy, sx / math.sqrt(n), sy / math.sqrt(n)))
        else:
            rows.append(CheckpointStats(step, float(ex.mean()), None, float(ey.mean()), None))
    return rows


def discrepancy_study(cfg: ExperimentConfig) -> RunStats:
    """Mean and (population) standard deviation of estimate minus truth."""
    err, failed, _ = discrepancy_errors(cfg)
    failures = int(failed.sum())
    if failures > FAILURE_BUDGET * cfg.runs:
        raise FailureBudgetError(f"{failures} of {cfg.runs} runs failed")
    good = err[~failed]
    return RunStats(summarize_errors(good, cfg.checkpoints()), good.shape[0], failures)


# ---------------------------------------------------------------- robustness


@dataclass
class RobustnessResult:
    truth: np.ndarray  # (R, T, 2)
    baseline: np.ndarray
    perturbed: np.ndarray
    jittered: np.ndarray
    sigma_assumed: np.ndarray  # (R,)
    redraws: int
    failed: np.ndarray

    SERIES = ("truth", "baseline", "perturbed", "jittered")

    def series(self, run: int = 0):
        """``(name, step, x, y)`` rows for one run."""
        for name in self.SERIES:
            path = getattr(self, name)[run]
            for t, (x, y) in enumerate(path, start=1):
                yield name, t, float(x), float(y)


def jittered_sigma(sigma: float, eps: float, seed: int, run: int):
    """Draw ``N(sigma, (eps sigma)^2)``, redrawing non-positive values."""
    if not 0 <= eps < 1:
        raise ValueError(f"sigma jitter eps must lie in [0, 1), got {eps!r}")
    rng = run_generator(seed, "sigma_jitter", run)
    redraws = 0
    while True:
        value = sigma + eps * sigma * rng.standard_normal()
        if value > 0:
            return value, redraws
        redraws += 1


def robustness_study(cfg: ExperimentConfig, perturb_x0: float = 0.1, perturb_y0: float = 0.4,
                     sigma_jitter_eps: float = 0.4, run_ids=None) -> RobustnessResult:
    """Truth plus baseline, perturbed-start and jittered-sigma reconstructions.

    All three reconstructions of a run share its filter stream, so with zero
    perturbation and zero jitter they coincide bit for bit.
    """
    p = cfg.params
    run_ids = list(range(cfg.runs)) if run_ids is None else list(run_ids)
    truth = simulate_truth_batch(p, cfg.master_seed, run_ids)
    common = dict(M=cfg.particles, policy=cfg.policy, cfg=cfg.forward, smoothing=cfg.smoothing, seed=cfg.master_seed, runs=run_ids)
    base = run_filter_batch(truth.b, p, **common)
    start = np.array([p.x0 + perturb_x0, p.y0 + perturb_y0, p.dx1, p.dy1])
    pert = run_filter_batch(truth.b, p, init=start, **common)
    draws = [jittered_sigma(p.sigma, sigma_jitter_eps, cfg.master_seed, r) for r in run_ids]
    sig = np.array([d[0] for d in draws])
    jit = run_filter_batch(truth.b, p, sigma=sig, **common)
    return RobustnessResult(
        truth=np.stack([truth.x, truth.y], axis=-1),
        baseline=base.estimates,
        perturbed=pert.estimates,
        jittered=jit.estimates,
        sigma_assumed=sig,
        redraws=sum(d[1] for d in draws),
        failed=base.failed | pert.failed | jit.failed,
    )


def robustness_over_seeds(cfg: ExperimentConfig, seeds, **kwargs) -> dict:
    """Step-final reconstruction errors ``(len(seeds), 2)`` per series, one run per master seed."""
    errs = {name: [] for name in RobustnessResult.SERIES[1:]}
    for seed in seeds:
        one = replace(cfg, runs=1, master_seed=int(seed))
        r = robustness_study(one, **kwargs)
        for name in errs:
            errs[name].append(getattr(r, name)[0, -1] - r.truth[0, -1])
    return {name: np.array(v) for name, v in errs.items()}
