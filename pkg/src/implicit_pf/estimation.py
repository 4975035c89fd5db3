"""Estimating the motion variance from filtered trajectories.

If the assumed motion variance is right, successive displacement changes of a
filtered trajectory behave like independent draws and the discriminant

    D = ((sum u)^2 + (sum v)^2) / (sum u^2 + sum v^2),   u_j = dx^{j+1} - dx^j,

averages to one.  Too small an assumed variance makes the changes positively
correlated (D > 1), too large makes them anticorrelated (D < 1).  Scanning the
assumed/true ratio and locating the crossing of one recovers the variance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .azimuth import ModelParams, simulate_truth_batch
from .errors import FailureBudgetError, InvalidInputError, NoBracketError, UndefinedDiscriminantError
from .filter import run_filter_batch
from .forward import ForwardConfig
from .parallel import map_chunks
from .resampling import ResamplePolicy

TABLE3_RATIOS = (0.5, 0.6, 0.7, 0.8, 0.9, 1.0, 1.1, 1.2, 1.3, 1.4, 1.5, 2.0)
DEFAULT_WINDOW = 40
FAILURE_BUDGET = 0.01


@dataclass(frozen=True)
class DiscriminantInput:
    dx_seq: np.ndarray
    dy_seq: np.ndarray
    J: int = DEFAULT_WINDOW


@dataclass(frozen=True)
class SigmaScanRow:
    ratio: float
    mean_D: float
    se_D: float
    runs: int
    failures: int = 0


def discriminant_from_differences(u, v) -> float:
    """D for given displacement changes ``u`` (x) and ``v`` (y)."""
    u = np.asarray(u, dtype=float)
    v = np.asarray(v, dtype=float)
    den = np.sum(u * u) + np.sum(v * v)
    if den == 0.0:
        raise UndefinedDiscriminantError("all displacement changes are zero")
    d = (np.sum(u) ** 2 + np.sum(v) ** 2) / den
    n = max(u.size, v.size)
    assert -0.0 <= d <= n * (1 + 1e-12), f"D={d} outside [0, {n}]"
    return float(d)


def _window_differences(seq, J):
    seq = np.asarray(seq, dtype=float)
    if J < 3:
        raise InvalidInputError(f"window J must be >= 3, got {J}")
    if seq.shape[-1] < J + 1:
        raise InvalidInputError(f"need {J + 1} displacements for J={J}, got {seq.shape[-1]}")
    # 1-based dx^1..dx^{J+1}; changes dx^{j+1} - dx^j for j = 2..J
    return np.diff(seq[..., 1 : J + 1], axis=-1)


def discriminant_D(inp: DiscriminantInput) -> float:
    """D over the window ``j = 2..J`` of one displacement history.

    ``dx_seq[0]`` is the first (known) displacement ``dx^1``.
    """
    return discriminant_from_differences(_window_differences(inp.dx_seq, inp.J), _window_differences(inp.dy_seq, inp.J))


def discriminant_batch(dx_seqs, dy_seqs, J: int = DEFAULT_WINDOW) -> np.ndarray:
    """Vectorized ``discriminant_D`` over leading axes; undefined entries are NaN."""
    u = _window_differences(dx_seqs, J)
    v = _window_differences(dy_seqs, J)
    den = np.sum(u * u, axis=-1) + np.sum(v * v, axis=-1)
    num = np.sum(u, axis=-1) ** 2 + np.sum(v, axis=-1) ** 2
    with np.errstate(invalid="ignore", divide="ignore"):
        d = np.where(den > 0, num / den, np.nan)
    ok = np.isnan(d) | ((d >= 0) & (d <= u.shape[-1] * (1 + 1e-12)))
    assert ok.all(), "discriminant outside its Cauchy-Schwarz bound"
    return d


def scan_runs_D(ratio: float, run_ids, M: int, p: ModelParams, seed: int, J: int = DEFAULT_WINDOW,
                policy: ResamplePolicy = ResamplePolicy(), cfg: ForwardConfig = ForwardConfig(),
                all_particles: bool = False):
    """Per-run D for one assumed/true ratio; failed runs give NaN."""
    q = p.with_(n_steps=J + 1)
    truth = simulate_truth_batch(q, seed, run_ids)
    out = run_filter_batch(truth.b, q, M, policy, cfg, seed=seed, runs=run_ids, sigma=ratio * p.sigma, keep_history=True)
    hist = out.history  # (R, M, J+1, 4)
    if all_particles:
        d = np.nanmean(discriminant_batch(hist[..., 2], hist[..., 3], J), axis=1)
    else:
        d = discriminant_batch(hist[:, 0, :, 2], hist[:, 0, :, 3], J)
    return np.where(out.failed, np.nan, d)


def summarize_scan(ratio: float, d_values) -> SigmaScanRow:
    d_values = np.asarray(d_values, dtype=float)
    good = d_values[np.isfinite(d_values)]
    failures = int(d_values.size - good.size)
    if failures > FAILURE_BUDGET * d_values.size:
        raise FailureBudgetError(f"{failures} of {d_values.size} runs failed at ratio {ratio}")
    n = good.size
    mean = float(good.mean()) if n else math.nan
    se = float(good.std(ddof=1) / math.sqrt(n)) if n > 1 else math.nan
    return SigmaScanRow(float(ratio), mean, se, n, failures)


def sigma_scan(ratios, runs: int, M: int, p: ModelParams, seed: int, J: int = DEFAULT_WINDOW, workers: int = 1,
               chunk: int = 250, **kwargs) -> list[SigmaScanRow]:
    """Mean discriminant per assumed/true ratio over ``runs`` synthetic records.

    All ratios see the same truths and filter streams, so the scan curve is
    smooth in the ratio.
    """
    ratios = [float(r) for r in ratios]
    if any(not r > 0 for r in ratios):
        raise InvalidInputError("ratios must be positive")
    rows = []
    for ratio in ratios:
        d = map_chunks(scan_runs_D, runs, chunk, workers, ratio=ratio, M=M, p=p, seed=seed, J=J, **kwargs)
        rows.append(summarize_scan(ratio, np.concatenate(d)))
    return rows


def crossings(scan) -> list[float]:
    """Ratios where the piecewise-linear mean-D curve meets one, ascending."""
    rows = sorted(scan, key=lambda r: r.ratio)
    points = []
    for lo, hi in zip(rows, rows[1:]):
        g0, g1 = lo.mean_D - 1.0, hi.mean_D - 1.0
        if g0 * g1 > 0.0 or (g0 == 0.0 and g1 == 0.0):
            continue
        point = lo.ratio + g0 / (g0 - g1) * (hi.ratio - lo.ratio)
        if not points or point != points[-1]:
            points.append(point)
    if len(rows) == 1 and rows[0].mean_D == 1.0:
        points.append(rows[0].ratio)
    return points


def estimate_sigma(scan, sigma_base: float = 1.0) -> float:
    """Assumed variance at which the mean discriminant crosses one.

    Each pair of ratio-adjacent rows bracketing one gives a crossing by linear
    interpolation.  A noisy scan can cross several times; the median crossing
    is used.  The ratio is scaled by ``sigma_base``.
    """
    points = crossings(scan)
    if not points:
        raise NoBracketError("mean discriminant does not cross 1 within the scanned ratios")
    return float(np.median(points)) * sigma_base
