"""Ship test bed: random walk with drifting increments, observed by azimuth.

Each displacement is Gaussian with variance ``sigma`` around the previous
displacement; an observer at the origin records the bearing of the ship with
Gaussian noise of variance ``s``.  The first displacement ``(dx1, dy1)`` is
applied deterministically and is the mean of the second one.

The bearing is computed with the two-argument arctangent.  It agrees with
``arctan(y / x)`` for ``x > 0`` and stays continuous when the ship drifts
across the y axis, which it does in roughly half of all 160-step runs.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .errors import DegeneratePositionError, InvalidInputError
from .seeding import run_generator


@dataclass(frozen=True)
class ModelParams:
    sigma: float = 1e-6
    s: float = 25e-6
    x0: float = 0.01
    y0: float = 20.0
    dx1: float = 0.002
    dy1: float = -0.06
    n_steps: int = 160

    def __post_init__(self):
        # zero variances are allowed: they give the noiseless test bed
        if not (math.isfinite(self.sigma) and self.sigma >= 0):
            raise InvalidInputError(f"sigma must be finite and >= 0, got {self.sigma!r}")
        if not (math.isfinite(self.s) and self.s >= 0):
            raise InvalidInputError(f"s must be finite and >= 0, got {self.s!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise InvalidInputError(f"n_steps must be an integer >= 1, got {self.n_steps!r}")

    def with_(self, **changes) -> "ModelParams":
        return replace(self, **changes)

    def initial_state(self) -> "ShipState":
        return ShipState(self.x0, self.y0, self.dx1, self.dy1)


@dataclass(frozen=True)
class ShipState:
    x: float
    y: float
    dx: float
    dy: float

    def __post_init__(self):
        if not all(map(math.isfinite, (self.x, self.y, self.dx, self.dy))):
            raise InvalidInputError(f"non-finite ship state {self}")
        if self.x == 0.0 and self.y == 0.0:
            raise DegeneratePositionError("ship state at the observer's position (0, 0)")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.dx, self.dy])


@dataclass(frozen=True)
class Observation:
    b: float
    step: int


@dataclass(frozen=True)
class ObsLinearization:
    f: float
    f_x: float
    f_y: float
    r: float


def azimuth(x: float, y: float) -> float:
    if x == 0.0 and y == 0.0:
        raise DegeneratePositionError("azimuth undefined at the origin")
    return math.atan2(y, x)


def linearize(x: float, y: float) -> ObsLinearization:
    """Bearing and its gradient at ``(x, y)``."""
    rho2 = x * x + y * y
    if rho2 == 0.0:
        raise DegeneratePositionError("azimuth undefined at the origin")
    return ObsLinearization(math.atan2(y, x), -y / rho2, x / rho2, 1.0 / math.sqrt(rho2))


def azimuth_linearization(X, Y):
    """Vectorized ``(f, f_x, f_y)`` of the bearing; zero radius yields NaN."""
    rho2 = X * X + Y * Y
    with np.errstate(divide="ignore", invalid="ignore"):
        inv = np.where(rho2 > 0, 1.0 / rho2, np.nan)
    return np.arctan2(Y, X), -Y * inv, X * inv


def truth_step(state: ShipState, noise, p: ModelParams) -> ShipState:
    """Advance the true ship by one step with unit-normal ``noise = (n1, n2)``."""
    sd = math.sqrt(p.sigma)
    dx = state.dx + sd * noise[0]
    dy = state.dy + sd * noise[1]
    x, y = state.x + dx, state.y + dy
    if x == 0.0 and y == 0.0:
        raise DegeneratePositionError("truth step reached the origin")
    return ShipState(x, y, dx, dy)


def observe(state: ShipState, noise: float, p: ModelParams, step: int = 0) -> Observation:
    return Observation(azimuth(state.x, state.y) + math.sqrt(p.s) * noise, step)


def truth_draws(rng: np.random.Generator, n_steps: int):
    """Unit-normal draws behind one truth: ``(n_steps - 1, 2)`` motion, ``n_steps`` observation.

    Draws are taken three per step, so a shorter record is an exact prefix of
    a longer one from the same stream.
    """
    z = rng.standard_normal((n_steps, 3))
    return z[1:, :2], z[:, 2]


def generate_truth(p: ModelParams, seed: int, run: int = 0):
    """One synthetic record: ``n_steps`` states (steps 1..n) and their bearings."""
    motion, obs_noise = truth_draws(run_generator(seed, "truth", run), p.n_steps)
    state = truth_step(p.initial_state(), (0.0, 0.0), p)
    states = [state]
    for k in range(p.n_steps - 1):
        state = truth_step(state, motion[k], p)
        states.append(state)
    observations = [observe(st, obs_noise[k], p, k + 1) for k, st in enumerate(states)]
    return states, observations


@dataclass
class TruthBatch:
    """Truth for several runs at once; arrays are ``(runs, n_steps)``."""

    x: np.ndarray
    y: np.ndarray
    dx: np.ndarray
    dy: np.ndarray
    b: np.ndarray

    @property
    def runs(self) -> int:
        return self.x.shape[0]


def integrate_truth(p: ModelParams, motion, obs_noise, start=None) -> TruthBatch:
    """Truth paths from unit-normal draws ``motion (R, n-1, 2)`` and ``obs_noise (R, n)``.

    Accumulates left to right exactly like repeated ``truth_step`` calls.
    """
    motion = np.asarray(motion, dtype=float)
    obs_noise = np.asarray(obs_noise, dtype=float)
    R, n = obs_noise.shape
    if start is None:
        start = (p.x0, p.y0, p.dx1, p.dy1)
    sd = math.sqrt(p.sigma)
    comps = []
    for k, (origin, d1) in enumerate(((start[0], start[2]), (start[1], start[3]))):
        incr = np.empty((R, n))
        incr[:, 0] = d1 + 0.0
        incr[:, 1:] = sd * motion[:, :, k]
        d = np.cumsum(incr, axis=1)
        pos = np.cumsum(np.concatenate([np.full((R, 1), origin), d], axis=1), axis=1)[:, 1:]
        comps.append((pos, d))
    (x, dx), (y, dy) = comps
    if np.any((x == 0.0) & (y == 0.0)):
        raise DegeneratePositionError("truth reached the origin")
    b = np.arctan2(y, x) + math.sqrt(p.s) * obs_noise
    return TruthBatch(x, y, dx, dy, b)


def simulate_truth_batch(p: ModelParams, seed: int, runs, purpose: str = "truth") -> TruthBatch:
    """Vectorized ``generate_truth`` for the given run indices.

    Uses the same per-run streams as the scalar version; each row is
    bit-identical to ``generate_truth``.
    """
    runs = list(runs)
    n = p.n_steps
    motion = np.empty((len(runs), n - 1, 2))
    obs_noise = np.empty((len(runs), n))
    for i, r in enumerate(runs):
        motion[i], obs_noise[i] = truth_draws(run_generator(seed, purpose, r), n)
    return integrate_truth(p, motion, obs_noise)


def truth_as_batch(states, observations) -> TruthBatch:
    arr = np.array([s.as_array() for s in states])
    b = np.array([o.b for o in observations])
    return TruthBatch(arr[None, :, 0], arr[None, :, 1], arr[None, :, 2], arr[None, :, 3], b[None, :])
