"""Counter-based random streams derived from one master seed.

Every Monte Carlo run owns one Philox stream per purpose, keyed by
``(master_seed, purpose, run)``.  A run is always simulated start to finish by a
single worker and consumes its stream in a fixed order (per step: forward
references, then smoothing references if enabled, then resampling uniforms),
so results do not depend on how runs are scheduled across workers.
"""

from __future__ import annotations

import numpy as np

PURPOSES = {
    "truth": 1,
    "filter": 2,
    "candidates": 3,
    "sigma_jitter": 4,
    "reference": 5,
    "selftest": 6,
}

SEED_MASK = (1 << 64) - 1


def run_generator(master_seed: int, purpose: str, run: int = 0) -> np.random.Generator:
    seq = np.random.SeedSequence(int(master_seed) & SEED_MASK, spawn_key=(PURPOSES[purpose], int(run)))
    return np.random.Generator(np.random.Philox(seq))


def uniforms_open_closed(rng: np.random.Generator, size) -> np.ndarray:
    """Uniform draws on (0, 1], the natural domain of the CDF selection rule."""
    return 1.0 - rng.random(size)
