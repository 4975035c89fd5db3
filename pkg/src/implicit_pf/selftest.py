"""Quick invariant checks on the Gaussian algebra and the bridge sampler."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .bridge import BridgeSpec, bridge_iterate, quadratic_form_residual, step_params, subdivide_sample, zero_drift
from .gaussian import merge_arrays
from .seeding import run_generator


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str


def _product_identity(rng, n=10_000) -> Check:
    a1, a2 = rng.normal(0, 3, (2, n))
    v1, v2 = np.exp(rng.normal(0, 1, (2, n)))
    x = rng.normal(0, 3, n)
    a, v, phase = merge_arrays(a1, v1, a2, v2)
    lhs = -((x - a1) ** 2) / (2 * v1) - (x - a2) ** 2 / (2 * v2)
    rhs = -((x - a) ** 2) / (2 * v) - phase
    err = float(np.max(np.abs(lhs - rhs) / np.maximum(1.0, np.abs(lhs))))
    return Check("gaussian product identity", err < 1e-10, f"max rel err {err:.2e}")


def _merge_symmetry(rng, n=1000) -> Check:
    a1, a2 = rng.normal(0, 3, (2, n))
    v1, v2 = np.exp(rng.normal(0, 1, (2, n)))
    m1 = np.stack(merge_arrays(a1, v1, a2, v2))
    m2 = np.stack(merge_arrays(a2, v2, a1, v1))
    err = float(np.max(np.abs(m1 - m2)))
    bounded = bool(np.all(m1[1] <= np.minimum(v1, v2)) and np.all(m1[2] >= 0))
    return Check("gaussian merge symmetry and bounds", err < 1e-12 and bounded, f"max asym {err:.2e}")


def _bridge_identity(rng) -> Check:
    drifts = {
        "zero": (zero_drift, zero_drift),
        "linear": (lambda x, t: -x, lambda x, t: -np.ones_like(x)),
        "sine": (lambda x, t: np.sin(x), lambda x, t: np.cos(x)),
    }
    worst = 0.0
    for f, fp in drifts.values():
        spec = BridgeSpec(f, fp, 1.0, levels=4, x_start=0.0, x_end=1.0)
        for _ in range(20):
            xi = rng.standard_normal(spec.n_steps - 1)
            worst = max(worst, quadratic_form_residual(spec, bridge_iterate(spec, xi), xi))
    return Check("bridge quadratic-form identity", worst < 1e-8, f"max residual {worst:.2e}")


def _bridge_midpoint(rng, n=20_000) -> Check:
    spec = BridgeSpec(zero_drift, zero_drift, 1.0, levels=3, x_end=1.0)
    # zero drift: one pass of the construction is already the fixed point
    params = step_params(np.linspace(0.0, 1.0, spec.n_steps + 1), spec)
    mids = subdivide_sample(spec, params, rng.standard_normal((n, spec.n_steps - 1)))[:, 3]
    z_mean = abs(mids.mean() - 0.5) / np.sqrt(0.25 / n)
    z_var = abs(mids.var() - 0.25) / (0.25 * np.sqrt(2.0 / n))
    return Check("bridge midpoint law", bool(z_mean < 4 and z_var < 4), f"z(mean)={z_mean:.2f} z(var)={z_var:.2f}")


def run_selftest(seed: int = 0) -> list[Check]:
    rng = run_generator(seed, "selftest", 0)
    return [_product_identity(rng), _merge_symmetry(rng), _bridge_identity(rng), _bridge_midpoint(rng)]
