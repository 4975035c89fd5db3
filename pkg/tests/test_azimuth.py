from __future__ import annotations

import math
from pathlib import Path

import numpy as np
import pytest

from implicit_pf import csvio
from implicit_pf.azimuth import (
    ModelParams,
    ShipState,
    azimuth,
    azimuth_linearization,
    generate_truth,
    linearize,
    observe,
    simulate_truth_batch,
    truth_as_batch,
    truth_step,
)
from implicit_pf.errors import DegeneratePositionError, InvalidInputError

GOLDEN = Path(__file__).parent / "data" / "truth_seed1.csv"


class TestParams:
    def test_defaults(self):
        p = ModelParams()
        assert (p.sigma, p.s, p.x0, p.y0, p.dx1, p.dy1, p.n_steps) == (1e-6, 25e-6, 0.01, 20.0, 0.002, -0.06, 160)

    @pytest.mark.parametrize("kw", [dict(sigma=-1.0), dict(s=math.nan), dict(n_steps=0), dict(n_steps=2.5)])
    def test_invalid(self, kw):
        with pytest.raises(InvalidInputError):
            ModelParams(**kw)

    def test_origin_state_rejected(self):
        with pytest.raises(DegeneratePositionError):
            ShipState(0.0, 0.0, 1.0, 1.0)


class TestTruthStep:
    def test_zero_noise_repeats_displacement(self):
        st = ShipState(0.01, 20.0, 0.002, -0.06)
        nxt = truth_step(st, (0.0, 0.0), ModelParams())
        assert (nxt.x, nxt.dx, nxt.dy) == (0.01 + 0.002, 0.002, -0.06)

    def test_worked_example(self):
        nxt = truth_step(ShipState(0.01, 20.0, 0.002, -0.06), (1.0, 0.0), ModelParams())
        assert nxt.dx == pytest.approx(0.003, abs=1e-15)
        assert nxt.x == pytest.approx(0.013, abs=1e-15)

    def test_two_quiet_steps(self):
        p = ModelParams()
        st = p.initial_state()
        for _ in range(2):
            st = truth_step(st, (0.0, 0.0), p)
        assert st.x == pytest.approx(p.x0 + 2 * p.dx1, abs=1e-15)

    def test_reaching_origin_raises(self):
        with pytest.raises(DegeneratePositionError):
            truth_step(ShipState(1.0, 1.0, 0.0, 0.0), (-1.0, -1.0), ModelParams(sigma=1.0))


class TestAzimuth:
    @pytest.mark.parametrize(
        "x, y, expected",
        [(1.0, 1.0, math.pi / 4), (3.0, 4.0, math.atan(4 / 3)), (0.01, 20.0, math.atan(2000.0))],
    )
    def test_values(self, x, y, expected):
        assert azimuth(x, y) == pytest.approx(expected, rel=1e-15)

    def test_known_digits(self):
        assert azimuth(3, 4) == pytest.approx(0.9272952180016122, abs=1e-15)
        assert azimuth(0.01, 20) == pytest.approx(1.5702963268, abs=1e-10)

    def test_origin(self):
        with pytest.raises(DegeneratePositionError):
            azimuth(0.0, 0.0)
        with pytest.raises(DegeneratePositionError):
            linearize(0.0, 0.0)

    def test_continuous_across_y_axis(self):
        assert azimuth(-1e-9, 20.0) - azimuth(1e-9, 20.0) == pytest.approx(1e-10, rel=1e-6)


class TestLinearize:
    def test_worked_example(self):
        lin = linearize(3.0, 4.0)
        assert (lin.f_x, lin.f_y, lin.r) == pytest.approx((-0.16, 0.12, 0.2), rel=1e-14)

    def test_on_axis(self):
        lin = linearize(1.0, 0.0)
        assert lin.f_x == 0.0 and lin.f_y == 1.0

    def test_default_start(self):
        lin = linearize(0.01, 20.0)
        assert lin.r == pytest.approx(1 / math.sqrt(400.0001), rel=1e-15)
        assert lin.f_x == pytest.approx(-20 / 400.0001, rel=1e-15)

    def test_gradient_tangent_and_norm(self):
        rng = np.random.default_rng(0)
        for x, y in rng.uniform(-10, 10, (200, 2)):
            lin = linearize(x, y)
            assert abs(lin.f_x * x + lin.f_y * y) <= 1e-12 * (abs(lin.f_x * x) + abs(lin.f_y * y))
            assert math.hypot(lin.f_x, lin.f_y) == pytest.approx(lin.r, rel=1e-14)

    def test_finite_differences(self):
        # x > 0 keeps every stencil clear of the bearing's branch cut
        rng = np.random.default_rng(1)
        pts = np.column_stack([rng.uniform(0.1, 20, 1000), rng.uniform(-20, 20, 1000)])
        for x, y in pts:
            h = 1e-6 * math.hypot(x, y)
            fx = (azimuth(x + h, y) - azimuth(x - h, y)) / (2 * h)
            fy = (azimuth(x, y + h) - azimuth(x, y - h)) / (2 * h)
            lin = linearize(x, y)
            scale = lin.r
            assert abs(fx - lin.f_x) < 1e-6 * scale
            assert abs(fy - lin.f_y) < 1e-6 * scale

    def test_homogeneity(self):
        rng = np.random.default_rng(2)
        for x, y, dx, dy, lam in rng.uniform(0.5, 3, (50, 5)):
            a = linearize(x, y)
            b = linearize(lam * x, lam * y)
            assert b.f_x * lam * dx + b.f_y * lam * dy == pytest.approx(a.f_x * dx + a.f_y * dy, rel=1e-12)

    def test_vectorized_matches_scalar(self):
        X = np.array([3.0, 0.01, -2.0])
        Y = np.array([4.0, 20.0, 0.5])
        f, fx, fy = azimuth_linearization(X, Y)
        for k in range(3):
            lin = linearize(X[k], Y[k])
            np.testing.assert_allclose([f[k], fx[k], fy[k]], [lin.f, lin.f_x, lin.f_y], rtol=1e-15)

    def test_vectorized_origin_is_nan(self):
        _, fx, fy = azimuth_linearization(np.array([0.0]), np.array([0.0]))
        assert np.isnan(fx[0]) and np.isnan(fy[0])


class TestObserve:
    @pytest.mark.parametrize("noise, shift", [(0.0, 0.0), (1.0, 0.005), (-2.0, -0.01)])
    def test_noise_scaling(self, noise, shift):
        st = ShipState(0.01, 20.0, 0.0, 0.0)
        ob = observe(st, noise, ModelParams(), step=3)
        assert ob.b == pytest.approx(math.atan(2000.0) + shift, abs=1e-15)
        assert ob.step == 3


class TestGenerateTruth:
    def test_noiseless_line(self):
        p = ModelParams(sigma=0.0, s=0.0, n_steps=20)
        states, obs = generate_truth(p, seed=5)
        for n, (st, ob) in enumerate(zip(states, obs), start=1):
            assert st.x == pytest.approx(p.x0 + n * p.dx1, abs=1e-12)
            assert ob.b == azimuth(st.x, st.y)

    def test_deterministic(self):
        a = generate_truth(ModelParams(), seed=9)
        b = generate_truth(ModelParams(), seed=9)
        assert a == b
        assert generate_truth(ModelParams(), seed=10) != a

    def test_golden_file(self):
        states, obs = generate_truth(ModelParams(), seed=1)
        rows = [(o.step, s.x, s.y, s.dx, s.dy, o.b) for s, o in zip(states, obs)]
        assert csvio.dumps(csvio.SCHEMAS["truth"], rows) == GOLDEN.read_text()

    def test_batch_matches_scalar_bitwise(self):
        p = ModelParams(n_steps=60)
        batch = simulate_truth_batch(p, seed=3, runs=[0, 4, 7])
        for row, run in enumerate([0, 4, 7]):
            ref = truth_as_batch(*generate_truth(p, seed=3, run=run))
            for name in ("x", "y", "dx", "dy", "b"):
                np.testing.assert_array_equal(getattr(batch, name)[row], getattr(ref, name)[0])

    def test_shorter_record_is_prefix(self):
        long = simulate_truth_batch(ModelParams(n_steps=100), 2, [0])
        short = simulate_truth_batch(ModelParams(n_steps=41), 2, [0])
        np.testing.assert_array_equal(long.x[:, :41], short.x)
        np.testing.assert_array_equal(long.b[:, :41], short.b)

    def test_increment_statistics(self):
        # dx^160 = dx1 + sqrt(sigma) * (sum of 159 unit normals)
        p = ModelParams()
        t = simulate_truth_batch(p, seed=11, runs=range(10_000))
        d = t.dx[:, -1]
        n = d.size
        assert abs(d.mean() - p.dx1) < 3 * math.sqrt(159 * p.sigma / n)
        assert abs(d.var() - 159 * p.sigma) < 3 * 159 * p.sigma * math.sqrt(2 / n)
