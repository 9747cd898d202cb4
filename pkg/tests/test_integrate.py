import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ogchords.geometry import RadialProfile, radial_conformal_metric
from ogchords.integrate import (integrate_fixed, rk4_step, segment_velocities,
                                stiff_step)

small_vec = st.lists(st.floats(-1.0, 1.0, allow_nan=False),
                     min_size=2, max_size=2)


def rotation_accel(x, v):
    # circular motion: a = -x, closed-form solution cos/sin
    return -np.asarray(x, dtype=float)


class TestRK4:
    def test_fourth_order_on_rotation(self):
        x0 = np.array([[1.0, 0.0]])
        v0 = np.array([[0.0, 1.0]])
        errs = []
        for steps in (16, 32):
            h = (np.pi / 2.0) / steps
            x, v = x0, v0
            for _ in range(steps):
                x, v = rk4_step(rotation_accel, x, v, h)
            errs.append(np.linalg.norm(x[0] - [0.0, 1.0]))
        order = np.log2(errs[0] / errs[1])
        assert order > 3.8

    def test_energy_drift_small(self):
        x = np.array([[1.0, 0.0]])
        v = np.array([[0.0, 1.0]])
        for _ in range(1000):
            x, v = rk4_step(rotation_accel, x, v, 1e-2)
        e = 0.5 * (np.sum(x * x) + np.sum(v * v))
        assert abs(e - 1.0) < 1e-9


class TestStiffStep:
    def test_matches_rk4_composition_on_smooth_field(self):
        x0 = np.array([[1.0, 0.0], [0.0, 1.0]])
        v0 = np.array([[0.0, 0.3], [0.2, 0.0]])
        xs, vs = stiff_step(rotation_accel, x0, v0, 0.01)
        xr, vr = rk4_step(rotation_accel, x0, v0, 0.01)
        # |a|/|v| ~ 3 here, well under the stiffness trigger at rate*h = 0.02
        assert np.allclose(xs, xr, atol=1e-12)
        assert np.allclose(vs, vr, atol=1e-12)

    def test_substeps_engage_on_stiff_field(self):
        calls = []

        def stiff_accel(x, v):
            calls.append(x.shape[0])
            return -1e4 * np.asarray(x, dtype=float)

        x0 = np.array([[1.0, 0.0]])
        v0 = np.array([[0.0, 1.0]])
        stiff_step(stiff_accel, x0, v0, 0.05)
        assert len(calls) > 8          # rate ~ 1e4 forces many substeps

    def test_work_is_bounded(self):
        calls = []

        def stiff_accel(x, v):
            calls.append(1)
            return -1e12 * np.asarray(x, dtype=float)

        x0 = np.array([[1.0, 0.0]])
        v0 = np.array([[0.0, 1.0]])
        stiff_step(stiff_accel, x0, v0, 0.05)
        assert len(calls) <= 5 * 256   # 4 rk4 stage calls + probe per substep

    @given(small_vec, small_vec)
    def test_per_row_budget_consumed(self, xr, vr):
        x0 = np.array([xr, [1.0, 0.0]])
        v0 = np.array([vr, [0.0, 1.0]])
        xs, _ = stiff_step(rotation_accel, x0, v0, 0.02)
        xr4, _ = rk4_step(rotation_accel, x0, v0, 0.02)
        assert np.allclose(xs, xr4, atol=1e-10)


class TestIntegrateFixed:
    def test_quarter_turn(self):
        steps = 1000
        x, v = integrate_fixed(rotation_accel, np.array([[1.0, 0.0]]),
                               np.array([[0.0, 1.0]]),
                               (np.pi / 2.0) / steps, steps)
        assert np.allclose(x[0], [0.0, 1.0], atol=1e-10)
        assert np.allclose(v[0], [-1.0, 0.0], atol=1e-10)

    def test_recording_grid(self):
        xs, vs = integrate_fixed(rotation_accel, np.array([[1.0, 0.0]]),
                                 np.array([[0.0, 1.0]]), 1e-2, 100,
                                 record_every=10)
        assert xs.shape == (11, 1, 2)
        assert np.allclose(xs[-1][0], [np.cos(1.0), np.sin(1.0)], atol=1e-9)
        assert np.allclose(vs[0][0], [0.0, 1.0])


class TestSegmentVelocities:
    def test_euclidean_straight_line(self, m2):
        n = 16
        a, b = np.array([-1.0, 0.0]), np.array([1.0, 0.0])
        s = (np.arange(n + 1) / n)[:, None]
        nodes = (1.0 - s) * a + s * b
        v, v_arr = segment_velocities(m2, nodes)
        # parameter on [0,1]: each segment covers dx in h = 1/n, so v = n dx
        assert np.allclose(v, [2.0, 0.0], atol=1e-10)
        assert np.allclose(v_arr, np.broadcast_to([2.0, 0.0], (n, 2)),
                           atol=1e-10)

    def test_conformal_bvp_residual(self):
        # geodesic BVP per segment on a strongly varying metric: the defect
        # of the returned velocities must be at solver accuracy
        prof = RadialProfile(kind="polynomial", coeffs=(1.0, 0.0, 1.0))
        m = radial_conformal_metric(2, prof)
        th = np.linspace(0.25, 1.1, 13)
        nodes = np.stack([0.9 * np.cos(th), 0.9 * np.sin(th)], axis=-1)
        v, v_arr = segment_velocities(m, nodes)
        h = 1.0 / (nodes.shape[0] - 1)
        x = nodes[:-1].copy()
        w = v.copy()
        sub = 4
        for _ in range(sub):
            x, w = stiff_step(lambda p, q: m.geodesic_accel(p, q), x, w,
                              h / sub)
        assert float(np.abs(x - nodes[1:]).max()) < 1e-9
