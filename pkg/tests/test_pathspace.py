import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ogchords.geometry import GeometryError, ball_boundary
from ogchords.pathspace import (ConsistencyError, DiscretePath, TangentField,
                                chord, dist_inf, dist_star, energy,
                                energy_gradient, estimate_M0, in_path_space,
                                norm_star, pair, reverse, reverse_field,
                                segment_energies, strip_bound_check)


def diameter_path(n=32):
    return chord(np.array([-1.0, 0.0]), np.array([1.0, 0.0]), n)


node_count = st.integers(4, 40)
angles = st.tuples(st.floats(0.0, 2 * np.pi), st.floats(0.0, 2 * np.pi))


def boundary_pair(th):
    a = np.array([np.cos(th[0]), np.sin(th[0])])
    b = np.array([np.cos(th[1]), np.sin(th[1])])
    return a, b


class TestDiscretePath:
    def test_nodes_read_only(self):
        x = diameter_path()
        with pytest.raises(ValueError):
            x.nodes[0, 0] = 5.0

    def test_shape_guard(self):
        with pytest.raises(GeometryError):
            DiscretePath(np.zeros(5))

    def test_params_grid(self):
        x = diameter_path(4)
        assert np.allclose(x.params(), [0.0, 0.25, 0.5, 0.75, 1.0])
        assert x.n == 4 and x.dim == 2


class TestEnergy:
    def test_diameter_energy_is_length_squared(self, m2):
        # F = int |xdot|^2 ds with s in [0,1]: the unit-disk diameter gives 4
        assert np.isclose(energy(m2, diameter_path()), 4.0)

    def test_energy_grid_independent_for_chords(self, m2):
        vals = [energy(m2, diameter_path(n)) for n in (8, 64, 256)]
        assert np.allclose(vals, 4.0)

    def test_segment_energies_sum(self, m_radial):
        x = diameter_path(16)
        seg = segment_energies(m_radial, x)
        assert seg.shape == (16,)
        assert np.isclose(float(np.sum(seg)), energy(m_radial, x))

    @given(node_count, angles)
    def test_reversal_invariance(self, n, th):
        from ogchords.geometry import euclidean_metric
        a, b = boundary_pair(th)
        x = chord(a, b, n)
        m = euclidean_metric(2)
        assert np.isclose(energy(m, x), energy(m, reverse(x)), rtol=0.0,
                          atol=1e-12)


class TestGradient:
    def test_matches_finite_differences_euclidean(self, m2):
        rng = np.random.default_rng(3)
        x = DiscretePath(diameter_path(12).nodes
                         + 0.02 * rng.standard_normal((13, 2)))
        grad = energy_gradient(m2, x)
        v = TangentField(rng.standard_normal((13, 2)))
        t = 1e-7
        plus = energy(m2, DiscretePath(x.nodes + t * v.vectors))
        minus = energy(m2, DiscretePath(x.nodes - t * v.vectors))
        fd = (plus - minus) / (2.0 * t)
        assert np.isclose(pair(grad, v), fd, rtol=1e-6, atol=1e-8)

    def test_matches_finite_differences_conformal(self, m_radial):
        rng = np.random.default_rng(4)
        x = DiscretePath(0.7 * diameter_path(10).nodes
                         + 0.05 * rng.standard_normal((11, 2)))
        grad = energy_gradient(m_radial, x)
        v = TangentField(rng.standard_normal((11, 2)))
        t = 1e-7
        plus = energy(m_radial, DiscretePath(x.nodes + t * v.vectors))
        minus = energy(m_radial, DiscretePath(x.nodes - t * v.vectors))
        fd = (plus - minus) / (2.0 * t)
        assert np.isclose(pair(grad, v), fd, rtol=1e-6, atol=1e-8)

    def test_gradient_reversal_equivariance(self, m_radial):
        rng = np.random.default_rng(5)
        x = DiscretePath(0.6 * diameter_path(14).nodes
                         + 0.03 * rng.standard_normal((15, 2)))
        g1 = energy_gradient(m_radial, reverse(x)).vectors
        g2 = reverse_field(energy_gradient(m_radial, x)).vectors
        assert np.allclose(g1, g2, atol=1e-12)


class TestDistances:
    def test_dist_star_zero_iff_equal(self):
        x = diameter_path(8)
        assert dist_star(x, x) == 0.0
        y = DiscretePath(x.nodes + 1e-3)
        assert dist_star(x, y) > 0.0

    def test_dist_star_dominates_endpoint_gap(self):
        x = diameter_path(8)
        y = DiscretePath(x.nodes + np.array([0.01, 0.0]))
        assert dist_star(x, y) >= 0.01 - 1e-15

    def test_dist_inf(self):
        x = diameter_path(8)
        y = DiscretePath(x.nodes + np.array([0.0, 0.5]))
        assert np.isclose(dist_inf(x, y), 0.5)

    def test_norm_star_of_constant_field_uses_endpoints(self):
        v = TangentField(np.ones((9, 2)))
        assert np.isclose(norm_star(v), np.sqrt(2.0))


class TestChord:
    def test_ball_chord_is_linear(self):
        x = chord(np.array([-1.0, 0.0]), np.array([0.0, 1.0]), 4,
                  ball_boundary(2))
        assert np.allclose(x.nodes[2], [-0.5, 0.5])

    def test_ellipse_chord_stays_inside(self):
        from ogchords.geometry import ellipse_boundary
        b = ellipse_boundary([2.0, 1.0])
        x = chord(np.array([2.0, 0.0]), np.array([-2.0, 0.0]), 32, b)
        phis = b.phi(x.nodes)
        assert np.all(phis <= 1e-12)
        assert np.isclose(float(b.phi(x.nodes[0])), 0.0, atol=1e-12)

    @given(node_count, angles)
    def test_chord_in_path_space(self, n, th):
        b = ball_boundary(2)
        a, c = boundary_pair(th)
        assert in_path_space(b, chord(a, c, n, b))


class TestM0:
    def test_euclid_disk_value(self, m2, b2):
        # widest chord is the diameter: F = 4, inflated by 5%
        m0 = estimate_M0(m2, b2)
        assert np.isclose(m0, np.sqrt(1.05 * 4.0))

    def test_inequality_guard_raises_on_tiny_domain(self, m2):
        b = ball_boundary(2, radius=0.01)
        with pytest.raises(ConsistencyError):
            estimate_M0(m2, b)


class TestStripBound:
    def test_diameter_satisfies_band_bound(self, m2, b2):
        x = diameter_path(64)
        rep = strip_bound_check(b2, m2, x, 0, 64)
        assert rep.ok
        assert rep.max_abs_phi <= rep.bound

    def test_short_boundary_arc_stays_in_strip(self, m2, b2):
        # both ends on the boundary with small energy: the small-strip
        # consequence applies and holds
        th = np.linspace(0.0, 0.12, 33)
        x = DiscretePath(np.stack([np.cos(th), np.sin(th)], axis=-1))
        rep = strip_bound_check(b2, m2, x, 0, 32)
        assert rep.corollary_applicable
        assert rep.corollary_ok

    def test_left_endpoint_must_touch_boundary(self, m2, b2):
        x = DiscretePath(0.5 * diameter_path(8).nodes)
        with pytest.raises(GeometryError):
            strip_bound_check(b2, m2, x, 0, 8)
