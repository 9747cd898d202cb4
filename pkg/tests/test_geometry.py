import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ogchords.geometry import (DEFAULT_DELTA0, GeometryError, RadialProfile,
                               ball_boundary, ellipse_boundary, estimate_K0,
                               euclidean_metric, grad_phi_norm, hessian_phi,
                               radial_conformal_metric, retract_to_boundary,
                               unit_normal, validate_band)

unit_angle = st.floats(0.0, 2.0 * np.pi, allow_nan=False)
band_radius = st.floats(0.81, 1.19, allow_nan=False)


def on_circle(theta, r=1.0):
    return r * np.array([np.cos(theta), np.sin(theta)])


class TestMetricField:
    def test_euclidean_matrices(self, m2):
        pts = np.array([[0.3, -0.2], [0.0, 0.0]])
        assert np.allclose(m2.at(pts), np.eye(2))
        assert np.allclose(m2.geodesic_accel(pts, pts), 0.0)

    def test_conformal_factor_values(self, m_radial):
        # f(r) = 1 + r^2: factor 1 at the origin, 2 on the unit circle
        assert np.isclose(m_radial.factor(np.zeros((1, 2)))[0], 1.0)
        p = np.array([[0.6, 0.8]])
        assert np.isclose(m_radial.factor(p)[0], 2.0)
        assert np.allclose(m_radial.at(p)[0], 4.0 * np.eye(2))

    def test_conformal_inner_scales_by_f_squared(self, m_radial):
        p = np.array([[0.6, 0.8]])
        v = np.array([[1.0, -1.0]])
        assert np.isclose(m_radial.inner(p, v, v)[0], 4.0 * 2.0)

    def test_grad_log_factor_closed_form(self, m_radial):
        # grad log f = f'(r)/f(r) x/r = 2 x / (1 + r^2)
        p = np.array([[0.5, 0.0], [0.3, -0.4]])
        r2 = np.sum(p * p, axis=-1)
        expect = 2.0 * p / (1.0 + r2)[:, None]
        assert np.allclose(m_radial.grad_log_factor(p), expect)

    def test_geodesic_accel_matches_christoffel_contraction(self, m_radial):
        p = np.array([[0.4, 0.1]])
        v = np.array([[0.7, -0.2]])
        gam = m_radial.christoffel_at(p)
        expect = -np.einsum("skij,si,sj->sk", gam, v, v)
        assert np.allclose(m_radial.geodesic_accel(p, v), expect)

    def test_dg_matches_finite_differences(self, m_radial):
        p = np.array([[0.35, -0.15]])
        dg = m_radial.dg(p)[0]
        h = 1e-6
        for l in range(2):
            e = np.zeros(2)
            e[l] = h
            fd = (m_radial.at(p + e)[0] - m_radial.at(p - e)[0]) / (2.0 * h)
            assert np.allclose(dg[l], fd, atol=1e-6)

    def test_perturbed_factor_tilt(self, m_perturbed):
        # factor = (1 + r^2)(1 + 0.05 x_1)
        p = np.array([[0.5, 0.0], [-0.5, 0.0]])
        vals = m_perturbed.factor(p)
        assert np.isclose(vals[0], 1.25 * 1.025)
        assert np.isclose(vals[1], 1.25 * 0.975)
        assert m_perturbed.params["family"] == "perturbed_radial"

    def test_dim_guard(self):
        with pytest.raises(GeometryError):
            euclidean_metric(1)


class TestRadialProfile:
    def test_polynomial_value(self):
        prof = RadialProfile(kind="polynomial", coeffs=(1.0, 0.0, 1.0))
        r = np.array([0.0, 0.5, 1.0])
        assert np.allclose(prof.value(r), [1.0, 1.25, 2.0])

    def test_dlog_over_r_is_smooth_at_zero(self):
        prof = RadialProfile(kind="polynomial", coeffs=(1.0, 0.0, 1.0))
        # f'/(r f) = 2 / (1 + r^2), finite at r = 0
        assert np.isclose(prof.dlog_over_r(np.array([0.0]))[0], 2.0)

    def test_exp_profile(self):
        prof = RadialProfile(kind="exp_half_square")
        r = np.array([0.0, 1.0])
        assert np.allclose(prof.value(r), [1.0, np.exp(0.5)])
        assert np.allclose(prof.dlog_over_r(r), 1.0)

    def test_unknown_kind_rejected(self):
        with pytest.raises(GeometryError):
            RadialProfile(kind="rational", coeffs=(1.0,))


class TestBoundaries:
    def test_ball_phi_is_signed_distance(self, b2):
        assert np.isclose(b2.phi(np.array([2.0, 0.0])), 1.0)
        assert np.isclose(b2.phi(np.array([0.5, 0.0])), -0.5)
        assert b2.delta0 == DEFAULT_DELTA0

    def test_ball_radius_constant(self, b2):
        dirs = np.array([[1.0, 0.0], [0.0, -1.0]])
        assert np.allclose(b2.radius(dirs), 1.0)

    def test_ellipse_radius_hits_axes(self, b_ellipse):
        assert np.isclose(b_ellipse.radius(np.array([[1.0, 0.0]]))[0], 2.0)
        assert np.isclose(b_ellipse.radius(np.array([[0.0, 1.0]]))[0], 1.0)

    def test_ellipse_phi_zero_on_boundary(self, b_ellipse):
        th = np.linspace(0.0, 2.0 * np.pi, 17)
        pts = np.stack([2.0 * np.cos(th), np.sin(th)], axis=-1)
        assert np.allclose(b_ellipse.phi(pts), 0.0, atol=1e-12)

    def test_unit_normal_is_radial_and_g_unit(self, b2, m_radial):
        p = on_circle(0.9)
        nu = unit_normal(b2, m_radial, p[None, :])[0]
        assert abs(nu[0] * p[1] - nu[1] * p[0]) < 1e-12
        assert np.isclose(m_radial.inner(p[None, :], nu[None, :],
                                         nu[None, :])[0], 1.0)
        # conformal normal is the euclidean one shrunk by 1/f = 1/2
        assert np.isclose(np.linalg.norm(nu), 0.5)

    def test_unit_normal_outside_band_rejected(self, b2, m2):
        with pytest.raises(GeometryError):
            unit_normal(b2, m2, np.array([[3.0, 0.0]]))

    def test_grad_phi_norm_euclidean_ball(self, b2, m2):
        pts = np.array([[0.9, 0.0], [0.0, 1.1]])
        assert np.allclose(grad_phi_norm(b2, m2, pts), 1.0)

    def test_hessian_phi_sphere_curvature(self, b2, m2):
        # second differential of |x| - 1 at distance r has eigenvalues
        # {0 (radial), 1/r (tangential)}
        p = np.array([[1.0, 0.0]])
        h = hessian_phi(b2, m2, p)[0]
        assert np.allclose(h, np.array([[0.0, 0.0], [0.0, 1.0]]), atol=1e-10)

    @given(unit_angle, band_radius)
    def test_retract_lands_on_boundary(self, theta, r):
        b = ball_boundary(2)
        q = retract_to_boundary(b, on_circle(theta, r))
        assert abs(float(b.phi(q))) < 1e-10

    @given(unit_angle)
    def test_retract_fixes_boundary_points(self, theta):
        b = ball_boundary(2)
        p = on_circle(theta)
        assert np.allclose(retract_to_boundary(b, p), p, atol=1e-12)

    @given(unit_angle, st.floats(0.905, 1.095, allow_nan=False))
    def test_ellipse_retract_idempotent(self, theta, r):
        # phi is quadratic in the scaling, so the band is narrower than
        # for the signed-distance ball
        b = ellipse_boundary([2.0, 1.0])
        p = r * np.array([2.0 * np.cos(theta), np.sin(theta)])
        q1 = retract_to_boundary(b, p)
        q2 = retract_to_boundary(b, q1)
        assert np.allclose(q1, q2, atol=1e-10)


class TestDomainConstants:
    def test_K0_euclid_disk(self, b2, m2):
        # |grad phi|_g = 1 everywhere, 5% safety inflation on top
        assert np.isclose(estimate_K0(b2, m2), 1.05)

    def test_K0_conformal_disk(self, b2, m_radial):
        # |grad phi|_g = 1/f, largest at the origin side of the band: f >= 1
        k0 = estimate_K0(b2, m_radial)
        assert 1.0 < k0 <= 1.05 * 1.0 + 1e-9

    def test_band_validates_on_shipped_domains(self, b2, b_ellipse, m2):
        assert validate_band(b2, m2) > 0.0
        assert validate_band(b_ellipse, m2) > 0.0
