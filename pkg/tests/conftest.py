import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from ogchords.brake import natural_system
from ogchords.geometry import (RadialProfile, ball_boundary, ellipse_boundary,
                               euclidean_metric, radial_conformal_metric)

settings.register_profile(
    "numeric", deadline=None, max_examples=25,
    suppress_health_check=[HealthCheck.too_slow,
                           HealthCheck.filter_too_much])
settings.load_profile("numeric")


@pytest.fixture(scope="session")
def m2():
    return euclidean_metric(2)


@pytest.fixture(scope="session")
def m3():
    return euclidean_metric(3)


@pytest.fixture(scope="session")
def b2():
    return ball_boundary(2)


@pytest.fixture(scope="session")
def b3():
    return ball_boundary(3)


@pytest.fixture(scope="session")
def b_ellipse():
    return ellipse_boundary([2.0, 1.0])


@pytest.fixture(scope="session")
def profile_quadratic():
    # f(r) = 1 + r^2
    return RadialProfile(kind="polynomial", coeffs=(1.0, 0.0, 1.0))


@pytest.fixture(scope="session")
def m_radial(profile_quadratic):
    return radial_conformal_metric(2, profile_quadratic)


@pytest.fixture(scope="session")
def m_perturbed(profile_quadratic):
    return radial_conformal_metric(2, profile_quadratic, eps=0.05,
                                   direction=np.array([1.0, 0.0]))


def harmonic_system(dim):
    m = euclidean_metric(dim)
    V = lambda q: 0.5 * np.sum(np.asarray(q, float) ** 2, axis=-1)
    gV = lambda q: np.asarray(q, float)
    return natural_system(m, V, 0.5, grad_potential=gV, label="harmonic")


@pytest.fixture(scope="session")
def L_harmonic2():
    return harmonic_system(2)


@pytest.fixture(scope="session")
def L_harmonic3():
    return harmonic_system(3)


@pytest.fixture(scope="session")
def L_cubic2():
    eps = 0.01
    m = euclidean_metric(2)
    V = lambda q: (0.5 * np.sum(np.asarray(q, float) ** 2, axis=-1)
                   + eps * np.asarray(q, float)[..., 0] ** 3)

    def gV(q):
        q = np.asarray(q, dtype=float)
        out = q.copy()
        out[..., 0] += 3.0 * eps * q[..., 0] ** 2
        return out

    return natural_system(m, V, 0.5, grad_potential=gV, label="cubic")
