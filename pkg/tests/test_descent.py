import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ogchords import pathspace
from ogchords.descent import (ConeSpec, FlowConfig, ToleranceSpec,
                              default_cone, descent_direction,
                              feasibility_project, flow, project_to_cone,
                              verify_critical)
from ogchords.geometry import GeometryError, ball_boundary, unit_normal
from ogchords.pathspace import DiscretePath, TangentField, chord, reverse


def bent_chord(n=48, amp=0.3):
    """Diameter chord bowed upward: a feasible non-critical start."""
    s = np.arange(n + 1) / n
    x = -1.0 + 2.0 * s
    y = amp * np.sin(np.pi * s)
    return DiscretePath(np.stack([x, y], axis=-1))


class TestCone:
    def test_endpoint_normal_component_removed(self, m2, b2):
        x = chord(np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 8, b2)
        w = TangentField(np.ones_like(x.nodes))
        v = project_to_cone(x, w, default_cone(b2), b2, m2).vectors
        for idx in (0, -1):
            nu = unit_normal(b2, m2, x.nodes[[idx]])[0]
            assert abs(float(np.dot(nu, v[idx]))) < 1e-12

    def test_band_nodes_lose_outward_part_only(self, m2, b2):
        th = np.linspace(0.0, np.pi, 9)
        x = DiscretePath(np.stack([np.cos(th), np.sin(th)], axis=-1))
        outward = TangentField(x.nodes.copy())
        v = project_to_cone(x, outward, ConeSpec(delta=0.1), b2, m2).vectors
        # all interior nodes sit on the boundary: outward components clipped
        assert np.allclose(v[1:-1], 0.0, atol=1e-12)
        inward = TangentField(-x.nodes.copy())
        v2 = project_to_cone(x, inward, ConeSpec(delta=0.1), b2, m2).vectors
        assert np.allclose(v2[1:-1], inward.vectors[1:-1], atol=1e-12)

    def test_wide_cone_rejected(self, m2, b2):
        x = chord(np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 8, b2)
        with pytest.raises(GeometryError):
            project_to_cone(x, TangentField(np.ones_like(x.nodes)),
                            ConeSpec(delta=2.0 * b2.delta0), b2, m2)


class TestFeasibility:
    def test_pulls_outside_nodes_back(self, b2):
        x = bent_chord(16, amp=0.05)
        nodes = x.nodes.copy()
        nodes[8] *= 1.0 + 0.1 / np.linalg.norm(nodes[8])   # push outside
        y = feasibility_project(b2, DiscretePath(nodes))
        assert float(b2.phi(y.nodes[8])) <= 1e-10

    def test_far_drift_rejected(self, b2):
        nodes = bent_chord(8).nodes.copy()
        nodes[4] = [0.0, 2.0]
        from ogchords.descent import FeasibilityError
        with pytest.raises(FeasibilityError):
            feasibility_project(b2, DiscretePath(nodes))


class TestFlow:
    def test_diameter_is_flow_fixed_point(self, m2, b2):
        x = chord(np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 48, b2)
        res = flow(m2, b2, x, FlowConfig(max_iters=50))
        assert res.converged
        assert res.iterations == 0
        assert np.isclose(res.energy, 4.0)

    def test_bent_chord_descends_feasibly(self, m2, b2):
        # endpoints slide freely on the boundary, so unconstrained descent
        # shortens past the diameter; the census pipeline pairs the flow
        # with an energy floor and a shooting refinement for that reason
        x0 = bent_chord()
        f0 = pathspace.energy(m2, x0)
        res = flow(m2, b2, x0, FlowConfig(max_iters=120))
        assert res.energy < f0
        phis = b2.phi(res.path.nodes)
        assert np.all(phis <= 1e-10)
        assert abs(float(phis[0])) < 1e-8 and abs(float(phis[-1])) < 1e-8

    def test_energy_monotone_along_accepted_steps(self, m2, b2):
        res = flow(m2, b2, bent_chord(),
                   FlowConfig(max_iters=200, record_trace=True))
        energies = [rec[1] for rec in res.trace]
        assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))

    def test_energy_monotone_random_starts(self, m2, b2):
        rng = np.random.default_rng(11)
        for _ in range(20):
            amp = rng.uniform(0.05, 0.45)
            n = int(rng.integers(16, 48))
            res = flow(m2, b2, bent_chord(n, amp),
                       FlowConfig(max_iters=60, record_trace=True))
            energies = [rec[1] for rec in res.trace]
            assert all(b <= a + 1e-12 for a, b in zip(energies, energies[1:]))

    def test_flow_commutes_with_reversal_one_step(self, m2, b2):
        x0 = bent_chord(24)
        cfg = FlowConfig(max_iters=1, record_trace=True)
        fwd = flow(m2, b2, x0, cfg).path.nodes
        bwd = flow(m2, b2, reverse(x0), cfg).path.nodes
        assert np.allclose(fwd, bwd[::-1], atol=1e-12)

    def test_collapse_floor_stops_flow(self, m_radial, b2):
        # short boundary-to-boundary arc shrinks toward a point; the floor
        # reports collapse instead of iterating to zero
        th = np.linspace(0.0, 0.25, 25)
        x0 = DiscretePath(
            np.stack([np.cos(th), np.sin(th)], axis=-1) * 0.999)
        res = flow(m_radial, b2, x0,
                   FlowConfig(max_iters=2000, energy_floor=0.05))
        assert res.reason in ("collapsed", "converged")
        if res.reason == "collapsed":
            assert res.energy < 0.05

    def test_descent_direction_unit_norm(self, m2, b2):
        x = bent_chord(16)
        v, steep = descent_direction(m2, b2, x, default_cone(b2))
        assert steep > 0.0
        assert np.isclose(pathspace.norm_star(TangentField(v.vectors)), 1.0)


class TestVerifyCritical:
    def test_diameter_is_ogc(self, m2, b2):
        x = chord(np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 64, b2)
        rep = verify_critical(m2, b2, x)
        assert rep.classification == "OGC"
        assert rep.residual_interior < 1e-9
        assert max(rep.endpoint_angles) < 1e-9
        assert rep.contact_count == 0

    def test_conformal_diameter_is_ogc(self, m_radial, b2):
        # critical paths are constant g-speed: invert the radial arc length
        # a(r) = r + r^3/3 of f = 1 + r^2 on a uniform grid
        n = 128
        total = 8.0 / 3.0
        s = np.linspace(0.0, total, n + 1) - total / 2.0
        a = np.abs(s)
        r = np.clip(a, 0.0, 1.0)
        for _ in range(60):
            r = r - (r + r ** 3 / 3.0 - a) / (1.0 + r * r)
        nodes = np.stack([np.sign(s) * r, np.zeros(n + 1)], axis=-1)
        rep = verify_critical(m_radial, b2, DiscretePath(nodes))
        assert rep.classification == "OGC"
        assert rep.residual_interior < 1e-6
        assert np.isclose(rep.energy, total * total, rtol=1e-4)

    def test_affine_parametrization_of_geodesic_image_rejected(
            self, m_radial, b2):
        # same image, euclidean-affine nodes: not an energy-critical path
        x = chord(np.array([-1.0, 0.0]), np.array([1.0, 0.0]), 128, b2)
        rep = verify_critical(m_radial, b2, x)
        assert rep.classification == "NotCritical"
        assert rep.speed_variation > 1.0

    def test_bent_chord_not_critical(self, m2, b2):
        rep = verify_critical(m2, b2, bent_chord())
        assert rep.classification == "NotCritical"

    def test_constant_path_detected(self, m2, b2):
        nodes = np.broadcast_to([1.0, 0.0], (17, 2)).copy()
        rep = verify_critical(m2, b2, DiscretePath(nodes))
        assert rep.classification == "Constant"

    def test_boundary_arc_flagged_by_contact(self, m2, b2):
        th = np.linspace(0.0, np.pi / 2.0, 65)
        x = DiscretePath(np.stack([np.cos(th), np.sin(th)], axis=-1))
        rep = verify_critical(m2, b2, x)
        assert rep.contact_count > 0
        assert rep.classification in ("BoundaryCritical", "NotCritical")

    def test_speed_variation_gate(self, m2, b2):
        # nonuniform parametrization of the diameter: geodesic image but not
        # a constant-speed critical path of the energy
        s = (np.arange(33) / 32.0) ** 2
        nodes = np.stack([-1.0 + 2.0 * s, np.zeros(33)], axis=-1)
        rep = verify_critical(m2, b2, DiscretePath(nodes))
        assert rep.classification == "NotCritical"
        assert rep.speed_variation > 1e-3


class TestGradientOracle:
    @given(st.integers(0, 2 ** 31 - 1))
    def test_fd_agreement_random_pairs(self, seed):
        from ogchords.geometry import euclidean_metric
        rng = np.random.default_rng(seed)
        m = euclidean_metric(2)
        x = DiscretePath(bent_chord(12, 0.2).nodes
                         + 0.01 * rng.standard_normal((13, 2)))
        v = TangentField(rng.standard_normal((13, 2)))
        grad = pathspace.energy_gradient(m, x)
        t = 1e-6
        fd = (pathspace.energy(m, DiscretePath(x.nodes + t * v.vectors))
              - pathspace.energy(m, DiscretePath(x.nodes - t * v.vectors))) \
            / (2.0 * t)
        dv = pathspace.pair(grad, v)
        assert abs(dv - fd) <= 1e-5 * (1.0 + abs(fd))
