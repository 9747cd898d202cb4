"""Constrained descent on the discrete path space and criticality checks.

Admissible variations keep endpoints sliding along the boundary and never
push band nodes outward:

    g(nu(x_0), V_0) = 0 = g(nu(x_n), V_n),
    g(nu(x_i), V_i) <= 0   wherever phi(x_i) >= -delta  (interior nodes).

The descent direction is the cone projection of the negative energy gradient,
preconditioned by a path Laplacian (H^1) solve: the raw node gradient of the
discrete energy is stiff (condition grows like n^2), while the preconditioned
flow converges in a grid-independent number of iterations.  The projection,
normalization, reported steepness -dF[V] and the energy-monotone backtracking
are unaffected by the preconditioner.
"""

from __future__ import annotations

import dataclasses

import numpy as np
from scipy.linalg import solveh_banded

from . import pathspace
from .geometry import (DomainBoundary, GeometryError, MetricField,
                       grad_phi_norm, hessian_phi, retract_to_boundary,
                       unit_normal)
from .integrate import segment_velocities
from .pathspace import DiscretePath, TangentField


class FeasibilityError(RuntimeError):
    """A trial step left the band where retraction is defined."""


@dataclasses.dataclass(frozen=True)
class ConeSpec:
    """Margin and tolerances of the admissible variation cone."""

    delta: float
    endpoint_tol: float = 1e-8

    def __post_init__(self):
        if self.delta <= 0.0:
            raise GeometryError("cone margin delta must be positive")


@dataclasses.dataclass(frozen=True)
class ToleranceSpec:
    """Thresholds used by verify_critical."""

    tol_contact: float = 1e-6
    tol_residual: float = 1e-6
    tol_angle: float = 1e-6
    tol_speed_rel: float = 1e-6
    tol_lambda: float = 1e-8
    tol_tangency: float = 1e-5
    tol_constant: float = 1e-12
    substeps: int = 4


@dataclasses.dataclass(frozen=True)
class CriticalReport:
    classification: str  # Constant | OGC | BoundaryCritical | NotCritical
    energy: float
    residual_interior: float
    speed_variation: float
    endpoint_angles: tuple
    contact_count: int
    lambda_max: float | None
    tangency_max: float | None
    c1_defect: float
    max_interior_phi: float


@dataclasses.dataclass(frozen=True)
class FlowConfig:
    max_iters: int = 1000
    tol_crit_factor: float = 1e-7
    armijo_shrink: float = 0.5
    armijo_c: float = 0.1
    step_scale: float = 1e-2
    step_growth: float = 2.0
    step_cap: float = 1.0               # cap on the dist_* moved per step
    h_min: float = 1e-12
    cone_delta: float | None = None     # default delta0 / 2
    energy_floor: float | None = None   # stop when F drops below (collapse)
    precondition: bool = True
    sigma: float = 1.0
    record_trace: bool = False


@dataclasses.dataclass(frozen=True)
class FlowResult:
    path: DiscretePath
    converged: bool
    reason: str  # converged | max_iters | stalled | collapsed
    iterations: int
    energy: float
    steepness: float
    trace: tuple = ()


def default_cone(b: DomainBoundary) -> ConeSpec:
    """Thin safety margin: wide bands freeze outward node redistribution
    long before contact, so the default keeps the clip local to near-contact
    nodes (delta is exposed in ConeSpec / FlowConfig for callers who want
    the conservative wide band)."""
    return ConeSpec(delta=b.delta0 / 200.0)


def project_to_cone(x: DiscretePath, w: TangentField, cone: ConeSpec,
                    b: DomainBoundary, m: MetricField) -> TangentField:
    """Project a raw field into the admissible cone.

    Endpoint vectors lose their full normal component; interior nodes inside
    the margin band lose only the outward-pointing part.
    """
    if cone.delta > b.delta0 * (1.0 + 1e-12):
        raise GeometryError("cone margin exceeds the band constant delta0")
    v = w.vectors.copy()
    nodes = x.nodes
    nu_ends = unit_normal(b, m, nodes[[0, -1]])
    for side, idx in ((0, 0), (1, -1)):
        nu = nu_ends[side]
        coef = float(m.inner(nodes[idx], nu, v[idx]))
        v[idx] = v[idx] - coef * nu
    phis = np.asarray(b.phi(nodes[1:-1]), dtype=float)
    band = np.where(phis >= -cone.delta)[0] + 1
    if band.size:
        nu_band = unit_normal(b, m, nodes[band])
        coefs = m.inner(nodes[band], nu_band, v[band])
        v[band] = v[band] - np.maximum(coefs, 0.0)[:, None] * nu_band
    return TangentField(v)


def _h1_solve(rhs: np.ndarray, sigma: float) -> np.ndarray:
    """Solve (sigma I + 2 n A) u = rhs with A the Neumann path stiffness."""
    n1 = rhs.shape[0]
    n = n1 - 1
    scale = 2.0 * n
    ab = np.zeros((2, n1))
    ab[1, :] = sigma + 2.0 * scale
    ab[1, 0] = sigma + scale
    ab[1, -1] = sigma + scale
    ab[0, 1:] = -scale
    return solveh_banded(ab, rhs, lower=False)


def _descent_candidates(m: MetricField, b: DomainBoundary, x: DiscretePath,
                        cone: ConeSpec, grad: TangentField,
                        precondition: bool, sigma: float):
    """Admissible descent fields ordered by preference.

    Each entry is (W: (n+1,dim) array, norm_star(W), -dF[W]) with -dF[W] > 0.
    The first candidate is the Sobolev-preconditioned projected gradient;
    the raw projected gradient is kept as a fallback.  The raw gradient is
    projected before the Sobolev solve as well: the endpoint normal tension
    is annihilated by the constraint, and smearing it through the solve
    would contaminate the nodes next to the boundary.
    """
    raw = project_to_cone(x, TangentField(-grad.vectors), cone, b, m).vectors
    fields = []
    if precondition:
        fields.append(_h1_solve(raw, sigma))
    fields.append(raw)
    out = []
    for cand in fields:
        v = project_to_cone(x, TangentField(cand), cone, b, m)
        ns = pathspace.norm_star(v)
        if ns < 1e-14:
            continue
        slope = -pathspace.pair(grad, v)
        if slope > 0.0:
            out.append((v.vectors, ns, slope))
    return out


def descent_direction(m: MetricField, b: DomainBoundary, x: DiscretePath,
                      cone: ConeSpec):
    """Unit admissible descent direction V and its steepness -dF[V].

    V is the cone projection of the negative energy gradient normalized to
    norm_star(V) = 1, or the zero field (steepness 0) when the projection
    vanishes.
    """
    grad = pathspace.energy_gradient(m, x)
    v = project_to_cone(x, TangentField(-grad.vectors), cone, b, m)
    ns = pathspace.norm_star(v)
    if ns < 1e-14:
        return TangentField(np.zeros_like(x.nodes)), 0.0
    unit = TangentField(v.vectors / ns)
    return unit, -pathspace.pair(grad, unit)


def feasibility_project(b: DomainBoundary, x: DiscretePath) -> DiscretePath:
    """Retract endpoints onto the boundary and pull outside nodes back to it."""
    nodes = x.nodes.copy()
    phis = np.asarray(b.phi(nodes), dtype=float)
    fix = np.zeros(len(nodes), dtype=bool)
    fix[0] = fix[-1] = True
    fix |= phis > 0.0
    if np.any(np.abs(phis[fix]) > b.delta0):
        raise FeasibilityError("node drifted outside the retraction band")
    nodes[fix] = retract_to_boundary(b, nodes[fix])
    return DiscretePath(nodes)


def flow(m: MetricField, b: DomainBoundary, x0: DiscretePath,
         cfg: FlowConfig | None = None) -> FlowResult:
    """Backtracking descent flow inside the path space.

    Steps along the unnormalized admissible descent field with a warm-started
    Armijo search: the first trial moves step_scale/(1+sqrt(F)) in dist_*,
    later trials reuse the last accepted step grown by step_growth and capped
    at step_cap.  Energy is nonincreasing along accepted steps and the
    schedule is fully deterministic, so the flow commutes with path reversal.
    """
    cfg = cfg or FlowConfig()
    cone = ConeSpec(delta=cfg.cone_delta if cfg.cone_delta is not None
                    else b.delta0 / 200.0)
    x = feasibility_project(b, x0)
    f = pathspace.energy(m, x)
    trace = []
    reason = "max_iters"
    iters = 0
    steep = 0.0
    t_carry = None
    for iters in range(1, cfg.max_iters + 1):
        if cfg.energy_floor is not None and f < cfg.energy_floor:
            reason = "collapsed"
            iters -= 1
            break
        grad = pathspace.energy_gradient(m, x)
        cands = _descent_candidates(m, b, x, cone, grad,
                                    cfg.precondition, cfg.sigma)
        # stopping surrogate: steepness of the raw projected gradient
        raw_w, raw_ns, raw_slope = (cands[-1] if cands
                                    else (None, 0.0, 0.0))
        steep = raw_slope / raw_ns if raw_ns > 0.0 else 0.0
        if steep < cfg.tol_crit_factor * (1.0 + f):
            reason = "converged"
            iters -= 1
            break
        accepted = False
        moved = 0.0
        for w, wnorm, slope in cands:
            if t_carry is None:
                t = cfg.step_scale / ((1.0 + np.sqrt(max(f, 0.0))) * wnorm)
            else:
                t = t_carry * cfg.step_growth
            t = min(t, cfg.step_cap / wnorm)
            while t * wnorm >= cfg.h_min:
                try:
                    trial = feasibility_project(
                        b, DiscretePath(x.nodes + t * w))
                except FeasibilityError:
                    t *= cfg.armijo_shrink
                    continue
                f_trial = pathspace.energy(m, trial)
                if f_trial <= f - cfg.armijo_c * t * slope:
                    x, f = trial, f_trial
                    accepted = True
                    t_carry = t
                    moved = t * wnorm
                    break
                t *= cfg.armijo_shrink
            if accepted:
                break
        if cfg.record_trace:
            trace.append((iters, f, steep, moved))
        if not accepted:
            reason = "stalled"
            break
    else:
        reason = "max_iters"
    converged = reason == "converged"
    return FlowResult(path=x, converged=converged, reason=reason,
                      iterations=iters, energy=f, steepness=steep,
                      trace=tuple(trace))


def lambda_profile(m: MetricField, b: DomainBoundary, x: DiscretePath,
                   tol_contact: float = 1e-6):
    """Contact multiplier lambda_i = Hess phi(xdot, xdot) / |grad phi|_g at
    interior contact nodes, central-difference velocities.

    Returns (indices, lambdas); a critical curve must have lambda <= 0.
    """
    nodes = x.nodes
    phis = np.asarray(b.phi(nodes[1:-1]), dtype=float)
    idx = np.where(phis >= -tol_contact)[0] + 1
    if idx.size == 0:
        return idx, np.zeros(0)
    xdot = 0.5 * x.n * (nodes[idx + 1] - nodes[idx - 1])
    bform = hessian_phi(b, m, nodes[idx])
    num = np.einsum("si,sij,sj->s", xdot, bform, xdot)
    den = grad_phi_norm(b, m, nodes[idx])
    return idx, num / den


def classify(energy: float, residual: float, speed_variation: float,
             angles: tuple, contact_count: int, lambda_max: float | None,
             tangency_max: float | None, tol: ToleranceSpec,
             mean_speed_sq: float) -> str:
    """Pure classification on the measured report fields."""
    if energy <= tol.tol_constant:
        return "Constant"
    critical_core = (
        residual <= tol.tol_residual
        and speed_variation <= tol.tol_speed_rel * (1.0 + mean_speed_sq)
        and max(angles) <= tol.tol_angle)
    if not critical_core:
        return "NotCritical"
    if contact_count == 0:
        return "OGC"
    lam_ok = lambda_max is not None and lambda_max <= tol.tol_lambda
    tan_ok = tangency_max is not None and tangency_max <= tol.tol_tangency
    return "BoundaryCritical" if (lam_ok and tan_ok) else "NotCritical"


def verify_critical(m: MetricField, b: DomainBoundary, x: DiscretePath,
                    tol: ToleranceSpec | None = None) -> CriticalReport:
    """Measure all criticality diagnostics of a path and classify it.

    The interior geodesic residual comes from per-segment boundary-value
    velocities: the g-norm of the inter-segment velocity jump divided by the
    grid spacing estimates |D/ds xdot| at the node and is solver-exact (tiny)
    on sampled geodesics.  Speeds and endpoint angles use the same segment
    velocities; the contact multiplier uses central differences.
    """
    tol = tol or ToleranceSpec()
    f = pathspace.energy(m, x)
    nodes = x.nodes
    n = x.n
    h = 1.0 / n

    if f <= tol.tol_constant:
        return CriticalReport(
            classification="Constant", energy=f, residual_interior=0.0,
            speed_variation=0.0, endpoint_angles=(0.0, 0.0), contact_count=0,
            lambda_max=None, tangency_max=None, c1_defect=0.0,
            max_interior_phi=float(np.max(b.phi(nodes[1:-1]))) if n > 1 else 0.0)

    v_dep, v_arr = segment_velocities(m, nodes, substeps=tol.substeps)

    speeds = m.inner(nodes[:-1], v_dep, v_dep)
    mean_speed = float(np.mean(speeds))
    speed_variation = float(np.max(np.abs(speeds - mean_speed)))

    jumps = v_dep[1:] - v_arr[:-1]           # at interior nodes 1..n-1
    jump_norm = m.norm(nodes[1:-1], jumps) / h

    phis_int = np.asarray(b.phi(nodes[1:-1]), dtype=float)
    contact = phis_int >= -tol.tol_contact
    if np.any(~contact):
        residual = float(np.max(jump_norm[~contact]))
    else:
        residual = 0.0
    contact_count = int(np.count_nonzero(contact))
    max_interior_phi = float(np.max(phis_int)) if n > 1 else -np.inf

    nu0 = unit_normal(b, m, nodes[0])
    nu1 = unit_normal(b, m, nodes[-1])
    angles = (_angle(m, nodes[0], v_dep[0], -nu0),
              _angle(m, nodes[-1], v_arr[-1], nu1))

    lambda_max = None
    tangency_max = None
    if contact_count:
        _, lams = lambda_profile(m, b, x, tol_contact=tol.tol_contact)
        lambda_max = float(np.max(lams)) if lams.size else None
        cidx = np.where(contact)[0] + 1
        nu_c = unit_normal(b, m, nodes[cidx])
        xdot_c = 0.5 * (v_arr[cidx - 1] + v_dep[cidx])
        tang = np.abs(m.inner(nodes[cidx], nu_c, xdot_c))
        tang = tang / np.maximum(m.norm(nodes[cidx], xdot_c), 1e-300)
        tangency_max = float(np.max(tang))

    # C1 proxy: largest turning angle between consecutive segment velocities
    c1 = 0.0
    if n > 1:
        cosg = m.inner(nodes[1:-1], v_arr[:-1], v_dep[1:])
        na = m.norm(nodes[1:-1], v_arr[:-1])
        nb = m.norm(nodes[1:-1], v_dep[1:])
        cosg = np.clip(cosg / np.maximum(na * nb, 1e-300), -1.0, 1.0)
        c1 = float(np.max(np.arccos(cosg)))

    label = classify(f, residual, speed_variation, angles, contact_count,
                     lambda_max, tangency_max, tol, mean_speed)
    return CriticalReport(
        classification=label, energy=f, residual_interior=residual,
        speed_variation=speed_variation, endpoint_angles=angles,
        contact_count=contact_count, lambda_max=lambda_max,
        tangency_max=tangency_max, c1_defect=c1,
        max_interior_phi=max_interior_phi)


def _angle(m: MetricField, p: np.ndarray, u: np.ndarray, w: np.ndarray) -> float:
    c = float(m.inner(p, u, w))
    nu = float(m.norm(p, u)) * float(m.norm(p, w))
    if nu < 1e-300:
        return 0.0
    return float(np.arccos(np.clip(c / nu, -1.0, 1.0)))
