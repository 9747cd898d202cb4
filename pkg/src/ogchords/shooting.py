"""Geodesic shooting against the domain boundary.

Shots start on the boundary with the unit inward velocity -nu, integrate the
geodesic ODE with fixed-step RK4 and locate the first return to {phi = 0} by
bisection inside the crossing step.  Exits are classified by the cosine
between the exit velocity and the outward normal:

    Orthogonal   exit_cos > 1 - orth_tol
    Tangent      |exit_cos| < tan_tol      (an orthogonal-to-tangent chord)
    Transversal  otherwise
    NoReturn     left the chart or exceeded the length budget

All trajectory work is batched over shots, which keeps scans and Newton
refinements cheap.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from . import pathspace
from .descent import ToleranceSpec, verify_critical
from .geometry import (DomainBoundary, GeometryError, MetricField,
                       _direction_probe, retract_to_boundary, unit_normal)
from .integrate import stiff_step as _stiff_step
from .pathspace import DiscretePath
from .sampling import boundary_grid, orthonormal_tangent_frame

ORTH_TOL = 1e-6
TAN_TOL = 1e-3
GRAZE_TOL = 1e-8
EXIT_PHI_TOL = 1e-10
DEFAULT_STEP = 1e-3


@dataclasses.dataclass(frozen=True)
class Trajectory:
    params: np.ndarray
    points: np.ndarray
    velocities: np.ndarray

    @property
    def arc_length(self) -> float:
        seg = np.linalg.norm(np.diff(self.points, axis=0), axis=-1)
        return float(np.sum(seg))


@dataclasses.dataclass(frozen=True)
class GrazeEvent:
    param: float
    point: np.ndarray
    phi: float


@dataclasses.dataclass(frozen=True)
class ShotResult:
    start: np.ndarray
    start_velocity: np.ndarray
    kind: str                      # Orthogonal | Tangent | Transversal | NoReturn
    exit_cos: float
    exit_point: np.ndarray | None
    exit_velocity: np.ndarray | None
    param_length: float
    arc_length: float
    path: DiscretePath | None
    grazing: tuple = ()


@dataclasses.dataclass(frozen=True)
class ScanReport:
    shots: tuple
    ot_indices: tuple
    min_abs_exit_cos: float
    grazing_count: int
    grid: int

    @property
    def is_empty(self) -> bool:
        return len(self.ot_indices) == 0


@dataclasses.dataclass(frozen=True)
class RefineResult:
    converged: bool
    path: DiscretePath | None
    shot: ShotResult | None
    report: object | None
    iterations: int
    tangential_norm: float
    start_point: np.ndarray


def integrate_geodesic(m: MetricField, p: np.ndarray, v: np.ndarray,
                       step: float = 1e-3, max_len: float = 10.0) -> Trajectory:
    """Fixed-step RK4 geodesic through (p, v); parameter is the ODE time."""
    p = np.asarray(p, dtype=float)
    v = np.asarray(v, dtype=float)
    if step <= 0.0 or max_len <= 0.0:
        raise GeometryError("step and max_len must be positive")
    speed = float(m.norm(p, v))
    steps = max(1, int(np.ceil(max_len / (step * max(speed, 1e-12)))))
    accel = lambda x, w: m.geodesic_accel(x, w)
    xs = np.zeros((steps + 1, p.shape[0]))
    vs = np.zeros_like(xs)
    xs[0], vs[0] = p, v
    x, w = p[None, :].copy(), v[None, :].copy()
    for k in range(1, steps + 1):
        x, w = _stiff_step(accel, x, w, step)
        xs[k], vs[k] = x[0], w[0]
    return Trajectory(params=step * np.arange(steps + 1), points=xs, velocities=vs)


def _chart_radius(b: DomainBoundary) -> float:
    return 1.5 * float(np.max(b.radius(_direction_probe(b.dim)))) + 0.1


def _shoot_raw(m: MetricField, b: DomainBoundary, starts: np.ndarray,
               v0: np.ndarray, step: float, max_len: float,
               chart_radius: float):
    """Batched shooting core.

    Returns (crossed, exit_x, exit_v, param, grazing) where grazing is a list
    of GrazeEvent lists per row.  Non-crossed rows carry their final state and
    integrated parameter span.
    """
    B, dim = starts.shape
    accel = lambda x, w: m.geodesic_accel(x, w)
    max_steps = int(np.ceil(max_len / step)) + 1

    crossed = np.zeros(B, dtype=bool)
    exit_x = starts.copy()
    exit_v = v0.copy()
    param = np.zeros(B)
    grazing = [[] for _ in range(B)]

    idx = np.arange(B)
    x = starts.copy()
    v = v0.copy()
    phi_cur = np.asarray(b.phi(x), dtype=float)   # phi at the current node
    phi_back = np.full(B, -np.inf)                # phi one node earlier
    k = 0
    while idx.size and k < max_steps:
        k += 1
        xn, vn = _stiff_step(accel, x, v, step)
        phi_n = np.asarray(b.phi(xn), dtype=float)

        # grazing: current node is a strict local max of phi near the level set
        if k >= 3:
            peak = ((phi_cur > phi_n) & (phi_cur > phi_back)
                    & (phi_cur > -GRAZE_TOL) & (phi_cur < 0.0))
            for j in np.where(peak)[0]:
                grazing[idx[j]].append(GrazeEvent(param=(k - 1) * step,
                                                  point=x[j].copy(),
                                                  phi=float(phi_cur[j])))

        crossing = (phi_cur < 0.0) & (phi_n >= 0.0)
        escaped = ~crossing & (np.linalg.norm(xn, axis=-1) > chart_radius)
        done = crossing | escaped | (k >= max_steps)

        if np.any(crossing):
            rows = np.where(crossing)[0]
            ex, ev, tau = _bisect_exit(accel, b, x[rows], v[rows], step)
            gi = idx[rows]
            crossed[gi] = True
            exit_x[gi] = ex
            exit_v[gi] = ev
            param[gi] = (k - 1) * step + tau
        stopped = done & ~crossing
        if np.any(stopped):
            rows = np.where(stopped)[0]
            gi = idx[rows]
            exit_x[gi] = xn[rows]
            exit_v[gi] = vn[rows]
            param[gi] = k * step

        keep = ~done
        if not np.all(keep):
            idx = idx[keep]
            xn, vn, phi_n = xn[keep], vn[keep], phi_n[keep]
            phi_cur = phi_cur[keep]
        phi_back = phi_cur
        phi_cur = phi_n
        x, v = xn, vn
    return crossed, exit_x, exit_v, param, grazing


def _bisect_exit(accel, b: DomainBoundary, x_pre: np.ndarray, v_pre: np.ndarray,
                 step: float):
    """Bisect the crossing parameter inside one RK4 step, to |phi| <= 1e-10."""
    rows = x_pre.shape[0]
    lo = np.zeros(rows)
    hi = np.full(rows, step)
    for _ in range(60):
        mid = 0.5 * (lo + hi)
        xm, _ = _stiff_step(accel, x_pre, v_pre, mid[:, None])
        below = np.asarray(b.phi(xm), dtype=float) < 0.0
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if float(np.max(hi - lo)) < 1e-16 * step:
            break
    tau = 0.5 * (lo + hi)
    ex, ev = _stiff_step(accel, x_pre, v_pre, tau[:, None])
    if np.any(np.abs(np.asarray(b.phi(ex), dtype=float)) > EXIT_PHI_TOL):
        # fall back to the bracket end with the smaller |phi|
        xl, vl = _stiff_step(accel, x_pre, v_pre, lo[:, None])
        xh, vh = _stiff_step(accel, x_pre, v_pre, hi[:, None])
        pl = np.abs(np.asarray(b.phi(xl), dtype=float))
        ph = np.abs(np.asarray(b.phi(xh), dtype=float))
        pick = (pl < ph)[:, None]
        ex = np.where(pick, xl, xh)
        ev = np.where(pick, vl, vh)
        tau = np.where(pick[:, 0], lo, hi)
    return ex, ev, tau


def _resample_paths(m: MetricField, starts: np.ndarray, v0: np.ndarray,
                    params: np.ndarray, n_nodes: int, step: float) -> np.ndarray:
    """Re-integrate each shot over its exact parameter span on a uniform grid.

    Sub-step counts are chosen so the integration step never exceeds the
    requested one; every shot's nodes land exactly on integrator states.
    """
    B, dim = starts.shape
    accel = lambda x, w: m.geodesic_accel(x, w)
    nodes = np.zeros((B, n_nodes + 1, dim))
    subs = np.maximum(1, np.ceil(params / (n_nodes * step) - 1e-12).astype(int))
    for ms in np.unique(subs):
        rows = np.where(subs == ms)[0]
        h = (params[rows] / (n_nodes * ms))[:, None]
        x = starts[rows].copy()
        v = v0[rows].copy()
        nodes[rows, 0] = x
        for j in range(1, n_nodes + 1):
            for _ in range(ms):
                x, v = _stiff_step(accel, x, v, h)
            nodes[rows, j] = x
    return nodes


def _classify(exit_cos: float, crossed: bool,
              orth_tol: float = ORTH_TOL, tan_tol: float = TAN_TOL) -> str:
    if not crossed:
        return "NoReturn"
    if exit_cos > 1.0 - orth_tol:
        return "Orthogonal"
    if abs(exit_cos) < tan_tol:
        return "Tangent"
    return "Transversal"


def _shots_from_raw(m, b, starts, v0, crossed, exit_x, exit_v, param, grazing,
                    n_nodes, step, with_paths=True):
    B = starts.shape[0]
    paths = [None] * B
    if with_paths:
        rows = np.where(param > 0.0)[0]
        if rows.size:
            nodes = _resample_paths(m, starts[rows], v0[rows], param[rows],
                                    n_nodes, step)
            for pos, r in enumerate(rows):
                nd = nodes[pos]
                if crossed[r]:
                    nd = nd.copy()
                    nd[-1] = retract_to_boundary(b, nd[-1])
                paths[r] = DiscretePath(nd)
    shots = []
    for i in range(B):
        if crossed[i]:
            nu = unit_normal(b, m, exit_x[i])
            speed = float(m.norm(exit_x[i], exit_v[i]))
            ec = float(m.inner(exit_x[i], exit_v[i], nu)) / max(speed, 1e-300)
        else:
            ec = float("nan")
        kind = _classify(ec, bool(crossed[i]))
        speed0 = float(m.norm(starts[i], v0[i]))
        shots.append(ShotResult(
            start=starts[i].copy(), start_velocity=v0[i].copy(), kind=kind,
            exit_cos=ec,
            exit_point=exit_x[i].copy() if crossed[i] else None,
            exit_velocity=exit_v[i].copy() if crossed[i] else None,
            param_length=float(param[i]),
            arc_length=float(param[i]) * speed0,
            path=paths[i], grazing=tuple(grazing[i])))
    return shots


def shoot_orthogonal(m: MetricField, b: DomainBoundary, A: np.ndarray,
                     step: float = DEFAULT_STEP, max_len: float = 40.0,
                     n_nodes: int = 128, with_path: bool = True) -> ShotResult:
    """Shoot the geodesic leaving A along the unit inward normal."""
    A = retract_to_boundary(b, np.asarray(A, dtype=float))
    starts = A[None, :]
    v0 = -unit_normal(b, m, starts)
    out = _shoot_raw(m, b, starts, v0, step, max_len, _chart_radius(b))
    return _shots_from_raw(m, b, starts, v0, *out, n_nodes, step,
                           with_paths=with_path)[0]


def scan_OT_chords(m: MetricField, b: DomainBoundary, grid: int = 64,
                   step: float = DEFAULT_STEP, max_len: float = 40.0,
                   n_nodes: int = 128, workers: int = 1,
                   with_paths: bool = False) -> ScanReport:
    """Shoot from a deterministic boundary grid and collect tangent exits.

    Results are merged in grid order regardless of the worker count, so the
    report is deterministic.
    """
    if grid < 16:
        raise GeometryError("scan needs at least 16 points per angle coordinate")
    starts = boundary_grid(b, grid)
    starts = retract_to_boundary(b, starts)
    v0 = -unit_normal(b, m, starts)
    radius = _chart_radius(b)

    def run(chunk):
        s, w = chunk
        out = _shoot_raw(m, b, s, w, step, max_len, radius)
        return _shots_from_raw(m, b, s, w, *out, n_nodes, step,
                               with_paths=with_paths)

    if workers > 1:
        bounds = np.linspace(0, starts.shape[0], workers + 1).astype(int)
        chunks = [(starts[a:c], v0[a:c]) for a, c in zip(bounds[:-1], bounds[1:])
                  if c > a]
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(run, chunks))
        shots = [s for part in parts for s in part]
    else:
        shots = run((starts, v0))

    ot = tuple(i for i, s in enumerate(shots) if s.kind == "Tangent")
    coss = [abs(s.exit_cos) for s in shots if s.kind != "NoReturn"]
    min_cos = float(np.min(coss)) if coss else float("nan")
    graze = sum(len(s.grazing) for s in shots)
    return ScanReport(shots=tuple(shots), ot_indices=ot,
                      min_abs_exit_cos=min_cos, grazing_count=graze, grid=grid)


# ---------------------------------------------------------------------------
# Newton refinement of orthogonal exits


def _exit_tangentials(m, b, X, V, ref):
    """Components of the unit exit velocity along a g-orthonormalized tangent
    frame built from fixed reference vectors."""
    nu = unit_normal(b, m, X)
    comps = []
    basis = []
    for r in ref:
        w = r - float(m.inner(X, nu, r)) * nu
        for bb in basis:
            w = w - float(m.inner(X, bb, w)) * bb
        nrm = float(m.norm(X, w))
        if nrm < 1e-10:
            raise GeometryError("exit frame degenerated during refinement")
        w = w / nrm
        basis.append(w)
        comps.append(float(m.inner(X, V, w)))
    speed = float(m.norm(X, V))
    return np.array(comps) / max(speed, 1e-300)


def _sphere_chart(u0: np.ndarray, frame: np.ndarray, w: np.ndarray) -> np.ndarray:
    """Exponential chart on the direction sphere around u0."""
    r = float(np.linalg.norm(w))
    if r < 1e-300:
        return u0
    axis = (frame.T @ w) / r
    return np.cos(r) * u0 + np.sin(r) * axis


@dataclasses.dataclass
class _RefineState:
    u0: np.ndarray
    frame: np.ndarray
    w: np.ndarray
    ref: np.ndarray | None = None
    tnorm: float = np.inf
    converged: bool = False
    failed: bool = False
    iterations: int = 0
    final: tuple | None = None   # (start, v0, exit_x, exit_v, param, grazing)


def refine_batch(m: MetricField, b: DomainBoundary, seeds: np.ndarray,
                 step: float = DEFAULT_STEP, max_len: float = 40.0,
                 n_nodes: int = 128, tol: float = 1e-10, max_iters: int = 50,
                 fd_delta: float = 1e-6,
                 tolerances: ToleranceSpec | None = None) -> list:
    """Newton-refine many boundary seeds toward orthogonal exits at once.

    Each seed's start point moves on the boundary (exponential chart on the
    direction sphere, radial scaling onto {phi = 0}) to zero the tangential
    components of the unit exit velocity.  All shots of a sweep share one
    batched integration.
    """
    seeds = np.atleast_2d(np.asarray(seeds, dtype=float))
    dim = seeds.shape[1]
    npar = dim - 1
    radius = _chart_radius(b)
    states = []
    for s in seeds:
        s = retract_to_boundary(b, s)
        r = float(np.linalg.norm(s))
        if r < 1e-12:
            raise GeometryError("boundary seed at the origin")
        u0 = s / r
        states.append(_RefineState(u0=u0, frame=orthonormal_tangent_frame(u0),
                                   w=np.zeros(npar)))

    def start_point(st: _RefineState, w):
        u = _sphere_chart(st.u0, st.frame, w)
        p = float(b.radius(u[None])[0]) * u
        return retract_to_boundary(b, p)

    for sweep in range(max_iters):
        live = [st for st in states if not (st.converged or st.failed)]
        if not live:
            break
        starts = []
        owners = []
        for st in live:
            st.iterations += 1
            starts.append(start_point(st, st.w))
            for k in range(npar):
                e = np.zeros(npar)
                e[k] = fd_delta
                starts.append(start_point(st, st.w + e))
            owners.append(st)
        starts = np.asarray(starts)
        v0 = -unit_normal(b, m, starts)
        crossed, ex, ev, param, graz = _shoot_raw(m, b, starts, v0, step,
                                                  max_len, radius)
        row = 0
        for st in owners:
            base = row
            row += 1 + npar
            if not crossed[base]:
                st.failed = True
                continue
            if st.ref is None:
                nu_e = unit_normal(b, m, ex[base])
                st.ref = orthonormal_tangent_frame(
                    nu_e / np.linalg.norm(nu_e))
            try:
                t0 = _exit_tangentials(m, b, ex[base], ev[base], st.ref)
            except GeometryError:
                st.failed = True
                continue
            st.tnorm = float(np.linalg.norm(t0))
            if st.tnorm <= tol:
                st.converged = True
                st.final = (starts[base], v0[base], ex[base], ev[base],
                            float(param[base]), tuple(graz[base]))
                continue
            cols = []
            ok = True
            for k in range(npar):
                r_k = base + 1 + k
                if not crossed[r_k]:
                    ok = False
                    break
                tk = _exit_tangentials(m, b, ex[r_k], ev[r_k], st.ref)
                cols.append((tk - t0) / fd_delta)
            if not ok:
                st.failed = True
                continue
            jac = np.stack(cols, axis=1)
            if npar == 1:
                jv = float(jac[0, 0])
                if abs(jv) < 1e-12:
                    st.failed = True
                    continue
                dw = np.array([-t0[0] / jv])
            else:
                u_, sv, vt = np.linalg.svd(jac)
                if sv[0] < 1e-12 or sv[-1] < 1e-12 * sv[0]:
                    st.failed = True
                    continue
                dw = -vt.T @ ((u_.T @ t0) / sv)
            nrm = float(np.linalg.norm(dw))
            if nrm > 0.3:
                dw = dw * (0.3 / nrm)
            st.w = st.w + dw
            if float(np.linalg.norm(st.w)) > 0.3:
                st.u0 = _sphere_chart(st.u0, st.frame, st.w)
                st.frame = orthonormal_tangent_frame(st.u0)
                st.w = np.zeros(npar)
    for st in states:
        if not (st.converged or st.failed):
            st.failed = True

    results = []
    done = [st for st in states if st.converged]
    if done:
        s_arr = np.asarray([st.final[0] for st in done])
        v_arr = np.asarray([st.final[1] for st in done])
        p_arr = np.asarray([st.final[4] for st in done])
        nodes = _resample_paths(m, s_arr, v_arr, p_arr, n_nodes, step)
    pos = 0
    for st in states:
        if not st.converged:
            results.append(RefineResult(
                converged=False, path=None, shot=None, report=None,
                iterations=st.iterations, tangential_norm=st.tnorm,
                start_point=start_point(st, st.w)))
            continue
        nd = nodes[pos].copy()
        pos += 1
        nd[-1] = retract_to_boundary(b, nd[-1])
        path = DiscretePath(nd)
        start, v0s, ex, ev, param, graz = st.final
        nu = unit_normal(b, m, ex)
        speed = float(m.norm(ex, ev))
        ec = float(m.inner(ex, ev, nu)) / max(speed, 1e-300)
        shot = ShotResult(start=start, start_velocity=v0s,
                          kind=_classify(ec, True), exit_cos=ec,
                          exit_point=ex, exit_velocity=ev,
                          param_length=param, arc_length=param,
                          path=path, grazing=graz)
        report = verify_critical(m, b, path, tolerances)
        results.append(RefineResult(
            converged=True, path=path, shot=shot, report=report,
            iterations=st.iterations, tangential_norm=st.tnorm,
            start_point=start))
    return results


def ogc_refine(m: MetricField, b: DomainBoundary, A0: np.ndarray,
               step: float = DEFAULT_STEP, max_len: float = 40.0,
               n_nodes: int = 128, tol: float = 1e-10,
               max_iters: int = 50,
               tolerances: ToleranceSpec | None = None) -> RefineResult:
    """Newton iteration on boundary parameters driving the tangential exit
    velocity to zero; see refine_batch."""
    return refine_batch(m, b, np.asarray(A0, dtype=float)[None, :], step=step,
                        max_len=max_len, n_nodes=n_nodes, tol=tol,
                        max_iters=max_iters, tolerances=tolerances)[0]
