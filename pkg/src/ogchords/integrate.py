"""Fixed-step RK4 integration of second-order systems x'' = a(x, x').

Used for geodesics (a = -Gamma(v, v)), constrained boundary geodesics and
Lagrangian dynamics.  Everything is batched: states have shape (B, dim).
"""

from __future__ import annotations

from typing import Callable

import numpy as np

from .geometry import MetricField


def rk4_step(accel: Callable, x: np.ndarray, v: np.ndarray, h: float):
    """One classical RK4 step for (x, v) with v' = accel(x, v)."""
    a1 = accel(x, v)
    x2 = x + 0.5 * h * v
    v2 = v + 0.5 * h * a1
    a2 = accel(x2, v2)
    x3 = x + 0.5 * h * v2
    v3 = v + 0.5 * h * a2
    a3 = accel(x3, v3)
    x4 = x + h * v3
    v4 = v + h * a3
    a4 = accel(x4, v4)
    xn = x + (h / 6.0) * (v + 2.0 * v2 + 2.0 * v3 + v4)
    vn = v + (h / 6.0) * (a1 + 2.0 * a2 + 2.0 * a3 + a4)
    return xn, vn


STIFF_FRACTION = 0.02
MAX_SUBSTEPS = 256


def stiff_step(accel: Callable, x: np.ndarray, v: np.ndarray, step):
    """Batched RK4 step with adaptive substeps where the field is stiff.

    Metrics that degenerate toward a boundary (conformal factors with small
    gaps) make the geodesic field stiff there: the relative velocity change
    per substep, h |accel| / |v|, must stay below the RK4 stability bound.
    The rate is re-probed before every substep because it can grow by orders
    of magnitude inside one step; substep sizes are floored at
    step / MAX_SUBSTEPS, which also bounds the work per call.  step may be a
    scalar or a per-row (rows, 1) array."""
    x = np.array(x, dtype=float)
    v = np.array(v, dtype=float)
    h_all = (np.asarray(step, dtype=float).reshape(-1)
             if np.ndim(step) else np.full(x.shape[0], float(step)))
    h_all = np.broadcast_to(h_all, (x.shape[0],))
    rem = h_all.copy()
    floor = h_all / MAX_SUBSTEPS
    for _ in range(MAX_SUBSTEPS):
        act = np.where(rem > 0.0)[0]
        if act.size == 0:
            break
        xa, va = x[act], v[act]
        a = np.asarray(accel(xa, va), dtype=float)
        rate = (np.linalg.norm(a, axis=-1)
                / np.maximum(np.linalg.norm(va, axis=-1), 1e-300))
        h = np.minimum(rem[act],
                       np.maximum(STIFF_FRACTION / np.maximum(rate, 1e-300),
                                  floor[act]))
        xa, va = rk4_step(accel, xa, va, h[:, None])
        x[act], v[act] = xa, va
        rem[act] -= h
    return x, v


def integrate_fixed(accel: Callable, x0: np.ndarray, v0: np.ndarray,
                    h: float, steps: int, record_every: int = 0):
    """Integrate a fixed number of steps.

    record_every > 0 returns (xs, vs) including the initial state, sampled
    every record_every steps (steps must be divisible by it); otherwise only
    the final state is returned.
    """
    x = np.array(x0, dtype=float)
    v = np.array(v0, dtype=float)
    if record_every:
        if steps % record_every != 0:
            raise ValueError("steps must be a multiple of record_every")
        count = steps // record_every
        xs = np.zeros((count + 1,) + x.shape)
        vs = np.zeros((count + 1,) + v.shape)
        xs[0] = x
        vs[0] = v
        k = 0
        for s in range(1, steps + 1):
            x, v = rk4_step(accel, x, v, h)
            if s % record_every == 0:
                k += 1
                xs[k] = x
                vs[k] = v
        return xs, vs
    for _ in range(steps):
        x, v = rk4_step(accel, x, v, h)
    return x, v


def geodesic_accel(m: MetricField) -> Callable:
    return lambda x, v: m.geodesic_accel(x, v)


def segment_velocities(m: MetricField, nodes: np.ndarray, substeps: int = 4,
                       max_iters: int = 12):
    """Per-segment geodesic boundary-value velocities.

    For each consecutive node pair solves for the initial velocity whose RK4
    geodesic over parameter h = 1/n lands on the next node, then also returns
    the arrival velocity there.  For nodes sampled from an exact geodesic at
    the same integrator resolution the arrival/departure velocities agree to
    solver accuracy, so the inter-segment jump is a faithful residual of the
    geodesic equation.

    The shooting update is a damped Newton step on the endpoint map with a
    finite-difference Jacobian; the naive v -= defect / h update assumes that
    map is near-identity, which fails badly where the metric varies strongly
    across one segment (conformal factors degenerating toward a boundary).

    Returns (v_dep, v_arr): velocities at the left and right end of each of
    the n segments, shape (n, dim).
    """
    nodes = np.asarray(nodes, dtype=float)
    n = nodes.shape[0] - 1
    dim = nodes.shape[1]
    h = 1.0 / n
    accel = geodesic_accel(m)
    x0 = nodes[:-1]
    x1 = nodes[1:]
    v = (x1 - x0) / h
    sub = max(1, int(substeps))
    dt = h / sub

    def endpoint(vel):
        x, w = x0, vel
        for _ in range(sub):
            x, w = stiff_step(accel, x, w, dt)
        return x, w

    tol = 1e-13 * (1.0 + float(np.max(np.abs(x1))))
    xe, v_arr = endpoint(v)
    for it in range(max_iters + 1):
        defect = xe - x1
        dn = np.linalg.norm(defect, axis=-1)
        if float(np.max(dn)) < tol or it == max_iters:
            break
        delta = 1e-7 * (1.0 + np.linalg.norm(v, axis=-1))
        jac = np.empty((n, dim, dim))
        for j in range(dim):
            vp = v.copy()
            vp[:, j] += delta
            xj, _ = endpoint(vp)
            jac[:, :, j] = (xj - xe) / delta[:, None]
        try:
            step = np.linalg.solve(jac, defect[..., None])[..., 0]
        except np.linalg.LinAlgError:
            step = np.einsum("sij,sj->si", np.linalg.pinv(jac), defect)
        # per-segment backtracking: accept a row once its defect shrinks
        alpha = np.ones(n)
        accepted = np.zeros(n, dtype=bool)
        vn = v - step
        for _ in range(8):
            trial = v - alpha[:, None] * step
            xt, _ = endpoint(trial)
            good = (np.linalg.norm(xt - x1, axis=-1) < dn) & ~accepted
            vn[good] = trial[good]
            accepted |= good
            if np.all(accepted):
                break
            alpha = np.where(accepted, alpha, 0.5 * alpha)
        v = vn
        xe, v_arr = endpoint(v)
    return v, v_arr
