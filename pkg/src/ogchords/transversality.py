"""Transversality criteria for normal/tangent bundle intersections.

Hypersurfaces are level sets in a Riemannian chart.  The second fundamental
form is measured by differentiating tangent-projection extension fields, the
shape operator comes from the defining identity

    g(A_v u, u') = -g(alpha(u, u'), v),

which is the single source of signs here, and the fixed-pair and
one-parameter-family criteria reduce to finite-dimensional rank tests with
an Indeterminate verdict near the tolerance threshold.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .geometry import (FD_STEP, GeometryError, MetricField, conformal_metric,
                       euclidean_metric, generic_metric)

RANK_TOL = 1e-8
INDETERMINATE_BAND = 10.0


class TransversalityError(Exception):
    """Raised when inputs violate the geometric preconditions."""


@dataclasses.dataclass(frozen=True)
class HypersurfaceData:
    """A hypersurface {psi = 0} localized at a point.

    basis rows are g-orthonormal and span T_pS; normal is the g-unit normal
    (along grad psi).  Invariants are validated at construction.
    """

    psi: object
    grad_psi: object
    point: np.ndarray
    basis: np.ndarray
    normal: np.ndarray
    label: str = "hypersurface"

    def tangent_coords(self, m: MetricField, w: np.ndarray) -> np.ndarray:
        p = self.point
        return np.array([m.inner(p, w, b) for b in self.basis])


def _fd_grad(psi, x: np.ndarray, h: float = FD_STEP) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        g[i] = (psi(x + e) - psi(x - e)) / (2.0 * h)
    return g


def _retract_to_level(psi, grad_psi, x: np.ndarray,
                      tol: float = 1e-12, max_iters: int = 60) -> np.ndarray:
    """Newton retraction onto {psi = 0} along the euclidean gradient."""
    y = np.asarray(x, dtype=float).copy()
    for _ in range(max_iters):
        val = float(psi(y))
        if abs(val) <= tol:
            return y
        gr = np.asarray(grad_psi(y), dtype=float)
        gn2 = float(gr @ gr)
        if gn2 < 1e-18:
            raise TransversalityError("degenerate level-set gradient")
        y = y - (val / gn2) * gr
    raise TransversalityError("level-set retraction did not converge")


def hypersurface_at(m: MetricField, psi, p: np.ndarray, grad_psi=None,
                    label: str = "hypersurface",
                    tol: float = 1e-10) -> HypersurfaceData:
    """Build HypersurfaceData at p (retracted onto {psi=0} first)."""
    if grad_psi is None:
        grad_psi = lambda x: _fd_grad(psi, x)
    p = _retract_to_level(psi, grad_psi, np.asarray(p, dtype=float))
    d = p.size
    gp = np.asarray(grad_psi(p), dtype=float)
    ginv = m.inv_at(p)
    n = ginv @ gp
    nn = np.sqrt(float(m.inner(p, n, n)))
    if nn < 1e-12:
        raise TransversalityError("vanishing normal at the base point")
    n = n / nn
    # g-orthonormal tangent basis: euclidean kernel of dpsi, then Gram-Schmidt
    _, _, vt = np.linalg.svd(gp[None, :])
    raw = vt[1:]
    basis = []
    for b in raw:
        w = b.astype(float)
        w = w - m.inner(p, w, n) * n
        for q in basis:
            w = w - m.inner(p, w, q) * q
        wn = np.sqrt(float(m.inner(p, w, w)))
        if wn < 1e-12:
            raise TransversalityError("tangent basis degenerated")
        basis.append(w / wn)
    basis = np.asarray(basis)
    for b in basis:
        if abs(m.inner(p, b, n)) > tol:
            raise TransversalityError("tangent basis not g-orthogonal to the "
                                      "normal within tolerance")
    gram = np.array([[m.inner(p, a, c) for c in basis] for a in basis])
    if np.max(np.abs(gram - np.eye(d - 1))) > tol:
        raise TransversalityError("tangent basis not g-orthonormal within "
                                  "tolerance")
    return HypersurfaceData(psi=psi, grad_psi=grad_psi, point=p,
                            basis=basis, normal=n, label=label)


def _unit_normal_field(m: MetricField, S: HypersurfaceData, x: np.ndarray):
    gp = np.asarray(S.grad_psi(x), dtype=float)
    n = m.inv_at(x) @ gp
    return n / np.sqrt(float(m.inner(x, n, n)))


def _require_tangent(m: MetricField, S: HypersurfaceData, u: np.ndarray,
                     name: str, tol: float = 1e-8):
    p = S.point
    scale = np.sqrt(float(m.inner(p, u, u))) + 1e-30
    if abs(m.inner(p, u, S.normal)) > tol * scale:
        raise TransversalityError(f"{name} is not tangent to {S.label} at p")


def second_fundamental_form(m: MetricField, S: HypersurfaceData,
                            u: np.ndarray, uprime: np.ndarray,
                            h: float = FD_STEP) -> np.ndarray:
    """alpha(u, u'): normal component of the covariant derivative of a
    tangent extension of u' along u.  Returns the normal-valued vector."""
    u = np.asarray(u, dtype=float)
    uprime = np.asarray(uprime, dtype=float)
    _require_tangent(m, S, u, "u")
    _require_tangent(m, S, uprime, "u'")
    p = S.point

    def extension(x):
        nx = _unit_normal_field(m, S, x)
        return uprime - m.inner(x, uprime, nx) * nx

    cp = _retract_to_level(S.psi, S.grad_psi, p + h * u)
    cm = _retract_to_level(S.psi, S.grad_psi, p - h * u)
    dU = (extension(cp) - extension(cm)) / (2.0 * h)
    gamma = m.christoffel_at(p)
    cov = dU + np.einsum("kij,i,j->k", gamma, u, uprime)
    n = S.normal
    return m.inner(p, cov, n) * n


def shape_operator(m: MetricField, S: HypersurfaceData,
                   v: np.ndarray) -> np.ndarray:
    """Matrix of A_v on T_pS in S.basis coordinates, from the defining
    identity g(A_v u, u') = -g(alpha(u, u'), v).  Symmetrized."""
    v = np.asarray(v, dtype=float)
    p = S.point
    k = len(S.basis)
    A = np.zeros((k, k))
    for j in range(k):
        for i in range(j, k):
            a = second_fundamental_form(m, S, S.basis[j], S.basis[i])
            A[i, j] = -float(m.inner(p, a, v))
            A[j, i] = A[i, j]
    return A


def shape_operator_apply(m: MetricField, S: HypersurfaceData, v: np.ndarray,
                         w: np.ndarray) -> np.ndarray:
    """A_v(w) as an ambient vector, w tangent to S."""
    A = shape_operator(m, S, v)
    coords = S.tangent_coords(m, np.asarray(w, dtype=float))
    return (A @ coords) @ S.basis


def _intersection_basis(S1: HypersurfaceData, S2: HypersurfaceData,
                        tol: float = 1e-10) -> np.ndarray:
    """Euclidean basis of ker dpsi1 ∩ ker dpsi2 at the common point."""
    g1 = np.asarray(S1.grad_psi(S1.point), dtype=float)
    g2 = np.asarray(S2.grad_psi(S2.point), dtype=float)
    stack = np.stack([g1 / np.linalg.norm(g1), g2 / np.linalg.norm(g2)])
    _, sv, vt = np.linalg.svd(stack)
    rank = int(np.sum(sv > tol * sv[0]))
    return vt[rank:]


def _check_pair_setup(m: MetricField, S1: HypersurfaceData,
                      S2: HypersurfaceData, v: np.ndarray,
                      tol: float = 1e-8):
    p = S1.point
    if np.linalg.norm(p - S2.point) > 1e-8:
        raise TransversalityError("S1 and S2 are localized at different "
                                  "points")
    vn = np.sqrt(float(m.inner(p, v, v)))
    if vn < 1e-12:
        raise TransversalityError("v must be nonzero")
    for b in S1.basis:
        if abs(m.inner(p, v, b)) > tol * vn:
            raise TransversalityError("v is not g-normal to S1 at p")
    g2 = np.asarray(S2.grad_psi(p), dtype=float)
    if abs(g2 @ v) > tol * np.linalg.norm(g2) * np.linalg.norm(v):
        raise TransversalityError("v is not tangent to S2 at p")
    stacked = np.vstack([S1.basis, S2.basis])
    sv = np.linalg.svd(stacked, compute_uv=False)
    if sv[-1] <= tol and len(sv) >= p.size:
        raise TransversalityError("S1 and S2 do not meet transversally at p")
    if stacked.shape[0] < p.size:
        raise TransversalityError("S1 and S2 do not meet transversally at p")


def subspace_Av(m: MetricField, S1: HypersurfaceData, S2: HypersurfaceData,
                v: np.ndarray) -> np.ndarray:
    """Spanning set of A_v = {A^{S1}_v(w) - alpha^{S2}(w, v) :
    w in T_pS1 ∩ T_pS2}, rows are ambient vectors."""
    v = np.asarray(v, dtype=float)
    _check_pair_setup(m, S1, S2, v)
    inter = _intersection_basis(S1, S2)
    if inter.size == 0:
        return np.zeros((0, S1.point.size))
    rows = []
    for w in inter:
        aw = shape_operator_apply(m, S1, v, w)
        al = second_fundamental_form(m, S2, w, v)
        rows.append(aw - al)
    return np.asarray(rows)


@dataclasses.dataclass(frozen=True)
class TransversalCheck:
    transversal: bool | None        # None = Indeterminate
    witness: np.ndarray | None
    ratio: float                    # normal-component ratio driving the test
    tolerance: float
    branch: str | None = None       # family check: "a", "b", or "a+b"

    @property
    def label(self) -> str:
        if self.transversal is None:
            return "Indeterminate"
        return "transversal" if self.transversal else "not-transversal"


def _rank_verdict(ratio: float, tol: float):
    """Decisive outside [tol/band, tol*band], Indeterminate inside."""
    if ratio > tol * INDETERMINATE_BAND:
        return True
    if ratio < tol / INDETERMINATE_BAND:
        return False
    return None


def check_transversal_fixed(m: MetricField, S1: HypersurfaceData,
                            S2: HypersurfaceData, v: np.ndarray,
                            tol: float = RANK_TOL) -> TransversalCheck:
    """Fixed-pair criterion: the normal bundle of S1 and the tangent bundle
    of S2 meet transversally at v iff A_v is not contained in T_pS2."""
    spans = subspace_Av(m, S1, S2, v)
    p = S1.point
    if spans.shape[0] == 0:
        return TransversalCheck(False, None, 0.0, tol)
    n2 = S2.normal
    comps = np.array([m.inner(p, a, n2) for a in spans])
    sv = np.linalg.svd(spans, compute_uv=False)
    scale = float(sv[0]) if sv.size and sv[0] > 0.0 else 1.0
    ratio = float(np.max(np.abs(comps))) / scale
    verdict = _rank_verdict(ratio, tol)
    witness = spans[int(np.argmax(np.abs(comps)))] if verdict else None
    return TransversalCheck(verdict, witness, ratio, tol)


def check_transversal_family(m: MetricField, S1: HypersurfaceData,
                             S2: HypersurfaceData, v: np.ndarray,
                             tol: float = RANK_TOL) -> TransversalCheck:
    """One-parameter-family criterion: transversal iff the fixed-pair
    condition holds (branch a) or alpha^{S2}(v, v) != 0 (branch b)."""
    fixed = check_transversal_fixed(m, S1, S2, v, tol=tol)
    p = S2.point
    avv = second_fundamental_form(m, S2, v, v)
    vn2 = float(m.inner(p, v, v))
    ratio_b = np.sqrt(float(m.inner(p, avv, avv))) / (vn2 + 1e-30)
    verdict_b = _rank_verdict(ratio_b, tol)
    if fixed.transversal and verdict_b:
        branch = "a+b"
    elif fixed.transversal:
        branch = "a"
    elif verdict_b:
        branch = "b"
    else:
        branch = None
    if fixed.transversal or verdict_b:
        verdict = True
        witness = fixed.witness if fixed.transversal else avv
    elif fixed.transversal is None or verdict_b is None:
        verdict = None
        witness = None
    else:
        verdict = False
        witness = None
    return TransversalCheck(verdict, witness,
                            max(fixed.ratio, ratio_b), tol, branch=branch)


# ---------------------------------------------------------------------------
# abstract linear-algebra lemma with brute-force oracle


def _rowspace_contains(space_rows: np.ndarray, vec: np.ndarray,
                       tol: float = 1e-10) -> bool:
    if space_rows.size == 0:
        return bool(np.linalg.norm(vec) <= tol)
    sol, *_ = np.linalg.lstsq(space_rows.T, vec, rcond=None)
    return bool(np.linalg.norm(space_rows.T @ sol - vec)
                <= tol * max(1.0, np.linalg.norm(vec)))


def linalg_lemma_check(V1: np.ndarray, V2: np.ndarray, Vtilde2: np.ndarray,
                       A: np.ndarray, alpha: np.ndarray,
                       tol: float = RANK_TOL):
    """Rank criterion vs brute-force check of W1 + W2 = V ⊕ V.

    V1, V2, Vtilde2: spanning rows of the subspaces (V2 of codimension 1,
    Vtilde2 ⊆ V2).  A: ambient matrix mapping V1 into V1; alpha: ambient
    matrix restricted to V2.  Returns (criterion, brute): criterion is the
    containment test of {A w - alpha w : w ∈ V1 ∩ V2} in V2, brute is the
    assembled rank test in V ⊕ V; the lemma asserts they agree.
    """
    V1 = np.atleast_2d(np.asarray(V1, dtype=float))
    V2 = np.atleast_2d(np.asarray(V2, dtype=float))
    Vt = (np.zeros((0, V1.shape[1])) if Vtilde2 is None or
          np.size(Vtilde2) == 0 else np.atleast_2d(np.asarray(Vtilde2,
                                                              dtype=float)))
    A = np.asarray(A, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    d = V1.shape[1]

    def orth_rows(rows):
        if rows.size == 0:
            return np.zeros((0, d))
        u, sv, vt = np.linalg.svd(rows, full_matrices=False)
        rank = int(np.sum(sv > tol * sv[0])) if sv.size else 0
        return vt[:rank]

    B1 = orth_rows(V1)
    B2 = orth_rows(V2)
    if B2.shape[0] != d - 1:
        raise TransversalityError("V2 must have codimension 1")
    if np.linalg.matrix_rank(np.vstack([B1, B2]), tol=1e-10) != d:
        raise TransversalityError("V1 + V2 must span the ambient space")
    for row in Vt:
        if not _rowspace_contains(B2, row):
            raise TransversalityError("Vtilde2 must be a subspace of V2")
    for row in B1:
        if not _rowspace_contains(B1, A @ row):
            raise TransversalityError("A must map V1 into V1")

    # normal direction of V2 (euclidean)
    _, _, vt = np.linalg.svd(B2, full_matrices=True)
    n2 = vt[-1]

    # V1 ∩ V2 = kernel of the stacked complements (V1-perp rows + n2)
    _, _, vt1 = np.linalg.svd(B1, full_matrices=True)
    comp = np.vstack([vt1[B1.shape[0]:], n2[None, :]])
    _, svc, vtc = np.linalg.svd(comp, full_matrices=True)
    rankc = int(np.sum(svc > tol * svc[0])) if svc.size else 0
    inter = vtc[rankc:]

    if inter.shape[0]:
        Arows = np.asarray([(A - alpha) @ w for w in inter])
        sv = np.linalg.svd(Arows, compute_uv=False)
        scale = float(sv[0]) if sv.size and sv[0] > 0.0 else 1.0
        comps = Arows @ n2
        criterion = bool(np.max(np.abs(comps)) / scale > tol)
    else:
        criterion = False

    rows = []
    for u1 in B1:
        rows.append(np.concatenate([u1, A @ u1]))
    for w in Vt:
        rows.append(np.concatenate([np.zeros(d), w]))
    for u2 in B2:
        rows.append(np.concatenate([u2, alpha @ u2]))
        rows.append(np.concatenate([np.zeros(d), u2]))
    sv = np.linalg.svd(np.asarray(rows), compute_uv=False)
    brute = bool(int(np.sum(sv > max(tol * sv[0], 1e-12))) == 2 * d)
    return criterion, brute


def assemble_lemma_data(m: MetricField, S1: HypersurfaceData,
                        S2: HypersurfaceData, v: np.ndarray):
    """Ambient-matrix data (V1, V2, A, alpha) for linalg_lemma_check.

    The shape operator of S1 at v and the map w -> alpha^{S2}(w, v) are
    extended to ambient matrices through the g-orthonormal bases, so the
    abstract rank criterion can be run as a brute-force oracle against the
    geometric checks on the same instance.
    """
    v = np.asarray(v, dtype=float)
    _check_pair_setup(m, S1, S2, v)
    p = S1.point
    G = m.at(p)
    B1 = S1.basis
    B2 = S2.basis
    A_small = shape_operator(m, S1, v)
    A_amb = np.zeros((p.size, p.size))
    for i in range(B1.shape[0]):
        for j in range(B1.shape[0]):
            A_amb += A_small[i, j] * np.outer(B1[i], G @ B1[j])
    alpha_amb = np.zeros((p.size, p.size))
    for j in range(B2.shape[0]):
        aj = second_fundamental_form(m, S2, B2[j], v)
        alpha_amb += np.outer(aj, G @ B2[j])
    return B1, B2, A_amb, alpha_amb


def reference_instances() -> list:
    """Named geometric instances shared by the demo table and the tests.

    Each entry is a dict with keys name, metric, S1, S2, v:
      - sphere-plane: unit sphere against its tangent plane; every branch
        fails (the plane is totally geodesic and A_v keeps vectors tangent).
      - sphere-cylinder: unit sphere against the unit cylinder through
        p = (1,0,0) with axis along z through (1,-1,0); v points along the
        cylinder's circular direction, so alpha^{S2}(v,v) != 0 fires (b).
      - sphere-cylinder-conformal: the same surfaces under the conformal
        factor f = 1 + 0.3 |x|^2; the verdict survives the metric change.
    """
    p = np.array([1.0, 0.0, 0.0])
    v = np.array([1.0, 0.0, 0.0])

    def psi_sphere(x):
        x = np.asarray(x, dtype=float)
        return float(x @ x - 1.0)

    def grad_sphere(x):
        return 2.0 * np.asarray(x, dtype=float)

    def psi_plane(x):
        return float(np.asarray(x, dtype=float)[1])

    def grad_plane(x):
        out = np.zeros(3)
        out[1] = 1.0
        return out

    def psi_cyl(x):
        x = np.asarray(x, dtype=float)
        return float((x[0] - 1.0) ** 2 + (x[1] + 1.0) ** 2 - 1.0)

    def grad_cyl(x):
        x = np.asarray(x, dtype=float)
        return np.array([2.0 * (x[0] - 1.0), 2.0 * (x[1] + 1.0), 0.0])

    def factor(pts):
        pts = np.asarray(pts, dtype=float)
        return 1.0 + 0.3 * np.sum(pts * pts, axis=-1)

    def grad_log(pts):
        pts = np.asarray(pts, dtype=float)
        return 0.6 * pts / factor(pts)[..., None]

    me = euclidean_metric(3)
    mc = conformal_metric(3, factor, grad_log, label="conformal-0.3r2")
    out = []
    for name, metric, psi2, grad2 in [
            ("sphere-plane", me, psi_plane, grad_plane),
            ("sphere-cylinder", me, psi_cyl, grad_cyl),
            ("sphere-cylinder-conformal", mc, psi_cyl, grad_cyl)]:
        S1 = hypersurface_at(metric, psi_sphere, p, grad_psi=grad_sphere,
                             label="unit-sphere")
        S2 = hypersurface_at(metric, psi2, p, grad_psi=grad2,
                             label=name.split("-", 1)[1])
        out.append({"name": name, "metric": metric, "S1": S1, "S2": S2,
                    "v": v.copy()})
    return out


# ---------------------------------------------------------------------------
# perturbation stability probe


def _perturbed_metric(m: MetricField, scale: float,
                      rng: np.random.Generator) -> MetricField:
    d = m.dim
    E = rng.standard_normal((d, d))
    E = 0.5 * (E + E.T)

    def matrix_fn(x):
        base = m.at(np.asarray(x, dtype=float))
        return base + scale * float(np.trace(base)) / d * E

    return generic_metric(d, matrix_fn, label=f"{m.label}+perturbation")


def _relocate_tangency(m: MetricField, S1: HypersurfaceData,
                       S2: HypersurfaceData, tol: float = 1e-12,
                       max_iters: int = 80) -> np.ndarray:
    """Nearby normal/tangent configuration across the level-set family of S1.

    A tangency of the fixed pair can be a degenerate zero along S1 ∩ S2 and
    vanish under perturbation; persistence is guaranteed only for the family
    of levels of psi1.  So the psi1-level is left free and we solve the two
    conditions q ∈ S2 and dpsi2(g-unit normal of S1's level through q) = 0
    by damped Gauss-Newton from p."""
    p = S1.point

    def residual(q):
        n1 = _unit_normal_field(m, S1, q)
        g2 = np.asarray(S2.grad_psi(q), dtype=float)
        return np.array([float(S2.psi(q)), float(g2 @ n1)])

    q = p.copy()
    fd = 1e-6
    for _ in range(max_iters):
        r = residual(q)
        if np.max(np.abs(r)) <= tol:
            return q
        J = np.zeros((2, q.size))
        for i in range(q.size):
            e = np.zeros(q.size)
            e[i] = fd
            J[:, i] = (residual(q + e) - residual(q - e)) / (2.0 * fd)
        step = np.linalg.lstsq(J, r, rcond=None)[0]
        t = 1.0
        r0 = float(np.linalg.norm(r))
        while t > 1e-6:
            qt = q - t * step
            if float(np.linalg.norm(residual(qt))) < r0:
                q = qt
                break
            t *= 0.5
        else:
            raise TransversalityError("tangency relocation stalled")
    raise TransversalityError("tangency relocation did not converge")


def stability_probe(m: MetricField, S1: HypersurfaceData,
                    S2: HypersurfaceData, v: np.ndarray, scale: float = 1e-3,
                    trials: int = 8, seed: int = 2024) -> dict:
    """Sampled openness check of a true family-transversality instance.

    Perturbs the metric coefficients at the given scale, relocates the
    nearby normal/tangent configuration across the level-set family of S1,
    re-runs the family criterion, and reports the per-trial verdicts.
    """
    base = check_transversal_family(m, S1, S2, v)
    if base.transversal is not True:
        raise TransversalityError("stability probe expects a transversal "
                                  "base instance")
    rng = np.random.default_rng(seed)
    p = S1.point
    vscale = np.sqrt(float(m.inner(p, v, v)))
    verdicts = []
    for _ in range(trials):
        mp = _perturbed_metric(m, scale, rng)
        q = _relocate_tangency(mp, S1, S2)
        level = float(S1.psi(q))
        psi1q = (lambda c: (lambda x, _f=S1.psi: float(_f(x)) - c))(level)
        S1q = hypersurface_at(mp, psi1q, q, grad_psi=S1.grad_psi,
                              label=S1.label)
        S2q = hypersurface_at(mp, S2.psi, q, grad_psi=S2.grad_psi,
                              label=S2.label)
        sign = 1.0 if float(np.dot(S1q.normal, v)) >= 0.0 else -1.0
        vq = sign * vscale * S1q.normal
        res = check_transversal_family(mp, S1q, S2q, vq)
        verdicts.append(res.transversal)
    return {"base": base, "verdicts": verdicts,
            "all_true": all(x is True for x in verdicts),
            "scale": scale, "trials": trials}
