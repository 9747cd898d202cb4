"""Discrete curves with boundary endpoints and the energy functional.

A path is n+1 nodes on the uniform parameter grid s_i = i/n.  The energy is
the midpoint-rule value of int_0^1 g(xdot, xdot) ds:

    F(x) = n * sum_i dx_i^T g(mid_i) dx_i,   dx_i = x_{i+1} - x_i.

The reversal x(1-s) permutes both nodes and segments, so F is exactly
reversal invariant.
"""

from __future__ import annotations

import dataclasses

import numpy as np

from .geometry import DomainBoundary, GeometryError, MetricField, estimate_K0

M0_INFLATION = 1.05


class ConsistencyError(RuntimeError):
    """A structural inequality the constants must satisfy failed."""


@dataclasses.dataclass(frozen=True)
class DiscretePath:
    """Uniform-grid nodes of a curve, shape (n+1, dim).  Nodes are read-only."""

    nodes: np.ndarray

    def __post_init__(self):
        arr = np.array(self.nodes, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise GeometryError("a path needs at least two nodes of shape (n+1, dim)")
        arr.setflags(write=False)
        object.__setattr__(self, "nodes", arr)

    @property
    def n(self) -> int:
        return self.nodes.shape[0] - 1

    @property
    def dim(self) -> int:
        return self.nodes.shape[1]

    def params(self) -> np.ndarray:
        return np.arange(self.n + 1) / self.n

    def start(self) -> np.ndarray:
        return self.nodes[0]

    def end(self) -> np.ndarray:
        return self.nodes[-1]


@dataclasses.dataclass(frozen=True)
class TangentField:
    """Node-wise variation vectors along a path, shape (n+1, dim)."""

    vectors: np.ndarray

    def __post_init__(self):
        arr = np.array(self.vectors, dtype=float)
        if arr.ndim != 2 or arr.shape[0] < 2:
            raise GeometryError("a tangent field needs shape (n+1, dim)")
        arr.setflags(write=False)
        object.__setattr__(self, "vectors", arr)


def _check_same_grid(x1: DiscretePath, x2: DiscretePath) -> None:
    if x1.nodes.shape != x2.nodes.shape:
        raise GeometryError("paths live on different grids")


def midpoints(x: DiscretePath) -> np.ndarray:
    return 0.5 * (x.nodes[:-1] + x.nodes[1:])


def segment_energies(m: MetricField, x: DiscretePath) -> np.ndarray:
    """Per-segment contributions n * dx^T g(mid) dx; their sum is F."""
    dx = np.diff(x.nodes, axis=0)
    return x.n * m.inner(midpoints(x), dx, dx)


def energy(m: MetricField, x: DiscretePath) -> float:
    return float(np.sum(segment_energies(m, x)))


def energy_gradient(m: MetricField, x: DiscretePath) -> TangentField:
    """Exact coordinate gradient of the discrete energy.

    The euclidean pairing sum_k grad_k . V_k reproduces the derivative of F
    along any node variation V.
    """
    n = x.n
    dx = np.diff(x.nodes, axis=0)
    mid = midpoints(x)
    g = m.at(mid)
    gdx = np.einsum("sij,sj->si", g, dx)

    grad = np.zeros_like(x.nodes)
    grad[:-1] -= 2.0 * n * gdx
    grad[1:] += 2.0 * n * gdx

    if m.family != "euclidean":
        # metric-variation term: d/dx_k of g(mid_i) contributes with weight 1/2
        # on both adjacent nodes: T_i^(l) = dx^T (d_l g)(mid) dx
        if m.family == "conformal":
            f = np.asarray(m.factor(mid), dtype=float)
            a = np.asarray(m.grad_log_factor(mid), dtype=float)
            dxdx = np.einsum("si,si->s", dx, dx)
            t = 2.0 * (f * f * dxdx)[:, None] * a
        else:
            dg = m.dg(mid)
            t = np.einsum("si,slij,sj->sl", dx, dg, dx)
        grad[:-1] += 0.5 * n * t
        grad[1:] += 0.5 * n * t
    return TangentField(grad)


def pair(grad: TangentField, v: TangentField) -> float:
    """dF(x)[V] as the euclidean pairing of the node gradient with V."""
    return float(np.sum(grad.vectors * v.vectors))


def reverse(x: DiscretePath) -> DiscretePath:
    return DiscretePath(x.nodes[::-1])


def reverse_field(v: TangentField) -> TangentField:
    return TangentField(v.vectors[::-1])


def _star_parts(delta: np.ndarray, n: int) -> float:
    ends = max(float(np.linalg.norm(delta[0])), float(np.linalg.norm(delta[-1])))
    dd = np.diff(delta, axis=0)
    return ends + float(np.sqrt(n * np.sum(dd * dd)))


def dist_star(x1: DiscretePath, x2: DiscretePath) -> float:
    """max of endpoint gaps plus the L^2 norm of the derivative gap."""
    _check_same_grid(x1, x2)
    return _star_parts(x2.nodes - x1.nodes, x1.n)


def dist_inf(x1: DiscretePath, x2: DiscretePath) -> float:
    _check_same_grid(x1, x2)
    return float(np.max(np.linalg.norm(x2.nodes - x1.nodes, axis=-1)))


def norm_star(v: TangentField) -> float:
    return _star_parts(v.vectors, v.vectors.shape[0] - 1)


def chord(A: np.ndarray, B: np.ndarray, n: int,
          boundary: DomainBoundary | None = None) -> DiscretePath:
    """Straight chord in normalized coordinates between boundary points.

    The normalization map sends x to x / rho(x/|x|) (identity for the unit
    ball); chords are linear interpolations there and mapped back.  For convex
    domains the interior of the chord stays strictly inside.
    """
    A = np.asarray(A, dtype=float)
    B = np.asarray(B, dtype=float)
    s = (np.arange(n + 1) / n)[:, None]
    if boundary is None or boundary.label == "ball":
        scale = 1.0 if boundary is None else boundary.params.get("radius", 1.0)
        nodes = (1.0 - s) * A + s * B
        del scale
        return DiscretePath(nodes)
    psi_a = _normalize_in(boundary, A)
    psi_b = _normalize_in(boundary, B)
    u = (1.0 - s) * psi_a + s * psi_b
    return DiscretePath(_normalize_out(boundary, u))


def _masked_radius(b: DomainBoundary, x: np.ndarray):
    """Boundary radius along x directions; zero vectors get placeholder 1.

    Radius closures with bisection fallbacks cannot take degenerate
    directions, so those rows never reach b.radius."""
    x = np.asarray(x, dtype=float)
    flat = x.reshape(-1, x.shape[-1])
    r = np.linalg.norm(flat, axis=-1)
    rho = np.ones(flat.shape[0])
    mask = r > 1e-14
    if np.any(mask):
        rho[mask] = np.asarray(b.radius(flat[mask] / r[mask, None]),
                               dtype=float)
    shape = x.shape[:-1]
    return rho.reshape(shape), r.reshape(shape)


def _normalize_in(b: DomainBoundary, x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    rho, r = _masked_radius(b, x)
    return np.where((r > 1e-14)[..., None], x / rho[..., None], x)


def _normalize_out(b: DomainBoundary, u: np.ndarray) -> np.ndarray:
    u = np.asarray(u, dtype=float)
    rho, r = _masked_radius(b, u)
    return np.where((r > 1e-14)[..., None], u * rho[..., None], u)


def estimate_M0(m: MetricField, b: DomainBoundary, grid: int = 16,
                k0: float | None = None, n_nodes: int = 64) -> float:
    """sqrt of the (5% inflated) max chord-family energy.

    Raises ConsistencyError when the resulting M0 fails M0 > delta0 / K0,
    which signals a badly scaled delta0 / K0 / grid combination.
    """
    if grid < 8:
        raise GeometryError("need at least 8 boundary samples per angle coordinate")
    from .sampling import boundary_grid
    pts = boundary_grid(b, grid)
    best = 0.0
    for i in range(pts.shape[0]):
        for j in range(i + 1, pts.shape[0]):
            c = chord(pts[i], pts[j], n_nodes, b)
            best = max(best, energy(m, c))
    if k0 is None:
        k0 = estimate_K0(b, m)
    m0 = float(np.sqrt(M0_INFLATION * best))
    if not m0 > b.delta0 / k0:
        raise ConsistencyError(
            f"chord energy bound M0={m0:.6g} fails M0 > delta0/K0="
            f"{b.delta0 / k0:.6g}")
    return m0


@dataclasses.dataclass(frozen=True)
class StripReport:
    """Band bound diagnostics for a parameter subinterval of a path."""

    max_abs_phi: float
    bound: float
    ok: bool
    sub_energy: float
    min_phi: float
    corollary_applicable: bool
    corollary_ok: bool
    floor: float


def strip_bound_check(b: DomainBoundary, m: MetricField, x: DiscretePath,
                      a_idx: int, b_idx: int, k0: float | None = None,
                      slack_rel: float = 1e-3, slack_abs: float = 1e-9) -> StripReport:
    """Check |phi| <= K0 sqrt((b-a) * subinterval energy) along x[a..b].

    Also evaluates the small-strip consequence: a segment with both ends on
    the boundary and energy <= delta0^2/K0^2 stays above phi >= -delta0.
    """
    if not (0 <= a_idx < b_idx <= x.n):
        raise GeometryError("need 0 <= a_idx < b_idx <= n")
    if k0 is None:
        k0 = estimate_K0(b, m)
    phis = np.asarray(b.phi(x.nodes[a_idx:b_idx + 1]), dtype=float)
    if abs(float(phis[0])) > 1e-8:
        raise GeometryError("strip bound needs phi = 0 at the left index")
    seg = segment_energies(m, x)[a_idx:b_idx]
    sub_energy = float(np.sum(seg))
    length = (b_idx - a_idx) / x.n
    bound = k0 * float(np.sqrt(length * max(sub_energy, 0.0)))
    max_abs = float(np.max(np.abs(phis)))
    ok = max_abs <= bound * (1.0 + slack_rel) + slack_abs
    floor = (b.delta0 / k0) ** 2
    applicable = (sub_energy <= floor) and abs(float(phis[-1])) <= 1e-8
    min_phi = float(np.min(phis))
    corollary_ok = (not applicable) or (min_phi >= -b.delta0 * (1.0 + slack_rel) - slack_abs)
    return StripReport(max_abs_phi=max_abs, bound=bound, ok=ok,
                       sub_energy=sub_energy, min_phi=min_phi,
                       corollary_applicable=applicable, corollary_ok=corollary_ok,
                       floor=floor)


def in_path_space(b: DomainBoundary, x: DiscretePath, tol: float = 1e-8) -> bool:
    """Nodes inside the closed domain, endpoints on the boundary."""
    phis = np.asarray(b.phi(x.nodes), dtype=float)
    if np.any(phis > tol):
        return False
    return abs(float(phis[0])) <= tol and abs(float(phis[-1])) <= tol
