"""Metric fields and level-set domain boundaries on a single chart of R^N.

All geometric data lives in one global coordinate chart.  Points are numpy
arrays of shape (..., dim); every evaluator is vectorized over leading axes.
Metrics come in three flavors:

* ``euclidean``: the identity matrix everywhere.
* ``conformal``: g(x) = F(x)^2 Id for a positive factor F.  Radial profiles
  f(|x|), optionally multiplied by a linear symmetry-breaking term
  (1 + eps <d, x>), are built this way, and so are Jacobi rescalings.
* ``generic``: an arbitrary SPD matrix field, derivatives by central
  differences.

Domains are sublevel sets {phi <= 0} of a smooth function with nonvanishing
gradient on the band |phi| <= delta0.
"""

from __future__ import annotations

import dataclasses
from typing import Callable

import numpy as np

FD_STEP = 1e-5
DEFAULT_DELTA0 = 0.2
K0_INFLATION = 1.05
RETRACT_TOL = 1e-10
RETRACT_MAX_ITERS = 80
DEGENERATE_GRAD_TOL = 1e-8

_HALTON_PRIMES = (2, 3, 5, 7, 11, 13, 17, 19, 23, 29)


class GeometryError(ValueError):
    """Invalid geometric configuration or degenerate data."""


class DegenerateBoundaryError(GeometryError):
    """Level-set gradient vanished where it must not."""


# ---------------------------------------------------------------------------
# metric fields


@dataclasses.dataclass(frozen=True)
class MetricField:
    """A Riemannian metric on the chart.

    factor / grad_log_factor implement the conformal case, matrix_fn the
    generic one.  Exactly one representation is active per family.
    """

    dim: int
    family: str  # "euclidean" | "conformal" | "generic"
    factor: Callable | None = None           # F(x) > 0, (..., dim) -> (...)
    grad_log_factor: Callable | None = None  # grad log F, (..., dim) -> (..., dim)
    matrix_fn: Callable | None = None        # g(x), (..., dim) -> (..., dim, dim)
    label: str = ""
    params: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.dim < 2:
            raise GeometryError("metric dimension must be >= 2")
        if self.family not in ("euclidean", "conformal", "generic"):
            raise GeometryError(f"unknown metric family {self.family!r}")
        if self.family == "conformal" and (self.factor is None or self.grad_log_factor is None):
            raise GeometryError("conformal metric needs factor and grad_log_factor")
        if self.family == "generic" and self.matrix_fn is None:
            raise GeometryError("generic metric needs matrix_fn")

    # -- evaluation ---------------------------------------------------

    def at(self, pts: np.ndarray) -> np.ndarray:
        """Metric matrices at pts, shape (..., dim, dim)."""
        pts = np.asarray(pts, dtype=float)
        base = pts.shape[:-1]
        if self.family == "euclidean":
            g = np.zeros(base + (self.dim, self.dim))
            g[...] = np.eye(self.dim)
            return g
        if self.family == "conformal":
            f = np.asarray(self.factor(pts), dtype=float)
            if np.any(~np.isfinite(f)) or np.any(f <= 0.0):
                raise GeometryError("conformal factor must be finite and positive")
            g = np.zeros(base + (self.dim, self.dim))
            g[...] = np.eye(self.dim)
            return g * (f * f)[..., None, None]
        return np.asarray(self.matrix_fn(pts), dtype=float)

    def inv_at(self, pts: np.ndarray) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.family == "euclidean":
            return self.at(pts)
        if self.family == "conformal":
            f = np.asarray(self.factor(pts), dtype=float)
            g = np.zeros(pts.shape[:-1] + (self.dim, self.dim))
            g[...] = np.eye(self.dim)
            return g / (f * f)[..., None, None]
        return np.linalg.inv(self.at(pts))

    def inner(self, pts: np.ndarray, u: np.ndarray, v: np.ndarray) -> np.ndarray:
        """g_x(u, v), vectorized."""
        if self.family == "euclidean":
            return np.einsum("...i,...i->...", u, v)
        if self.family == "conformal":
            f = np.asarray(self.factor(np.asarray(pts, dtype=float)), dtype=float)
            return f * f * np.einsum("...i,...i->...", u, v)
        g = self.at(pts)
        return np.einsum("...i,...ij,...j->...", u, g, v)

    def norm(self, pts: np.ndarray, u: np.ndarray) -> np.ndarray:
        return np.sqrt(np.maximum(self.inner(pts, u, u), 0.0))

    def dg(self, pts: np.ndarray, step: float = FD_STEP) -> np.ndarray:
        """Coordinate derivatives d_l g_ij, shape (..., dim, dim, dim) = (l, i, j)."""
        pts = np.asarray(pts, dtype=float)
        n = self.dim
        if self.family == "euclidean":
            return np.zeros(pts.shape[:-1] + (n, n, n))
        if self.family == "conformal":
            # d_l (F^2 delta_ij) = 2 F^2 a_l delta_ij with a = grad log F
            f = np.asarray(self.factor(pts), dtype=float)
            a = np.asarray(self.grad_log_factor(pts), dtype=float)
            eye = np.eye(n)
            return 2.0 * (f * f)[..., None, None, None] * a[..., :, None, None] * eye
        out = np.zeros(pts.shape[:-1] + (n, n, n))
        for l in range(n):
            e = np.zeros(n)
            e[l] = step
            out[..., l, :, :] = (self.at(pts + e) - self.at(pts - e)) / (2.0 * step)
        return out

    def christoffel_at(self, pts: np.ndarray) -> np.ndarray:
        """Levi-Civita symbols Gamma^k_ij, shape (..., dim, dim, dim) = (k, i, j)."""
        pts = np.asarray(pts, dtype=float)
        n = self.dim
        if self.family == "euclidean":
            return np.zeros(pts.shape[:-1] + (n, n, n))
        if self.family == "conformal":
            a = np.asarray(self.grad_log_factor(pts), dtype=float)
            eye = np.eye(n)
            # Gamma^k_ij = delta_ki a_j + delta_kj a_i - delta_ij a_k
            t1 = eye[..., :, :, None] * a[..., None, None, :]   # delta_ki a_j
            t2 = eye[..., :, None, :] * a[..., None, :, None]   # delta_kj a_i
            t3 = a[..., :, None, None] * eye[..., None, :, :]   # a_k delta_ij
            return t1 + t2 - t3
        dg = self.dg(pts)
        ginv = np.linalg.inv(self.at(pts))
        # Gamma^k_ij = 1/2 g^{kl} (d_i g_lj + d_j g_li - d_l g_ij)
        term = (np.einsum("...ilj->...lij", dg)
                + np.einsum("...jli->...lij", dg)
                - dg)
        return 0.5 * np.einsum("...kl,...lij->...kij", ginv, term)

    def geodesic_accel(self, pts: np.ndarray, v: np.ndarray) -> np.ndarray:
        """-Gamma^k_ij v^i v^j, vectorized."""
        if self.family == "euclidean":
            return np.zeros_like(np.asarray(v, dtype=float))
        if self.family == "conformal":
            a = np.asarray(self.grad_log_factor(np.asarray(pts, dtype=float)), dtype=float)
            av = np.einsum("...i,...i->...", a, v)
            vv = np.einsum("...i,...i->...", v, v)
            return -(2.0 * av[..., None] * v - vv[..., None] * a)
        gam = self.christoffel_at(pts)
        return -np.einsum("...kij,...i,...j->...k", gam, v, v)


def metric_at(m: MetricField, x: np.ndarray) -> np.ndarray:
    """Metric matrix at a single point, validated symmetric positive definite."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise GeometryError(f"point shape {x.shape} does not match dim {m.dim}")
    g = m.at(x)
    if not np.all(np.isfinite(g)):
        raise GeometryError("metric evaluation produced non-finite entries")
    if not np.allclose(g, g.T, atol=1e-12 * (1.0 + np.abs(g).max())):
        raise GeometryError("metric matrix is not symmetric")
    if np.linalg.eigvalsh(g).min() <= 0.0:
        raise GeometryError("metric matrix is not positive definite")
    return g


def christoffel(m: MetricField, x: np.ndarray) -> np.ndarray:
    """Christoffel symbols Gamma^k_ij at a single point, (k, i, j) indexing."""
    x = np.asarray(x, dtype=float)
    if x.shape != (m.dim,):
        raise GeometryError(f"point shape {x.shape} does not match dim {m.dim}")
    return m.christoffel_at(x)


# -- metric constructors ----------------------------------------------------


def euclidean_metric(dim: int) -> MetricField:
    return MetricField(dim=dim, family="euclidean", label="euclidean",
                       params={"family": "euclidean", "dim": dim})


@dataclasses.dataclass(frozen=True)
class RadialProfile:
    """Positive radial factor f(r).

    kind "polynomial": f(r) = sum coeffs[i] r^i.  Smoothness at the origin
    needs vanishing odd coefficients; shipped profiles obey this.
    kind "exp_half_square": f(r) = exp(r^2 / 2).
    """

    kind: str
    coeffs: tuple = ()

    def __post_init__(self):
        if self.kind not in ("polynomial", "exp_half_square"):
            raise GeometryError(f"unknown radial profile kind {self.kind!r}")
        if self.kind == "polynomial" and len(self.coeffs) == 0:
            raise GeometryError("polynomial profile needs coefficients")

    def value(self, r: np.ndarray) -> np.ndarray:
        r = np.asarray(r, dtype=float)
        if self.kind == "exp_half_square":
            return np.exp(0.5 * r * r)
        out = np.zeros_like(r)
        for c in reversed(self.coeffs):
            out = out * r + c
        return out

    def dlog_over_r(self, r: np.ndarray) -> np.ndarray:
        """f'(r) / (r f(r)), the radial factor of grad log f; smooth for even f."""
        r = np.asarray(r, dtype=float)
        if self.kind == "exp_half_square":
            return np.ones_like(r)
        # f'(r)/r = c1/r + 2 c2 + 3 c3 r + ...; c1 term handled by a guard at r=0
        dpr = np.zeros_like(r)
        for i in reversed(range(2, len(self.coeffs))):
            dpr = dpr * r + i * self.coeffs[i]
        if len(self.coeffs) > 1 and self.coeffs[1] != 0.0:
            with np.errstate(divide="ignore", invalid="ignore"):
                dpr = dpr + np.where(r > 1e-12, self.coeffs[1] / np.where(r > 1e-12, r, 1.0), 0.0)
        return dpr / self.value(r)


def radial_conformal_metric(dim: int, profile: RadialProfile,
                            eps: float = 0.0,
                            direction: np.ndarray | None = None) -> MetricField:
    """g(x) = [f(|x|) (1 + eps <d, x>)]^2 Id.

    eps = 0 gives the rotationally symmetric metric; a nonzero eps tilts the
    conformal factor linearly along d, breaking the symmetry while keeping
    the metric conformal (and SPD as long as 1 + eps <d, x> > 0 on the chart).
    """
    if direction is None:
        d = np.zeros(dim)
        d[0] = 1.0
    else:
        d = np.asarray(direction, dtype=float)
        if d.shape != (dim,):
            raise GeometryError("perturbation direction shape mismatch")

    def factor(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        base = profile.value(r)
        if eps == 0.0:
            return base
        lin = 1.0 + eps * (pts @ d)
        if np.any(lin <= 0.0):
            raise GeometryError("perturbation drove the conformal factor nonpositive")
        return base * lin

    def grad_log(pts):
        pts = np.asarray(pts, dtype=float)
        r = np.linalg.norm(pts, axis=-1)
        a = profile.dlog_over_r(r)[..., None] * pts
        if eps != 0.0:
            lin = 1.0 + eps * (pts @ d)
            a = a + (eps / lin)[..., None] * d
        return a

    fam = "radial_conformal" if eps == 0.0 else "perturbed_radial"
    return MetricField(
        dim=dim, family="conformal", factor=factor, grad_log_factor=grad_log,
        label=fam,
        params={"family": fam, "dim": dim,
                "profile": {"kind": profile.kind, "coeffs": list(profile.coeffs)},
                "perturbation": {"amplitude": eps, "direction": list(d)}})


def conformal_metric(dim: int, factor: Callable, grad_log_factor: Callable,
                     label: str = "conformal", params: dict | None = None) -> MetricField:
    return MetricField(dim=dim, family="conformal", factor=factor,
                       grad_log_factor=grad_log_factor, label=label,
                       params=params or {"family": "conformal", "dim": dim})


def generic_metric(dim: int, matrix_fn: Callable, label: str = "generic") -> MetricField:
    return MetricField(dim=dim, family="generic", matrix_fn=matrix_fn, label=label,
                       params={"family": "generic", "dim": dim})


# ---------------------------------------------------------------------------
# domain boundaries


@dataclasses.dataclass(frozen=True)
class DomainBoundary:
    """Sublevel-set domain {phi <= 0} with band constant delta0.

    grad_phi_euc / hess_phi_euc are coordinate (euclidean) derivatives of phi;
    missing closures fall back to central differences.  boundary_radius maps a
    unit direction u to the positive root of phi(t u) = 0 (domains are assumed
    star-shaped about the origin).
    """

    dim: int
    phi: Callable                       # (..., dim) -> (...)
    grad_phi_euc: Callable | None = None
    hess_phi_euc: Callable | None = None
    boundary_radius: Callable | None = None
    delta0: float = DEFAULT_DELTA0
    label: str = ""
    params: dict = dataclasses.field(default_factory=dict)

    def __post_init__(self):
        if self.delta0 <= 0.0:
            raise GeometryError("delta0 must be positive")

    def grad_euc(self, pts: np.ndarray, step: float = FD_STEP) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.grad_phi_euc is not None:
            return np.asarray(self.grad_phi_euc(pts), dtype=float)
        out = np.zeros_like(pts)
        for l in range(self.dim):
            e = np.zeros(self.dim)
            e[l] = step
            out[..., l] = (self.phi(pts + e) - self.phi(pts - e)) / (2.0 * step)
        return out

    def hess_euc(self, pts: np.ndarray, step: float = FD_STEP) -> np.ndarray:
        pts = np.asarray(pts, dtype=float)
        if self.hess_phi_euc is not None:
            return np.asarray(self.hess_phi_euc(pts), dtype=float)
        n = self.dim
        out = np.zeros(pts.shape[:-1] + (n, n))
        for l in range(n):
            e = np.zeros(n)
            e[l] = step
            out[..., l, :] = (self.grad_euc(pts + e, step) - self.grad_euc(pts - e, step)) / (2.0 * step)
        return 0.5 * (out + np.swapaxes(out, -1, -2))

    def radius(self, dirs: np.ndarray) -> np.ndarray:
        """Boundary radius rho(u) along unit directions."""
        dirs = np.asarray(dirs, dtype=float)
        if self.boundary_radius is not None:
            return np.asarray(self.boundary_radius(dirs), dtype=float)
        return _radius_by_bisection(self.phi, dirs)


def _radius_by_bisection(phi: Callable, dirs: np.ndarray) -> np.ndarray:
    dirs = np.atleast_2d(np.asarray(dirs, dtype=float))
    lo = np.zeros(dirs.shape[0])
    hi = np.full(dirs.shape[0], 1.0)
    # grow hi until phi > 0
    for _ in range(60):
        vals = phi(hi[:, None] * dirs)
        grow = vals <= 0.0
        if not np.any(grow):
            break
        hi[grow] *= 2.0
        if hi.max() > 1e8:
            raise GeometryError("no boundary crossing along a sampled direction")
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        inside = phi(mid[:, None] * dirs) <= 0.0
        lo = np.where(inside, mid, lo)
        hi = np.where(inside, hi, mid)
    return 0.5 * (lo + hi)


def ball_boundary(dim: int, radius: float = 1.0,
                  delta0: float = DEFAULT_DELTA0) -> DomainBoundary:
    """phi(x) = |x| - radius, the euclidean signed distance to the sphere."""
    r0 = float(radius)

    def phi(pts):
        return np.linalg.norm(np.asarray(pts, dtype=float), axis=-1) - r0

    def grad(pts):
        pts = np.asarray(pts, dtype=float)
        rr = np.linalg.norm(pts, axis=-1)
        rr = np.where(rr > 1e-300, rr, 1.0)
        return pts / rr[..., None]

    def hess(pts):
        pts = np.asarray(pts, dtype=float)
        rr = np.linalg.norm(pts, axis=-1)
        rr = np.where(rr > 1e-300, rr, 1.0)
        u = pts / rr[..., None]
        eye = np.eye(dim)
        return (eye - u[..., :, None] * u[..., None, :]) / rr[..., None, None]

    return DomainBoundary(
        dim=dim, phi=phi, grad_phi_euc=grad, hess_phi_euc=hess,
        boundary_radius=lambda dirs: np.full(np.asarray(dirs).shape[:-1], r0),
        delta0=delta0, label="ball",
        params={"kind": "ball", "radius": r0, "dim": dim})


def ellipse_boundary(semi_axes, delta0: float = DEFAULT_DELTA0) -> DomainBoundary:
    """phi(x) = sum (x_i / a_i)^2 - 1."""
    a = np.asarray(semi_axes, dtype=float)
    if np.any(a <= 0.0):
        raise GeometryError("semi axes must be positive")
    dim = a.shape[0]
    inv2 = 1.0 / (a * a)

    def phi(pts):
        pts = np.asarray(pts, dtype=float)
        return np.einsum("...i,i->...", pts * pts, inv2) - 1.0

    def grad(pts):
        return 2.0 * np.asarray(pts, dtype=float) * inv2

    def hess(pts):
        pts = np.asarray(pts, dtype=float)
        h = np.zeros(pts.shape[:-1] + (dim, dim))
        h[...] = 2.0 * np.diag(inv2)
        return h

    def radius(dirs):
        dirs = np.asarray(dirs, dtype=float)
        q = np.einsum("...i,i->...", dirs * dirs, inv2)
        return 1.0 / np.sqrt(q)

    return DomainBoundary(
        dim=dim, phi=phi, grad_phi_euc=grad, hess_phi_euc=hess,
        boundary_radius=radius, delta0=delta0, label="ellipse",
        params={"kind": "ellipse", "semi_axes": list(a), "dim": dim})


def level_set_boundary(dim: int, phi: Callable, grad: Callable | None = None,
                       hess: Callable | None = None,
                       delta0: float = DEFAULT_DELTA0, label: str = "level_set",
                       params: dict | None = None) -> DomainBoundary:
    return DomainBoundary(dim=dim, phi=phi, grad_phi_euc=grad, hess_phi_euc=hess,
                          delta0=delta0, label=label,
                          params=params or {"kind": label, "dim": dim})


# -- boundary operations ----------------------------------------------------


def grad_phi_riem(b: DomainBoundary, m: MetricField, pts: np.ndarray) -> np.ndarray:
    """Riemannian gradient g^{-1} dphi."""
    dphi = b.grad_euc(pts)
    if m.family == "euclidean":
        return dphi
    if m.family == "conformal":
        f = np.asarray(m.factor(np.asarray(pts, dtype=float)), dtype=float)
        return dphi / (f * f)[..., None]
    ginv = m.inv_at(pts)
    return np.einsum("...ij,...j->...i", ginv, dphi)


def grad_phi_norm(b: DomainBoundary, m: MetricField, pts: np.ndarray) -> np.ndarray:
    """|grad phi|_g = sqrt(dphi . g^{-1} dphi)."""
    dphi = b.grad_euc(pts)
    gro = grad_phi_riem(b, m, pts)
    return np.sqrt(np.maximum(np.einsum("...i,...i->...", dphi, gro), 0.0))


def unit_normal(b: DomainBoundary, m: MetricField, p: np.ndarray) -> np.ndarray:
    """Outward unit normal grad phi / |grad phi|_g at a band point."""
    p = np.asarray(p, dtype=float)
    val = np.asarray(b.phi(p), dtype=float)
    if np.any(np.abs(val) > b.delta0 * (1.0 + 1e-9) + 1e-12):
        raise GeometryError("unit_normal called outside the band |phi| <= delta0")
    gro = grad_phi_riem(b, m, p)
    nrm = grad_phi_norm(b, m, p)
    if np.any(nrm < DEGENERATE_GRAD_TOL):
        raise DegenerateBoundaryError("level-set gradient vanished in the band")
    return gro / np.asarray(nrm)[..., None]


def retract_to_boundary(b: DomainBoundary, p: np.ndarray) -> np.ndarray:
    """Project a band point onto {phi = 0} along the gradient flow of phi.

    Newton steps x <- x - phi(x) dphi / |dphi|^2 follow the euclidean gradient
    line; for conformal metrics the Riemannian gradient is parallel to the
    euclidean one, so the flow lines (and the retraction) coincide.
    """
    p = np.asarray(p, dtype=float)
    single = (p.ndim == 1)
    x = np.atleast_2d(p).astype(float).copy()
    val = np.asarray(b.phi(x), dtype=float)
    if np.any(np.abs(val) > b.delta0 * (1.0 + 1e-9) + 1e-12):
        raise GeometryError("retract_to_boundary called outside the band")
    for _ in range(RETRACT_MAX_ITERS):
        val = np.asarray(b.phi(x), dtype=float)
        live = np.abs(val) > RETRACT_TOL
        if not np.any(live):
            break
        dphi = b.grad_euc(x[live])
        denom = np.einsum("...i,...i->...", dphi, dphi)
        if np.any(denom < DEGENERATE_GRAD_TOL ** 2):
            raise DegenerateBoundaryError("retraction hit a degenerate gradient")
        x[live] = x[live] - (val[live] / denom)[..., None] * dphi
    else:
        raise GeometryError("retraction failed to converge")
    return x[0] if single else x


def hessian_phi(b: DomainBoundary, m: MetricField, p: np.ndarray) -> np.ndarray:
    """Second covariant differential of phi as a symmetric bilinear form:
    B_ij = d_i d_j phi - Gamma^k_ij d_k phi."""
    p = np.asarray(p, dtype=float)
    h = b.hess_euc(p)
    gam = m.christoffel_at(p)
    dphi = b.grad_euc(p)
    out = h - np.einsum("...kij,...k->...ij", gam, dphi)
    return 0.5 * (out + np.swapaxes(out, -1, -2))


def halton(count: int, dim: int, offset: int = 0) -> np.ndarray:
    """Deterministic Halton sequence in (0, 1)^dim; prefix-nested by count."""
    if dim > len(_HALTON_PRIMES):
        raise GeometryError("halton supports at most 10 dimensions")
    idx = np.arange(offset + 1, offset + count + 1)
    out = np.zeros((count, dim))
    for j in range(dim):
        base = _HALTON_PRIMES[j]
        i = idx.astype(np.int64)
        f = np.ones(count)
        r = np.zeros(count)
        while np.any(i > 0):
            f = f / base
            r = r + f * (i % base)
            i = i // base
        out[:, j] = r
    return out


def domain_samples(b: DomainBoundary, samples: int) -> np.ndarray:
    """Prefix-nested quasi-uniform sample of the closed domain {phi <= 0}."""
    if samples < 1:
        raise GeometryError("need at least one sample")
    rmax = float(np.max(b.radius(_direction_probe(b.dim))))
    kept = []
    total = 0
    offset = 0
    while total < samples:
        chunk = max(256, 2 * (samples - total))
        u = halton(chunk, b.dim, offset=offset)
        offset += chunk
        pts = (2.0 * u - 1.0) * rmax
        inside = np.asarray(b.phi(pts), dtype=float) <= 0.0
        sel = pts[inside]
        kept.append(sel)
        total += sel.shape[0]
        if offset > 10000 * samples:
            raise GeometryError("domain sampling failed; is the domain empty?")
    return np.concatenate(kept, axis=0)[:samples]


def _direction_probe(dim: int) -> np.ndarray:
    u = halton(128, dim)
    v = 2.0 * u - 1.0
    nrm = np.linalg.norm(v, axis=-1)
    good = nrm > 1e-9
    v = v[good] / nrm[good][:, None]
    axes = np.concatenate([np.eye(dim), -np.eye(dim)], axis=0)
    return np.concatenate([axes, v], axis=0)


def estimate_K0(b: DomainBoundary, m: MetricField, samples: int = 4096) -> float:
    """sup over the closed domain of |grad phi|_g, sampled and inflated 5%.

    The raw sample max is monotone in the sample count (prefix-nested Halton
    points), the returned value is 1.05 times the raw max.
    """
    pts = domain_samples(b, samples)
    raw = float(np.max(grad_phi_norm(b, m, pts)))
    # include exact boundary points as well: the band is where the bound bites
    dirs = _direction_probe(b.dim)
    bpts = b.radius(dirs)[:, None] * dirs
    raw = max(raw, float(np.max(grad_phi_norm(b, m, bpts))))
    if raw < DEGENERATE_GRAD_TOL:
        raise DegenerateBoundaryError("level-set gradient vanishes on the domain")
    return K0_INFLATION * raw


def validate_band(b: DomainBoundary, m: MetricField, samples: int = 512) -> float:
    """Check |grad phi|_g > 0 throughout the band |phi| <= delta0 (sampled).

    Returns the minimum sampled gradient norm; raises if it is degenerate.
    """
    dirs = _direction_probe(b.dim)
    rho = b.radius(dirs)
    ts = np.linspace(-1.0, 1.0, 17)
    mins = np.inf
    for t in ts:
        # walk along the gradient line from the boundary by ~ t * delta0
        pts = rho[:, None] * dirs
        dphi = b.grad_euc(pts)
        nn = np.linalg.norm(dphi, axis=-1)
        nn = np.where(nn > 1e-300, nn, 1.0)
        probe = pts + (t * b.delta0)[None] * (dphi / nn[:, None]) if np.ndim(t) else pts + t * b.delta0 * (dphi / nn[:, None])
        vals = np.asarray(b.phi(probe), dtype=float)
        in_band = np.abs(vals) <= b.delta0
        if np.any(in_band):
            mins = min(mins, float(np.min(grad_phi_norm(b, m, probe[in_band]))))
    if not np.isfinite(mins) or mins < DEGENERATE_GRAD_TOL:
        raise DegenerateBoundaryError(
            "level-set gradient degenerates inside the band; shrink delta0")
    return mins
