"""Multistart search for distinct orthogonal geodesic chords.

The chord family over a boundary grid seeds descent flows restricted to the
energy strip [delta0^2/K0^2, M0^2]; flow outputs seed the shooting Newton
refinement, and verified chords enter a catalog deduplicated modulo path
reversal.  The count is a numerical census, not a proof.
"""

from __future__ import annotations

import dataclasses
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from .geometry import (DomainBoundary, GeometryError, MetricField,
                       estimate_K0, retract_to_boundary)
from . import pathspace
from .pathspace import ConsistencyError, DiscretePath, chord, estimate_M0
from . import descent
from .descent import CriticalReport, FlowConfig, ToleranceSpec
from . import shooting
from .sampling import boundary_grid

HAUSDORFF_TOL_FACTOR = 1e-3
ENERGY_TOL_FACTOR = 1e-4
INJECTIVITY_SAFETY = 0.8


@dataclasses.dataclass(frozen=True)
class CatalogEntry:
    path: DiscretePath
    energy: float
    endpoints: tuple
    report: CriticalReport
    seed_index: int


@dataclasses.dataclass(frozen=True)
class OGCCatalog:
    entries: tuple
    target_n: int
    strip: tuple          # (lower, upper) energy strip actually used
    seeds_total: int
    seeds_in_strip: int
    flows_collapsed: int
    refines_converged: int

    @property
    def count(self) -> int:
        return len(self.entries)

    @property
    def spectrum(self) -> tuple:
        return tuple(e.energy for e in self.entries)

    def meets_target(self) -> bool:
        return self.count >= self.target_n


@dataclasses.dataclass(frozen=True)
class MultistartConfig:
    grid: int = 16
    n_nodes: int = 128
    target_n: int | None = None          # default: ambient dimension
    flow_max_iters: int = 300
    flow_step_scale: float = 1e-2
    refine_step: float = shooting.DEFAULT_STEP
    refine_max_len: float = 40.0
    refine_tol: float = 1e-10
    refine_max_iters: int = 50
    hausdorff_tol: float | None = None   # default 1e-3 * domain diameter
    energy_tol_factor: float = ENERGY_TOL_FACTOR
    seed_merge_tol: float = 1e-8
    workers: int = 1
    tolerances: ToleranceSpec | None = None

    def __post_init__(self):
        if self.grid < 2:
            raise ValueError("multistart grid needs at least 2 points")


def domain_diameter(b: DomainBoundary, samples: int = 256) -> float:
    """Extent proxy: twice the largest boundary radius over a direction fan."""
    if b.dim == 2:
        thetas = 2.0 * np.pi * np.arange(samples) / samples
        dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
    else:
        rng = np.random.default_rng(1234)
        dirs = rng.standard_normal((samples, b.dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    radii = [b.radius(u) for u in dirs]
    return 2.0 * float(np.max(radii))


def _node_set_hausdorff(a: np.ndarray, c: np.ndarray) -> float:
    d = np.linalg.norm(a[:, None, :] - c[None, :, :], axis=2)
    return max(float(d.min(axis=1).max()), float(d.min(axis=0).max()))


def distinct(m: MetricField, x1: DiscretePath, x2: DiscretePath,
             tol: float, energy_tol_factor: float = ENERGY_TOL_FACTOR) -> bool:
    """True when the two chords have distinct images.

    The test is the symmetric Hausdorff distance between node sets; x2 and
    its reverse are both compared, so reversal never separates.  Coincident
    images must carry the same energy; violations raise ConsistencyError.
    """
    h = min(_node_set_hausdorff(x1.nodes, x2.nodes),
            _node_set_hausdorff(x1.nodes, x2.nodes[::-1]))
    if h >= tol:
        return True
    f1 = pathspace.energy(m, x1)
    f2 = pathspace.energy(m, x2)
    if abs(f1 - f2) >= energy_tol_factor * (1.0 + min(f1, f2)):
        raise ConsistencyError(
            "coincident chord images with mismatched energies: "
            f"{f1!r} vs {f2!r}")
    return False


def canonical_orientation(x: DiscretePath) -> DiscretePath:
    """Representative of {x, reverse(x)} with lexicographically smaller start."""
    a = tuple(x.nodes[0])
    c = tuple(x.nodes[-1])
    return pathspace.reverse(x) if c < a else x


def _seed_pairs(b: DomainBoundary, grid: int):
    pts = boundary_grid(b, grid)
    k = len(pts)
    pairs = [(i, j) for i in range(k) for j in range(i + 1, k)]
    return pts, pairs


def multistart(m: MetricField, b: DomainBoundary,
               cfg: MultistartConfig | None = None) -> OGCCatalog:
    """Census of distinct OGCs found from a boundary chord grid.

    Pipeline per seed chord: energy-strip filter, descent flow with collapse
    floor, shooting refinement from the flowed start endpoint, verification,
    catalog insertion modulo reversal.  Order is deterministic (grid order);
    worker threads only parallelize the flow stage.
    """
    cfg = cfg or MultistartConfig()
    target_n = cfg.target_n if cfg.target_n is not None else m.dim
    k0 = estimate_K0(b, m)
    m0 = estimate_M0(m, b, k0=k0)
    lower = (b.delta0 / k0) ** 2
    upper = m0 ** 2
    pts, pairs = _seed_pairs(b, cfg.grid)
    seeds_total = len(pairs)

    chords = []
    for si, (i, j) in enumerate(pairs):
        x = chord(pts[i], pts[j], cfg.n_nodes, b)
        f = pathspace.energy(m, x)
        if lower <= f <= upper:
            chords.append((si, x))

    flow_cfg = FlowConfig(max_iters=cfg.flow_max_iters,
                          step_scale=cfg.flow_step_scale,
                          energy_floor=0.5 * lower)

    def run_flow(item):
        si, x = item
        return si, descent.flow(m, b, x, flow_cfg)

    if cfg.workers > 1:
        with ThreadPoolExecutor(max_workers=cfg.workers) as ex:
            flowed = list(ex.map(run_flow, chords))
    else:
        flowed = [run_flow(item) for item in chords]

    flows_collapsed = sum(1 for _, r in flowed if r.reason == "collapsed")

    # refine from the flowed start endpoints, merging near-duplicate seeds
    seed_pts = []
    seed_idx = []
    for si, r in flowed:
        if r.reason == "collapsed":
            continue
        p = r.path.nodes[0]
        if any(np.linalg.norm(p - q) < cfg.seed_merge_tol for q in seed_pts):
            continue
        seed_pts.append(p)
        seed_idx.append(si)

    results = []
    if seed_pts:
        results = shooting.refine_batch(
            m, b, np.asarray(seed_pts), step=cfg.refine_step,
            max_len=cfg.refine_max_len, n_nodes=cfg.n_nodes,
            tol=cfg.refine_tol, max_iters=cfg.refine_max_iters,
            tolerances=cfg.tolerances)

    htol = (cfg.hausdorff_tol if cfg.hausdorff_tol is not None
            else HAUSDORFF_TOL_FACTOR * domain_diameter(b))

    entries = []
    refines_converged = 0
    for si, res in sorted(zip(seed_idx, results), key=lambda t: t[0]):
        if not res.converged or res.path is None:
            continue
        refines_converged += 1
        rep = res.report
        if rep is None or rep.classification != "OGC":
            continue
        x = canonical_orientation(res.path)
        if any(not distinct(m, e.path, x, htol, cfg.energy_tol_factor)
               for e in entries):
            continue
        entries.append(CatalogEntry(
            path=x, energy=float(pathspace.energy(m, x)),
            endpoints=(tuple(x.nodes[0]), tuple(x.nodes[-1])),
            report=rep, seed_index=si))

    entries.sort(key=lambda e: (e.energy, e.seed_index))
    return OGCCatalog(entries=tuple(entries), target_n=target_n,
                      strip=(lower, upper), seeds_total=seeds_total,
                      seeds_in_strip=len(chords),
                      flows_collapsed=flows_collapsed,
                      refines_converged=refines_converged)


# ---------------------------------------------------------------------------
# endpoint-separating homotopy on the boundary


class _CircleBoundaryMetric:
    """Arc-length table for a dim-2 boundary under the induced metric."""

    def __init__(self, m: MetricField, b: DomainBoundary, samples: int = 4096):
        thetas = 2.0 * np.pi * np.arange(samples + 1) / samples
        dirs = np.stack([np.cos(thetas), np.sin(thetas)], axis=1)
        radii = np.array([b.radius(u) for u in dirs])
        pts = radii[:, None] * dirs
        mids = 0.5 * (pts[1:] + pts[:-1])
        seg = np.diff(pts, axis=0)
        glen = np.sqrt(m.inner(mids, seg, seg))
        self.thetas = thetas
        self.cum = np.concatenate([[0.0], np.cumsum(glen)])
        self.total = float(self.cum[-1])
        self.b = b

    def arcpos(self, p: np.ndarray) -> float:
        th = float(np.arctan2(p[1], p[0])) % (2.0 * np.pi)
        return float(np.interp(th, self.thetas, self.cum))

    def point_at(self, s: float) -> np.ndarray:
        s = s % self.total
        th = float(np.interp(s, self.cum, self.thetas))
        u = np.array([np.cos(th), np.sin(th)])
        return self.b.radius(u) * u

    def dist(self, pa: np.ndarray, pb: np.ndarray) -> float:
        d = abs(self.arcpos(pb) - self.arcpos(pa))
        return min(d, self.total - d)


class _SphereBoundaryMetric:
    """Great-circle geometry for round-sphere boundaries (dim >= 3) whose
    induced metric is a constant multiple of the round one."""

    def __init__(self, m: MetricField, b: DomainBoundary, samples: int = 64):
        rng = np.random.default_rng(99)
        dirs = rng.standard_normal((samples, b.dim))
        dirs /= np.linalg.norm(dirs, axis=1)[:, None]
        radii = np.array([b.radius(u) for u in dirs])
        self.r = float(radii[0])
        if np.max(np.abs(radii - self.r)) > 1e-8 * (1.0 + self.r):
            raise GeometryError(
                "separating homotopy needs a round sphere boundary in dim>=3")
        pts = self.r * dirs
        tangs = np.zeros_like(pts)
        tangs[:, 0] = -pts[:, 1] / self.r
        tangs[:, 1] = pts[:, 0] / self.r
        norms = np.where(np.linalg.norm(tangs, axis=1) < 1e-9, 1.0,
                         np.linalg.norm(tangs, axis=1))
        tangs /= norms[:, None]
        factors = np.sqrt(m.inner(pts, tangs, tangs))
        self.factor = float(factors[0])
        if np.max(np.abs(factors - self.factor)) > 1e-8 * (1.0 + self.factor):
            raise GeometryError(
                "separating homotopy needs a constant conformal factor "
                "on the boundary sphere")
        self.total = 2.0 * np.pi * self.r * self.factor

    def dist(self, pa: np.ndarray, pb: np.ndarray) -> float:
        ua = pa / np.linalg.norm(pa)
        ub = pb / np.linalg.norm(pb)
        ang = float(np.arccos(np.clip(ua @ ub, -1.0, 1.0)))
        return ang * self.r * self.factor

    def move_along(self, pa: np.ndarray, pb: np.ndarray,
                   dist_target: float) -> np.ndarray:
        """Point at boundary distance dist_target from pa on the great
        circle through pa, pb, on pb's side."""
        ua = pa / np.linalg.norm(pa)
        ub = pb / np.linalg.norm(pb)
        c = float(np.clip(ua @ ub, -1.0, 1.0))
        ang = float(np.arccos(c))
        w = ub - c * ua
        wn = np.linalg.norm(w)
        if wn < 1e-14:
            raise GeometryError("degenerate great circle: coincident pair")
        w /= wn
        del ang
        psi = dist_target / (self.r * self.factor)
        return self.r * (np.cos(psi) * ua + np.sin(psi) * w)


@dataclasses.dataclass(frozen=True)
class SeparatingHomotopy:
    """Evaluator s(tau, (A,B)) pushing close endpoint pairs apart.

    Moves B away from A along the boundary geodesic at rate
    (delta_g - dist)/(delta_g - alpha), so every pair reaches boundary
    distance >= delta_g at tau = delta_g - alpha; pairs already at distance
    >= delta_g never move.
    """

    delta_g: float
    alpha: float
    _metric: object

    @property
    def tau_final(self) -> float:
        return self.delta_g - self.alpha

    def distance(self, A: np.ndarray, B: np.ndarray) -> float:
        return self._metric.dist(np.asarray(A, float), np.asarray(B, float))

    def __call__(self, tau: float, pair) -> np.ndarray:
        A = np.asarray(pair[0], dtype=float)
        B = np.asarray(pair[1], dtype=float)
        if tau < 0.0:
            raise ValueError("homotopy parameter must be nonnegative")
        d = self._metric.dist(A, B)
        if d >= self.delta_g:
            return B.copy()
        rate = (self.delta_g - d) / (self.delta_g - self.alpha)
        target = min(d + tau * rate, self.delta_g)
        if isinstance(self._metric, _CircleBoundaryMetric):
            sa = self._metric.arcpos(A)
            sb = self._metric.arcpos(B)
            fwd = (sb - sa) % self._metric.total
            sign = 1.0 if fwd <= self._metric.total - fwd else -1.0
            return self._metric.point_at(sa + sign * target)
        return self._metric.move_along(A, B, target)


def boundary_injectivity_radius(m: MetricField, b: DomainBoundary) -> float:
    """Estimated injectivity radius of the induced boundary metric, with a
    20% safety reduction.  Closed curves: half the total length; round
    spheres: pi times the scaled radius."""
    if b.dim == 2:
        return INJECTIVITY_SAFETY * 0.5 * _CircleBoundaryMetric(m, b).total
    sphere = _SphereBoundaryMetric(m, b)
    return INJECTIVITY_SAFETY * np.pi * sphere.r * sphere.factor


def separate_endpoints(m: MetricField, b: DomainBoundary, pairs,
                       alpha: float) -> SeparatingHomotopy:
    """Homotopy evaluator for the endpoint-separation step.

    pairs: list of (A, B) boundary points; alpha must match their minimum
    pairwise boundary distance and lie strictly below the estimated boundary
    injectivity radius.
    """
    metric = (_CircleBoundaryMetric(m, b) if b.dim == 2
              else _SphereBoundaryMetric(m, b))
    delta_g = (INJECTIVITY_SAFETY * 0.5 * metric.total if b.dim == 2
               else INJECTIVITY_SAFETY * np.pi * metric.r * metric.factor)
    pairs = [(retract_to_boundary(b, np.asarray(a, float)),
              retract_to_boundary(b, np.asarray(c, float)))
             for a, c in pairs]
    if not pairs:
        raise ValueError("separating homotopy needs at least one pair")
    dmin = min(metric.dist(a, c) for a, c in pairs)
    if not (0.0 < alpha < delta_g):
        raise ValueError(
            f"alpha must lie in (0, delta_g={delta_g!r}); got {alpha!r}")
    if alpha > dmin + 1e-6 * (1.0 + dmin):
        raise ValueError(
            f"alpha={alpha!r} exceeds the minimum pair distance {dmin!r}")
    return SeparatingHomotopy(delta_g=delta_g, alpha=alpha, _metric=metric)
