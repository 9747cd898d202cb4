"""Run configuration: JSON schema -> constructed metric, domain, system.

The JSON layout (full schema in docs/config_schema.md):

{
  "metric":  {"family": "radial_conformal", "dim": 2,
              "profile": {"kind": "polynomial", "coeffs": [1, 0, 1]},
              "perturbation": {"amplitude": 0.0}},
  "domain":  {"kind": "ball", "radius": 1.0},
  "solver":  {"step": 1e-3, "max_len": 40.0, "refine_tol": 1e-10},
  "grids":   {"scan": 64, "multistart": 16, "nodes": 128},
  "brake":   {"potential": {"kind": "harmonic"}, "energy": 0.5},
  "output_dir": "out",
  "seed": 0,
  "workers": 1
}

Only metric and domain are required for the geometric subcommands; brake
runs need the brake section.  OGCHORDS_OUTDIR overrides output_dir (the
only environment override).
"""

from __future__ import annotations

import dataclasses
import json
import os
import pathlib

import numpy as np

from .brake import LagrangianData, natural_system
from .geometry import (DomainBoundary, GeometryError, MetricField,
                       RadialProfile, ball_boundary, ellipse_boundary,
                       euclidean_metric, radial_conformal_metric)

OUTPUT_ENV_VAR = "OGCHORDS_OUTDIR"


class ConfigError(ValueError):
    """Malformed or inconsistent run configuration."""


@dataclasses.dataclass(frozen=True)
class RunConfig:
    metric: dict
    domain: dict
    solver: dict
    grids: dict
    brake: dict | None
    output_dir: str
    seed: int
    workers: int

    def __post_init__(self):
        if self.dim < 2:
            raise ConfigError("metric dim must be at least 2")
        for key, val in self.solver.items():
            if not (isinstance(val, (int, float)) and val > 0.0):
                raise ConfigError(f"solver tolerance {key!r} must be a "
                                  f"positive number, got {val!r}")
        for key, val in self.grids.items():
            if not (isinstance(val, int) and val >= 2):
                raise ConfigError(f"grid {key!r} must be an integer >= 2, "
                                  f"got {val!r}")
        if not (isinstance(self.seed, int) and self.seed >= 0):
            raise ConfigError("seed must be a nonnegative integer")
        if not (isinstance(self.workers, int) and self.workers >= 1):
            raise ConfigError("workers must be a positive integer")

    @property
    def dim(self) -> int:
        return int(self.metric.get("dim", 0))

    def solver_value(self, key: str, default: float) -> float:
        return float(self.solver.get(key, default))

    def grid_value(self, key: str, default: int) -> int:
        return int(self.grids.get(key, default))


def _require(table: dict, key: str, context: str):
    if key not in table:
        raise ConfigError(f"{context} is missing required key {key!r}")
    return table[key]


def load_config(path) -> RunConfig:
    """Parse and validate a JSON run configuration file."""
    p = pathlib.Path(path)
    try:
        text = p.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {p}: {exc}") from exc
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {p} is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config root must be a JSON object")
    metric = _require(raw, "metric", "config")
    domain = _require(raw, "domain", "config")
    if not isinstance(metric, dict) or not isinstance(domain, dict):
        raise ConfigError("metric and domain must be JSON objects")
    _require(metric, "family", "metric")
    _require(metric, "dim", "metric")
    if not isinstance(metric["dim"], int):
        raise ConfigError("metric dim must be an integer")
    _require(domain, "kind", "domain")
    brake = raw.get("brake")
    if brake is not None and not isinstance(brake, dict):
        raise ConfigError("brake section must be a JSON object")
    return RunConfig(
        metric=metric,
        domain=domain,
        solver=dict(raw.get("solver", {})),
        grids=dict(raw.get("grids", {})),
        brake=brake,
        output_dir=str(raw.get("output_dir", "out")),
        seed=int(raw.get("seed", 0)),
        workers=int(raw.get("workers", 1)),
    )


def build_metric(cfg: RunConfig) -> MetricField:
    spec = cfg.metric
    family = spec["family"]
    dim = cfg.dim
    try:
        if family == "euclidean":
            return euclidean_metric(dim)
        if family in ("radial_conformal", "perturbed_radial"):
            prof = _require(spec, "profile", "metric")
            profile = RadialProfile(kind=_require(prof, "kind", "profile"),
                                    coeffs=tuple(prof.get("coeffs", ())))
            pert = spec.get("perturbation", {})
            eps = float(pert.get("amplitude", 0.0))
            direction = pert.get("direction")
            if direction is not None:
                direction = np.asarray(direction, dtype=float)
            return radial_conformal_metric(dim, profile, eps=eps,
                                           direction=direction)
    except GeometryError as exc:
        raise ConfigError(f"metric section invalid: {exc}") from exc
    raise ConfigError(f"unknown metric family {family!r}")


def build_boundary(cfg: RunConfig) -> DomainBoundary:
    spec = cfg.domain
    kind = spec["kind"]
    try:
        if kind == "ball":
            return ball_boundary(cfg.dim, radius=float(spec.get("radius", 1.0)))
        if kind == "ellipse":
            axes = _require(spec, "semi_axes", "domain")
            axes = np.asarray(axes, dtype=float)
            if axes.shape != (cfg.dim,):
                raise ConfigError("semi_axes length must match metric dim")
            return ellipse_boundary(axes)
    except GeometryError as exc:
        raise ConfigError(f"domain section invalid: {exc}") from exc
    raise ConfigError(f"unknown domain kind {kind!r}")


def _potential_from_spec(spec: dict, dim: int):
    kind = _require(spec, "kind", "potential")
    if kind == "harmonic":
        def V(q):
            q = np.asarray(q, dtype=float)
            return 0.5 * np.sum(q * q, axis=-1)

        def grad_V(q):
            return np.asarray(q, dtype=float).copy()

        return V, grad_V
    if kind == "harmonic_cubic":
        eps = float(spec.get("epsilon", 0.01))

        def V(q):
            q = np.asarray(q, dtype=float)
            return 0.5 * np.sum(q * q, axis=-1) + eps * q[..., 0] ** 3

        def grad_V(q):
            q = np.asarray(q, dtype=float)
            g = q.copy()
            g[..., 0] += 3.0 * eps * q[..., 0] ** 2
            return g

        return V, grad_V
    raise ConfigError(f"unknown potential kind {kind!r}")


def build_system(cfg: RunConfig) -> LagrangianData:
    """Natural Lagrangian system for the brake subcommand."""
    if cfg.brake is None:
        raise ConfigError("config has no brake section")
    pot = _require(cfg.brake, "potential", "brake")
    if not isinstance(pot, dict):
        raise ConfigError("brake potential must be a JSON object")
    energy = _require(cfg.brake, "energy", "brake")
    if not (isinstance(energy, (int, float)) and np.isfinite(energy)):
        raise ConfigError("brake energy must be a finite number")
    V, grad_V = _potential_from_spec(pot, cfg.dim)
    try:
        return natural_system(build_metric(cfg), V, float(energy),
                              grad_potential=grad_V,
                              label=str(pot.get("kind")))
    except GeometryError as exc:
        raise ConfigError(f"brake section invalid: {exc}") from exc


def resolve_output_dir(cfg: RunConfig) -> pathlib.Path:
    """Output directory, honoring the single supported env override."""
    override = os.environ.get(OUTPUT_ENV_VAR)
    out = pathlib.Path(override) if override else pathlib.Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out
