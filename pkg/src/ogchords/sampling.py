"""Deterministic boundary grids and direction sampling."""

from __future__ import annotations

import numpy as np

from .geometry import DomainBoundary, GeometryError


def circle_grid(k: int) -> np.ndarray:
    """k unit directions at angles 2 pi j / k."""
    th = 2.0 * np.pi * np.arange(k) / k
    return np.stack([np.cos(th), np.sin(th)], axis=-1)


def sphere_grid(dim: int, k: int, rotated_copy: bool = True) -> np.ndarray:
    """Product angle grid on S^{dim-1}, k points per angle coordinate.

    Polar angles use half-offset nodes so the poles are avoided; for dim >= 3
    a second grid rotated by a fixed axis permutation is appended to cover the
    polar caps of the first one.
    """
    if k < 2:
        raise GeometryError("need at least 2 points per angle coordinate")
    if dim == 2:
        return circle_grid(k)
    polar = [np.pi * (np.arange(k) + 0.5) / k for _ in range(dim - 2)]
    azim = 2.0 * np.pi * np.arange(k) / k
    grids = np.meshgrid(*polar, azim, indexing="ij")
    angles = np.stack([g.ravel() for g in grids], axis=-1)
    pts = angles_to_direction(dim, angles)
    if rotated_copy:
        rot = np.roll(np.eye(dim), 1, axis=0)
        pts = np.concatenate([pts, pts @ rot.T], axis=0)
    return pts


def angles_to_direction(dim: int, angles: np.ndarray) -> np.ndarray:
    """Spherical angles (theta_1..theta_{dim-2} in (0,pi), theta_{dim-1} in
    [0,2pi)) to unit vectors."""
    angles = np.atleast_2d(np.asarray(angles, dtype=float))
    if angles.shape[-1] != dim - 1:
        raise GeometryError("angle count must be dim - 1")
    out = np.zeros(angles.shape[:-1] + (dim,))
    sin_prod = np.ones(angles.shape[:-1])
    for j in range(dim - 1):
        out[..., j] = sin_prod * np.cos(angles[..., j])
        sin_prod = sin_prod * np.sin(angles[..., j])
    out[..., dim - 1] = sin_prod
    return out


def direction_to_angles(u: np.ndarray) -> np.ndarray:
    """Inverse of angles_to_direction for unit vectors."""
    u = np.atleast_2d(np.asarray(u, dtype=float))
    dim = u.shape[-1]
    angles = np.zeros(u.shape[:-1] + (dim - 1,))
    rem = np.ones(u.shape[:-1])
    for j in range(dim - 2):
        c = np.clip(np.divide(u[..., j], np.where(rem > 1e-300, rem, 1.0)), -1.0, 1.0)
        angles[..., j] = np.arccos(c)
        rem = rem * np.sin(angles[..., j])
    angles[..., dim - 2] = np.arctan2(u[..., dim - 1],
                                      u[..., dim - 2]) % (2.0 * np.pi)
    return angles


def boundary_grid(b: DomainBoundary, k: int, rotated_copy: bool = True) -> np.ndarray:
    """Deterministic boundary point grid rho(u) u over a sphere grid."""
    dirs = sphere_grid(b.dim, k, rotated_copy=rotated_copy)
    return b.radius(dirs)[:, None] * dirs


def orthonormal_tangent_frame(u: np.ndarray) -> np.ndarray:
    """Orthonormal basis of the euclidean orthogonal complement of unit u.

    Deterministic: Gram-Schmidt over coordinate axes, skipping the axis most
    aligned with u.
    """
    u = np.asarray(u, dtype=float)
    dim = u.shape[0]
    skip = int(np.argmax(np.abs(u)))
    basis = []
    for j in range(dim):
        if j == skip:
            continue
        v = np.zeros(dim)
        v[j] = 1.0
        v = v - (v @ u) * u
        for w in basis:
            v = v - (v @ w) * w
        nrm = np.linalg.norm(v)
        if nrm < 1e-12:
            raise GeometryError("degenerate tangent frame")
        basis.append(v / nrm)
    return np.stack(basis, axis=0)
