"""Orthogonal geodesic chords and brake orbits in Riemannian disks."""

__version__ = "0.1.0"
