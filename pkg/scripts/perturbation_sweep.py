"""Sweep the radial perturbation amplitude and watch the tangent-arrival scan.

For the unperturbed profile every orthogonal shot returns orthogonally, so
min |exit_cos| stays 1.  The sweep shows how far the perturbation can grow
before tangent arrivals (or grazing events) appear at scan resolution.

Usage: python scripts/perturbation_sweep.py [grid]
"""

import sys

import numpy as np

from ogchords.geometry import RadialProfile, ball_boundary, radial_conformal_metric
from ogchords.shooting import scan_OT_chords

PROFILE = RadialProfile(kind="polynomial", coeffs=(1.0, 0.0, 1.0))


def main():
    grid = int(sys.argv[1]) if len(sys.argv) > 1 else 64
    b = ball_boundary(2)
    print(f"{'eps':>6}  {'ot':>3}  {'grazing':>7}  {'min|cos|':>10}")
    for eps in (0.0, 0.01, 0.05, 0.1, 0.2, 0.4, 0.8):
        m = radial_conformal_metric(2, PROFILE, eps=eps,
                                    direction=np.array([1.0, 0.0]))
        rep = scan_OT_chords(m, b, grid=grid, workers=4)
        print(f"{eps:6.2f}  {len(rep.ot_indices):3d}  {rep.grazing_count:7d}"
              f"  {rep.min_abs_exit_cos:10.6f}")


if __name__ == "__main__":
    main()
