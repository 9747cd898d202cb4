"""Run the shipped configs through their pipelines and print one line each.

Usage: python scripts/run_domains.py [outdir]
"""

import pathlib
import sys
import time

from ogchords import cli

HERE = pathlib.Path(__file__).resolve().parent.parent
CONFIGS = HERE / "configs"

RUNS = [
    ("constants", "euclid_disk2.json"),
    ("scan-ot", "radial_conformal.json"),
    ("scan-ot", "perturbed_radial.json"),
    ("multiplicity", "euclid_disk2.json"),
    ("multiplicity", "ellipse.json"),
    ("multiplicity", "perturbed_radial.json"),
    ("brake", "brake_harmonic2.json"),
    ("brake", "brake_cubic.json"),
    ("transversality-demo", None),
]


def main():
    import os
    if len(sys.argv) > 1:
        os.environ["OGCHORDS_OUTDIR"] = ""
        base = pathlib.Path(sys.argv[1])
    else:
        base = HERE / "out"
    for command, name in RUNS:
        argv = [command]
        if name is not None:
            argv.append(str(CONFIGS / name))
            os.environ["OGCHORDS_OUTDIR"] = str(base / f"{command}_{name[:-5]}")
        t0 = time.time()
        code = cli.main(argv)
        os.environ.pop("OGCHORDS_OUTDIR", None)
        print(f"[{command} {name or ''}] exit={code} {time.time() - t0:.1f}s")
        print()


if __name__ == "__main__":
    main()
