"""Deterministic result writers: CSV, JSON, and static SVG.

Byte-identical output for identical data is part of the interface contract,
so floats are always formatted through the same round-trippable format and
JSON keys are sorted.  No timestamps, hostnames, or absolute paths ever
enter an output file.
"""

from __future__ import annotations

import json
import pathlib

import numpy as np

FLOAT_FMT = "%.17g"
SVG_FMT = "%.6f"


def fmt_value(val) -> str:
    if isinstance(val, (bool, np.bool_)):
        return "true" if val else "false"
    if isinstance(val, (int, np.integer)):
        return str(int(val))
    if isinstance(val, (float, np.floating)):
        return FLOAT_FMT % float(val)
    return str(val)


def write_csv(path, header, rows) -> pathlib.Path:
    path = pathlib.Path(path)
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(fmt_value(v) for v in row))
    path.write_text("\n".join(lines) + "\n")
    return path


def jsonable(obj):
    """Recursive conversion to JSON-safe types; nonfinite floats to strings."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [jsonable(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        f = float(obj)
        return f if np.isfinite(f) else repr(f)
    return obj


def write_json(path, payload) -> pathlib.Path:
    path = pathlib.Path(path)
    text = json.dumps(jsonable(payload), sort_keys=True, indent=2)
    path.write_text(text + "\n")
    return path


def _boundary_loop(boundary, samples: int = 256) -> np.ndarray:
    """Equatorial boundary slice in the (x1, x2) plane."""
    thetas = 2.0 * np.pi * np.arange(samples + 1) / samples
    dirs = np.zeros((samples + 1, boundary.dim))
    dirs[:, 0] = np.cos(thetas)
    dirs[:, 1] = np.sin(thetas)
    radii = np.array([float(np.asarray(boundary.radius(u))) for u in dirs])
    return radii[:, None] * dirs[:, :2]


def _svg_transform(extent: float, size: int):
    scale = 0.45 * size / extent

    def to_px(xy):
        return (0.5 * size + scale * xy[0], 0.5 * size - scale * xy[1])

    return to_px


def write_chords_svg(path, boundary, node_arrays, size: int = 480,
                     labels=None) -> pathlib.Path:
    """Boundary loop plus chord polylines, first two coordinates.

    Dimensions above 2 are drawn as their (x1, x2) projection; that loses
    information but keeps a quick visual check available for every run.
    """
    path = pathlib.Path(path)
    loop = _boundary_loop(boundary)
    pts2 = [np.asarray(nodes, dtype=float)[:, :2] for nodes in node_arrays]
    extent = float(np.max(np.abs(loop)))
    for p in pts2:
        if p.size:
            extent = max(extent, float(np.max(np.abs(p))))
    to_px = _svg_transform(extent, size)

    def polyline(points, color, width):
        coords = " ".join(
            (SVG_FMT + "," + SVG_FMT) % to_px(p) for p in points)
        return (f'<polyline fill="none" stroke="{color}" '
                f'stroke-width="{width}" points="{coords}"/>')

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" '
        f'height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        polyline(loop[:, :2], "#444444", 1.5),
    ]
    palette = ["#c0392b", "#2471a3", "#1e8449", "#9a7d0a", "#6c3483",
               "#a04000", "#148f77", "#5d6d7e"]
    for k, p in enumerate(pts2):
        parts.append(polyline(p, palette[k % len(palette)], 1.2))
        if labels is not None and k < len(labels):
            px = to_px(p[p.shape[0] // 2])
            parts.append(
                ('<text x="%s" y="%s" font-size="11" '
                 'fill="#222222">%s</text>')
                % (SVG_FMT % px[0], SVG_FMT % px[1], labels[k]))
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
    return path
