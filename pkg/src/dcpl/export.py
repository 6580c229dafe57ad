"""Writers for meshes, overlays and tables.  Floats use 17 significant digits."""

from __future__ import annotations

import csv
import json
import math
from pathlib import Path

import numpy as np

__all__ = ["fmt", "write_obj", "write_svg_overlay", "write_csv", "write_json", "jsonable"]


def fmt(x):
    """Round-trip text for a float (``%.17g``); ``nan`` for missing values."""
    if x is None:
        return "nan"
    if isinstance(x, (int, np.integer)) and not isinstance(x, bool):
        return str(int(x))
    return "%.17g" % float(x)


def jsonable(obj):
    """Recursively convert numpy values and complex numbers for ``json.dump``."""
    if isinstance(obj, dict):
        return {str(k): jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return jsonable(obj.tolist())
    if isinstance(obj, (complex, np.complexfloating)):
        return [jsonable(obj.real), jsonable(obj.imag)]
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        x = float(obj)
        # JSON has no nan/inf
        return x if math.isfinite(x) else None
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_csv(path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([fmt(row.get(k)) for k in header])


def write_obj(path, points, triangles):
    """Flat mesh (``z = 0``) with 1-based triangle faces."""
    with open(path, "w") as fh:
        for z in points:
            fh.write(f"v {fmt(z.real)} {fmt(z.imag)} 0\n")
        for a, b, c in triangles:
            fh.write(f"f {a + 1} {b + 1} {c + 1}\n")


def _polyline_paths(points, edges, to_px):
    parts = []
    for a, b in edges:
        xa, ya = to_px(points[a])
        xb, yb = to_px(points[b])
        parts.append(f"M{xa:.3f} {ya:.3f}L{xb:.3f} {yb:.3f}")
    return "".join(parts)


def write_svg_overlay(path, source, image, edges, title="", size=800, margin=40):
    """Source mesh in blue and image mesh in red on a shared frame, with a legend."""
    allp = np.concatenate([np.asarray(source), np.asarray(image)])
    x0, x1 = allp.real.min(), allp.real.max()
    y0, y1 = allp.imag.min(), allp.imag.max()
    span = max(x1 - x0, y1 - y0) or 1.0
    scale = (size - 2 * margin) / span

    def to_px(z):
        # flip y so the picture has the usual orientation
        return margin + (z.real - x0) * scale, size - margin - (z.imag - y0) * scale

    src_path = _polyline_paths(source, edges, to_px)
    img_path = _polyline_paths(image, edges, to_px)
    text = title.replace("&", "&amp;").replace("<", "&lt;")
    svg = (
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 30}" '
        f'viewBox="0 0 {size} {size + 30}">\n'
        f'<rect width="100%" height="100%" fill="white"/>\n'
        f'<path d="{src_path}" stroke="#1f77b4" stroke-width="0.6" fill="none"/>\n'
        f'<path d="{img_path}" stroke="#d62728" stroke-width="0.6" fill="none"/>\n'
        f'<g font-family="sans-serif" font-size="13">\n'
        f'<text x="{margin}" y="{size + 18}">{text}</text>\n'
        f'<line x1="{size - 230}" y1="{size + 13}" x2="{size - 210}" y2="{size + 13}" stroke="#1f77b4"/>'
        f'<text x="{size - 205}" y="{size + 18}">source</text>\n'
        f'<line x1="{size - 130}" y1="{size + 13}" x2="{size - 110}" y2="{size + 13}" stroke="#d62728"/>'
        f'<text x="{size - 105}" y="{size + 18}">image</text>\n'
        "</g>\n</svg>\n"
    )
    Path(path).write_text(svg)
