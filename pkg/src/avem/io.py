"""Record, mesh and SVG export."""
from __future__ import annotations

import csv
import json
from collections import Counter
from pathlib import Path

from .mesh import Mesh

__all__ = ["CSV_HEADER", "write_records_csv", "write_records_jsonl", "write_mesh_json",
           "render_svg", "polygon_census"]

CSV_HEADER = ["iter", "ndofs", "nelem", "nvert", "lambda_max", "eta2", "stab", "ratio", "h1err",
              "contraction"]


def _fmt(v) -> str:
    return "" if v is None else repr(float(v))


def _row(r) -> list:
    return [r.iter, r.n_dofs, r.n_elements, r.n_vertices, r.lambda_max, _fmt(r.eta2), _fmt(r.S_T),
            _fmt(r.ratio), _fmt(r.h1_like_error), _fmt(r.contraction)]


def write_records_csv(records, path) -> None:
    with open(path, "w", newline="") as fh:
        wr = csv.writer(fh, lineterminator="\n")
        wr.writerow(CSV_HEADER)
        for r in records:
            wr.writerow(_row(r))


def write_records_jsonl(records, path) -> None:
    with open(path, "w") as fh:
        for r in records:
            fh.write(json.dumps(dict(zip(CSV_HEADER, [r.iter, r.n_dofs, r.n_elements, r.n_vertices,
                                                      r.lambda_max, r.eta2, r.S_T, r.ratio,
                                                      r.h1_like_error, r.contraction]))) + "\n")


def write_mesh_json(mesh: Mesh, path) -> None:
    Path(path).write_text(mesh.dumps())


def polygon_census(mesh: Mesh) -> dict[int, int]:
    """Number of active elements by boundary node count |N_E|."""
    return dict(sorted(Counter(len(mesh.element_boundary(e)) for e in mesh.active_elements()).items()))


def render_svg(mesh: Mesh, path, highlight_polygons: bool = True, window=None, size: int = 800) -> int:
    """Draw the active elements; elements with more than three nodes are filled red.

    ``window`` is ``(xmin, xmax, ymin, ymax)``; elements outside it are
    skipped. Returns the number of elements drawn.
    """
    X = mesh.coords_array()
    if window is None:
        xmin, ymin = X.min(axis=0)
        xmax, ymax = X.max(axis=0)
    else:
        xmin, xmax, ymin, ymax = window
    w = max(xmax - xmin, ymax - ymin)
    if not w > 0:
        raise ValueError("empty drawing window")
    scale = size / w
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{size}" height="{size}" '
           f'viewBox="0 0 {size} {size}">', f'<rect width="{size}" height="{size}" fill="white"/>']
    drawn = 0
    for eid in mesh.active_elements():
        eb = mesh.element_boundary(eid)
        P = X[eb.nodes]
        if window is not None and (P[:, 0].max() < xmin or P[:, 0].min() > xmax
                                   or P[:, 1].max() < ymin or P[:, 1].min() > ymax):
            continue
        pts = " ".join(f"{(x - xmin) * scale:.3f},{(ymax - y) * scale:.3f}" for x, y in P)
        fill = "#e03030" if highlight_polygons and len(eb) > 3 else "none"
        out.append(f'<polygon points="{pts}" fill="{fill}" stroke="black" stroke-width="0.3"/>')
        drawn += 1
    out.append("</svg>")
    Path(path).write_text("\n".join(out) + "\n")
    return drawn
