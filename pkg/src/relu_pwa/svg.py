"""Plain SVG plots of 2-D polyhedral tessellations."""
from __future__ import annotations

from typing import Iterable, Optional, Sequence, Union
from xml.sax.saxutils import escape

import numpy as np

from .geometry import Polyhedron, PolyUnion, bounding_box, intersect, vertices_2d
from .marching import PwaFunction

__all__ = ["render_svg"]

_SIZE = 480
_MARGIN = 40


def _polys(obj) -> list:
    if isinstance(obj, PwaFunction):
        return [r.poly for r in obj.regions]
    if isinstance(obj, PolyUnion):
        return list(obj)
    if isinstance(obj, Polyhedron):
        return [obj]
    return list(obj)


def _default_bounds(obj, polys):
    if isinstance(obj, PwaFunction):
        box = bounding_box(obj.domain)
    else:
        los, his = [], []
        for p in polys:
            bb = bounding_box(p)
            if bb is not None:
                los.append(bb[0])
                his.append(bb[1])
        box = (np.min(los, axis=0), np.max(his, axis=0)) if los else None
    if box is None or not np.all(np.isfinite(box[0])) or not np.all(np.isfinite(box[1])):
        raise ValueError("cannot infer finite plot bounds; pass bounds explicitly")
    return [(box[0][0], box[1][0]), (box[0][1], box[1][1])]


def render_svg(
    obj: Union[PwaFunction, PolyUnion, Polyhedron, Iterable[Polyhedron]],
    bounds: Optional[Sequence[Sequence[float]]] = None,
    seed: int = 0,
    title: str = "",
) -> str:
    """One filled polygon per polyhedron, with axes and the plot bounds.

    ``bounds`` is ``[(xmin, xmax), (ymin, ymax)]``.  Fill colours are drawn
    from a generator seeded with ``seed`` so output is reproducible.
    """
    polys = _polys(obj)
    for p in polys:
        if p.dim != 2:
            raise ValueError(f"SVG output needs 2-D sets, got dimension {p.dim}")
    if bounds is None:
        bounds = _default_bounds(obj, polys)
    (x0, x1), (y0, y1) = bounds
    if not (x1 > x0 and y1 > y0):
        raise ValueError("bounds must have positive extent")
    span = _SIZE - 2 * _MARGIN

    def to_px(pts):
        px = _MARGIN + (pts[:, 0] - x0) / (x1 - x0) * span
        py = _MARGIN + (y1 - pts[:, 1]) / (y1 - y0) * span
        return px, py

    frame = Polyhedron.from_box([x0, y0], [x1, y1])
    rng = np.random.default_rng(seed)
    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_SIZE}" height="{_SIZE}" viewBox="0 0 {_SIZE} {_SIZE}">',
        f'<rect x="0" y="0" width="{_SIZE}" height="{_SIZE}" fill="white"/>',
    ]
    if title:
        out.append(f'<text x="{_SIZE / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')
    for p in polys:
        verts = vertices_2d(intersect(p, frame))
        r, g, b = (rng.integers(64, 256, size=3)).tolist()
        if verts.shape[0] < 3:
            continue
        px, py = to_px(verts)
        pts = " ".join(f"{a:.3f},{c:.3f}" for a, c in zip(px, py))
        out.append(f'<polygon points="{pts}" fill="rgb({r},{g},{b})" stroke="black" stroke-width="0.5"/>')
    lo = _MARGIN
    hi = _MARGIN + span
    out.append(f'<rect x="{lo}" y="{lo}" width="{span}" height="{span}" fill="none" stroke="black"/>')
    out.append(f'<text x="{lo}" y="{hi + 16}" font-size="11">{x0:g}</text>')
    out.append(f'<text x="{hi}" y="{hi + 16}" font-size="11" text-anchor="end">{x1:g}</text>')
    out.append(f'<text x="{lo - 4}" y="{hi}" font-size="11" text-anchor="end">{y0:g}</text>')
    out.append(f'<text x="{lo - 4}" y="{lo + 10}" font-size="11" text-anchor="end">{y1:g}</text>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
