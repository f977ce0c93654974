"""SVG drawings of designs: space outline, placed assets, transition roads."""

from __future__ import annotations

from typing import Mapping, Sequence
from xml.sax.saxutils import escape

_MARGIN = 0.05
_WIDTH_PX = 800.0
_PALETTE = ("#1f77b4", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf")


def _fmt(v: float) -> str:
    s = f"{v:.3f}".rstrip("0").rstrip(".")
    return "0" if s in ("-0", "") else s


def render_svg(
    space: Sequence[Sequence[float]],
    assets: Sequence[Mapping] = (),
    coordinates: Mapping[str, Sequence[Sequence[float]]] | None = None,
    transitions: Sequence[Mapping] = (),
) -> str:
    """Return an SVG 1.1 document.

    ``assets`` are asset JSON records (1-based segments); ``coordinates``
    maps asset id to placed node coordinates; each transition record needs
    ``start`` and ``end`` points. Output is a pure function of the inputs.
    """
    coordinates = coordinates or {}
    xs = [p[0] for p in space]
    ys = [p[1] for p in space]
    x0, x1, y0, y1 = min(xs), max(xs), min(ys), max(ys)
    span = max(x1 - x0, y1 - y0) or 1.0
    pad = _MARGIN * span
    scale = _WIDTH_PX / (x1 - x0 + 2 * pad)
    w = _WIDTH_PX
    h = (y1 - y0 + 2 * pad) * scale

    def tx(p):
        # flip y so that north is up
        return _fmt((p[0] - x0 + pad) * scale), _fmt((y1 + pad - p[1]) * scale)

    stroke = _fmt(max(1.0, 0.004 * w))
    lines = [
        '<?xml version="1.0" encoding="UTF-8" standalone="no"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" width="{_fmt(w)}" height="{_fmt(h)}" '
        f'viewBox="0 0 {_fmt(w)} {_fmt(h)}">',
        f'<rect x="0" y="0" width="{_fmt(w)}" height="{_fmt(h)}" fill="#ffffff"/>',
        '<polygon class="space" points="'
        + " ".join(",".join(tx(p)) for p in space)
        + f'" fill="#f4f1e8" stroke="#333333" stroke-width="{stroke}"/>',
    ]
    for k, asset in enumerate(assets):
        aid = asset["id"]
        pts = coordinates.get(aid)
        if pts is None:
            continue
        color = _PALETTE[k % len(_PALETTE)]
        lines.append(f'<g class="asset" id="asset-{escape(str(aid))}">')
        for i, j in asset["segments"]:
            (ax, ay), (bx, by) = tx(pts[i - 1]), tx(pts[j - 1])
            lines.append(
                f'<path class="segment" d="M {ax} {ay} L {bx} {by}" fill="none" stroke="{color}" '
                f'stroke-width="{_fmt(2 * float(stroke))}" stroke-linecap="round"/>'
            )
        for p in pts:
            cx, cy = tx(p)
            lines.append(f'<circle cx="{cx}" cy="{cy}" r="{stroke}" fill="{color}"/>')
        cx = sum(p[0] for p in pts) / len(pts)
        cy = sum(p[1] for p in pts) / len(pts)
        lx, ly = tx((cx, cy))
        lines.append(
            f'<text x="{lx}" y="{ly}" font-family="sans-serif" font-size="{_fmt(6 * float(stroke))}" '
            f'fill="#000000">{escape(str(aid))}</text>'
        )
        lines.append("</g>")
    for t in transitions:
        (ax, ay), (bx, by) = tx(t["start"]), tx(t["end"])
        lines.append(
            f'<path class="transition" d="M {ax} {ay} L {bx} {by}" fill="none" stroke="#1565c0" '
            f'stroke-width="{stroke}" stroke-dasharray="{_fmt(4 * float(stroke))},{_fmt(3 * float(stroke))}"/>'
        )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def render_result(result: Mapping) -> str:
    """Render a phase-1 or phase-2 result document (or a bare space design)."""
    return render_svg(
        result["space"],
        result.get("assets", ()),
        result.get("coordinates"),
        result.get("transitions", ()),
    )
