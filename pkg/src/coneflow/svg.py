"""Minimal SVG writers for heatmaps and spectrum scatter plots."""

from __future__ import annotations

import math
from xml.sax.saxutils import escape

import numpy as np


def _colour(v):
    # white -> dark blue ramp
    v = min(max(float(v), 0.0), 1.0)
    r = int(round(255 * (1 - 0.85 * v)))
    g = int(round(255 * (1 - 0.7 * v)))
    b = int(round(255 * (1 - 0.35 * v)))
    return f"#{r:02x}{g:02x}{b:02x}"


def heatmap_svg(values, row_labels, col_labels, title="", log=True, cell=28):
    """Heatmap of a 2D array; ``log`` colours by ``log10`` of the value."""
    a = np.asarray(values, dtype=float)
    shown = np.log10(np.maximum(a, 1e-300)) if log else a
    finite = shown[np.isfinite(shown) & (a > 0)] if log else shown
    lo, hi = (finite.min(), finite.max()) if finite.size else (0.0, 1.0)
    span = hi - lo if hi > lo else 1.0
    left, top = 60, 40
    w = left + cell * a.shape[1] + 20
    h = top + cell * a.shape[0] + 40
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" '
           f'font-family="sans-serif" font-size="11">',
           f'<text x="{left}" y="20">{escape(title)}</text>']
    for i in range(a.shape[0]):
        out.append(f'<text x="{left - 6}" y="{top + cell * i + cell * 0.65:.1f}" '
                   f'text-anchor="end">{escape(str(row_labels[i]))}</text>')
        for j in range(a.shape[1]):
            v = (shown[i, j] - lo) / span if (a[i, j] > 0 or not log) else 0.0
            out.append(f'<rect x="{left + cell * j}" y="{top + cell * i}" width="{cell}" '
                       f'height="{cell}" fill="{_colour(v)}"><title>{a[i, j]:.6g}</title></rect>')
    for j, lab in enumerate(col_labels):
        out.append(f'<text x="{left + cell * j + cell / 2:.1f}" y="{top + cell * a.shape[0] + 16}" '
                   f'text-anchor="middle">{escape(str(lab))}</text>')
    out.append("</svg>")
    return "\n".join(out)


def spectrum_svg(eigenvalues, radius=None, stable=None, title="", size=360):
    """Eigenvalues in the complex plane with the unit circle and an optional bound circle."""
    ev = np.asarray(eigenvalues, dtype=complex)
    stable = np.ones(ev.shape, bool) if stable is None else np.asarray(stable, bool)
    extent = max(1.1, float(np.abs(ev).max()) * 1.1 if ev.size else 1.1)
    c = size / 2
    s = (size / 2 - 20) / extent

    def px(z):
        return c + s * z.real, c - s * z.imag

    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size + 20}" '
           f'font-family="sans-serif" font-size="11">',
           f'<text x="10" y="{size + 12}">{escape(title)}</text>',
           f'<line x1="0" y1="{c}" x2="{size}" y2="{c}" stroke="#ccc"/>',
           f'<line x1="{c}" y1="0" x2="{c}" y2="{size}" stroke="#ccc"/>',
           f'<circle cx="{c}" cy="{c}" r="{s:.2f}" fill="none" stroke="#888"/>']
    if radius is not None and math.isfinite(radius):
        out.append(f'<circle cx="{c}" cy="{c}" r="{s * radius:.2f}" fill="none" stroke="#c33" '
                   f'stroke-dasharray="4 3"/>')
    for z, st in zip(ev, stable):
        x, y = px(z)
        fill = "#1f4e9c" if st else "none"
        out.append(f'<circle cx="{x:.2f}" cy="{y:.2f}" r="3" fill="{fill}" stroke="#1f4e9c">'
                   f'<title>{z.real:.6g}{z.imag:+.6g}i</title></circle>')
    out.append("</svg>")
    return "\n".join(out)
