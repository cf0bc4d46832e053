"""Minimal native SVG plots (scatter, parity, heatmap, binned summary)."""
from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 480, 360, 56


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def _scale(lo, hi, a, b):
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        lo, hi = (lo - 0.5, lo + 0.5) if np.isfinite(lo) else (0.0, 1.0)
    return lambda v: a + (np.asarray(v, dtype=float) - lo) / (hi - lo) * (b - a), lo, hi


def _frame(title, xlabel, ylabel, xr, yr):
    x0, x1 = xr
    y0, y1 = yr
    return [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" font-family="sans-serif" font-size="11">',
        f'<rect x="{PAD}" y="{PAD // 2}" width="{W - PAD - 16}" height="{H - PAD - PAD // 2}" fill="none" stroke="black"/>',
        f'<text x="{W / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 8}" text-anchor="middle">{escape(xlabel)}</text>',
        f'<text x="14" y="{H / 2}" text-anchor="middle" transform="rotate(-90 14 {H / 2})">{escape(ylabel)}</text>',
        f'<text x="{PAD}" y="{H - PAD + 14}" text-anchor="start">{_fmt(x0)}</text>',
        f'<text x="{W - 16}" y="{H - PAD + 14}" text-anchor="end">{_fmt(x1)}</text>',
        f'<text x="{PAD - 4}" y="{H - PAD}" text-anchor="end">{_fmt(y0)}</text>',
        f'<text x="{PAD - 4}" y="{PAD // 2 + 10}" text-anchor="end">{_fmt(y1)}</text>',
    ]


def scatter(x, y, title="", xlabel="", ylabel="", diagonal=False, line=None) -> str:
    """Scatter plot; ``line`` = (xs, ys) overlays a polyline; ``diagonal`` draws y = x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    ok = np.isfinite(x) & np.isfinite(y)
    x, y = x[ok], y[ok]
    lo_x, hi_x = (x.min(), x.max()) if len(x) else (0.0, 1.0)
    lo_y, hi_y = (y.min(), y.max()) if len(y) else (0.0, 1.0)
    if diagonal:
        lo_x = lo_y = min(lo_x, lo_y)
        hi_x = hi_y = max(hi_x, hi_y)
    sx, lo_x, hi_x = _scale(lo_x, hi_x, PAD, W - 16)
    sy, lo_y, hi_y = _scale(lo_y, hi_y, H - PAD, PAD // 2)
    out = _frame(title, xlabel, ylabel, (lo_x, hi_x), (lo_y, hi_y))
    if diagonal:
        out.append(f'<line x1="{sx(lo_x):.1f}" y1="{sy(lo_y):.1f}" x2="{sx(hi_x):.1f}" y2="{sy(hi_y):.1f}" '
                   'stroke="grey" stroke-dasharray="4 3"/>')
    for a, b in zip(sx(x), sy(y)):
        out.append(f'<circle cx="{a:.1f}" cy="{b:.1f}" r="2.5" fill="steelblue" fill-opacity="0.7"/>')
    if line is not None:
        lx, ly = (np.asarray(v, dtype=float) for v in line)
        keep = np.isfinite(lx) & np.isfinite(ly)
        pts = " ".join(f"{a:.1f},{b:.1f}" for a, b in zip(sx(lx[keep]), sy(ly[keep])))
        out.append(f'<polyline points="{pts}" fill="none" stroke="firebrick" stroke-width="2"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def heatmap(matrix, labels, title="") -> str:
    """Diverging blue-white-red heatmap for values in [-1, 1]."""
    m = np.asarray(matrix, dtype=float)
    n = len(labels)
    cell = max(8, min(24, 480 // max(n, 1)))
    left = 110
    size = left + cell * n + 20
    out = [f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" font-family="sans-serif" font-size="9">',
           f'<text x="{size / 2}" y="14" text-anchor="middle" font-size="12">{escape(title)}</text>']
    for i in range(n):
        out.append(f'<text x="{left - 4}" y="{left + cell * i + cell * 0.7:.1f}" text-anchor="end">{escape(labels[i])}</text>')
        out.append(f'<text x="{left + cell * i + cell * 0.7:.1f}" y="{left - 4}" '
                   f'transform="rotate(-60 {left + cell * i + cell * 0.7:.1f} {left - 4})">{escape(labels[i])}</text>')
        for j in range(n):
            v = float(np.clip(m[i, j], -1, 1)) if np.isfinite(m[i, j]) else 0.0
            r, g, b = (255, int(255 * (1 - v)), int(255 * (1 - v))) if v >= 0 else \
                (int(255 * (1 + v)), int(255 * (1 + v)), 255)
            out.append(f'<rect x="{left + cell * j}" y="{left + cell * i}" width="{cell}" height="{cell}" '
                       f'fill="rgb({r},{g},{b})"><title>{escape(labels[i])} / {escape(labels[j])}: {v:.3f}</title></rect>')
    out.append("</svg>")
    return "\n".join(out) + "\n"
