"""Minimal deterministic SVG plots (bar, line with error bars, scatter)."""

from __future__ import annotations

from xml.sax.saxutils import escape

import numpy as np

W, H, PAD = 480, 320, 48


def _frame(title: str, xlabel: str, ylabel: str, body: list[str]) -> str:
    head = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}">',
        '<rect width="100%" height="100%" fill="white"/>',
        f'<line x1="{PAD}" y1="{H - PAD}" x2="{W - PAD / 2}" y2="{H - PAD}" stroke="black"/>',
        f'<line x1="{PAD}" y1="{PAD / 2}" x2="{PAD}" y2="{H - PAD}" stroke="black"/>',
        f'<text x="{W / 2}" y="16" text-anchor="middle" font-size="13">{escape(title)}</text>',
        f'<text x="{W / 2}" y="{H - 10}" text-anchor="middle" font-size="11">{escape(xlabel)}</text>',
        f'<text x="12" y="{H / 2}" font-size="11" transform="rotate(-90 12 {H / 2})" '
        f'text-anchor="middle">{escape(ylabel)}</text>',
    ]
    return "\n".join(head + body + ["</svg>", ""])


def _scaler(lo: float, hi: float, a: float, b: float):
    if not np.isfinite(lo) or not np.isfinite(hi) or hi <= lo:
        hi = lo + 1.0
    return lambda v: a + (np.asarray(v, dtype=float) - lo) / (hi - lo) * (b - a)


def _ticks(lo: float, hi: float, sx, horizontal: bool) -> list[str]:
    out = []
    for v in np.linspace(lo, hi, 5):
        p = float(sx(v))
        if horizontal:
            out.append(f'<text x="{p:.1f}" y="{H - PAD + 14}" text-anchor="middle" font-size="9">{v:.3g}</text>')
        else:
            out.append(f'<text x="{PAD - 4}" y="{p + 3:.1f}" text-anchor="end" font-size="9">{v:.3g}</text>')
    return out


def bar_chart(x, y, title: str, xlabel: str, ylabel: str) -> str:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    lo, hi = min(0.0, float(y.min())), max(0.0, float(y.max()))
    sx = _scaler(float(x.min()) - 0.5, float(x.max()) + 0.5, PAD, W - PAD / 2)
    sy = _scaler(lo, hi, H - PAD, PAD / 2)
    bw = max(1.0, 0.8 * (W - 1.5 * PAD) / max(len(x), 1))
    body = [
        f'<rect x="{float(sx(xi)) - bw / 2:.2f}" y="{min(float(sy(yi)), float(sy(0))):.2f}" width="{bw:.2f}" '
        f'height="{abs(float(sy(yi)) - float(sy(0))):.2f}" fill="steelblue"/>'
        for xi, yi in zip(x, y)
    ]
    return _frame(title, xlabel, ylabel, body + _ticks(lo, hi, sy, False) + _ticks(x.min(), x.max(), sx, True))


def line_chart(series: dict, title: str, xlabel: str, ylabel: str) -> str:
    """``series``: name -> (x, y, yerr or None)."""
    colors = ["steelblue", "firebrick", "darkgreen", "darkorange"]
    xs = np.concatenate([np.asarray(v[0], dtype=float) for v in series.values()])
    ys = np.concatenate([np.asarray(v[1], dtype=float) for v in series.values()])
    lo, hi = min(0.0, float(ys.min())), float(ys.max()) * 1.05 + 1e-12
    sx = _scaler(float(xs.min()), float(xs.max()), PAD, W - PAD / 2)
    sy = _scaler(lo, hi, H - PAD, PAD / 2)
    body = []
    for c, (name, (x, y, err)) in enumerate(series.items()):
        col = colors[c % len(colors)]
        pts = " ".join(f"{float(sx(a)):.2f},{float(sy(b)):.2f}" for a, b in zip(x, y))
        body.append(f'<polyline points="{pts}" fill="none" stroke="{col}"/>')
        if err is not None:
            for a, b, e in zip(x, y, err):
                body.append(
                    f'<line x1="{float(sx(a)):.2f}" y1="{float(sy(b - e)):.2f}" x2="{float(sx(a)):.2f}" '
                    f'y2="{float(sy(b + e)):.2f}" stroke="{col}"/>'
                )
        body.append(f'<text x="{W - PAD}" y="{PAD / 2 + 14 * (c + 1)}" text-anchor="end" font-size="10" '
                    f'fill="{col}">{escape(str(name))}</text>')
    return _frame(title, xlabel, ylabel, body + _ticks(lo, hi, sy, False) + _ticks(xs.min(), xs.max(), sx, True))


def scatter(x, y, title: str, xlabel: str, ylabel: str, max_points: int = 4000) -> str:
    x, y = np.asarray(x, dtype=float), np.asarray(y, dtype=float)
    if x.size > max_points:
        keep = np.linspace(0, x.size - 1, max_points).astype(int)
        x, y = x[keep], y[keep]
    lo = float(min(x.min(), y.min()))
    hi = float(max(x.max(), y.max()))
    sx = _scaler(lo, hi, PAD, W - PAD / 2)
    sy = _scaler(lo, hi, H - PAD, PAD / 2)
    body = [
        f'<line x1="{float(sx(lo)):.2f}" y1="{float(sy(lo)):.2f}" x2="{float(sx(hi)):.2f}" '
        f'y2="{float(sy(hi)):.2f}" stroke="gray" stroke-dasharray="4"/>'
    ]
    body += [f'<circle cx="{float(sx(a)):.2f}" cy="{float(sy(b)):.2f}" r="1.5" fill="steelblue" fill-opacity="0.5"/>'
             for a, b in zip(x, y)]
    return _frame(title, xlabel, ylabel, body + _ticks(lo, hi, sy, False) + _ticks(lo, hi, sx, True))
