"""Minimal deterministic SVG emission for aggregated learning curves.

Hand-rolled on purpose: the output must be byte-identical across
invocations and machines, which rules out plotting libraries that embed
timestamps, library versions, or font metrics.  Each series is drawn as
a mean polyline with a translucent ±1 std band.
"""

import numpy as np

from .aggregate import interp_series

WIDTH, HEIGHT = 720, 440
MARGIN_L, MARGIN_R, MARGIN_T, MARGIN_B = 64, 16, 28, 44

PALETTE = (
    "#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b",
    "#17becf", "#7f7f7f",
)


def _escape(text):
    return (
        str(text)
        .replace("&", "&amp;")
        .replace("<", "&lt;")
        .replace(">", "&gt;")
        .replace('"', "&quot;")
    )


def _ticks(lo, hi, n=5):
    """A handful of round tick locations covering [lo, hi]."""
    if hi <= lo:
        return [lo]
    raw = (hi - lo) / max(n - 1, 1)
    mag = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 2.5, 5.0, 10.0):
        step = mult * mag
        if step >= raw:
            break
    first = np.ceil(lo / step) * step
    ticks = []
    t = first
    while t <= hi + 1e-9 * step:
        ticks.append(0.0 if abs(t) < 1e-12 * step else float(t))
        t += step
    return ticks or [lo]


def _fmt(v):
    return f"{v:.6g}"


class _Canvas:
    def __init__(self, x_lo, x_hi, y_lo, y_hi):
        if x_hi <= x_lo:
            x_hi = x_lo + 1.0
        if y_hi <= y_lo:
            pad = 1.0 if y_lo == 0 else abs(y_lo) * 0.1
            y_lo, y_hi = y_lo - pad, y_lo + pad
        self.x_lo, self.x_hi = x_lo, x_hi
        self.y_lo, self.y_hi = y_lo, y_hi

    def x(self, v):
        frac = (v - self.x_lo) / (self.x_hi - self.x_lo)
        return MARGIN_L + frac * (WIDTH - MARGIN_L - MARGIN_R)

    def y(self, v):
        frac = (v - self.y_lo) / (self.y_hi - self.y_lo)
        return HEIGHT - MARGIN_B - frac * (HEIGHT - MARGIN_T - MARGIN_B)

    def point(self, xv, yv):
        return f"{self.x(xv):.2f},{self.y(yv):.2f}"


def plot_aggregates(series, path, title="", xlabel="step", ylabel=""):
    """Write an SVG with one mean curve + std band per (label, stats) pair."""
    series = list(series)
    if not series:
        raise ValueError("nothing to plot")

    x_lo = min(float(s.steps.min()) for _, s in series)
    x_hi = max(float(s.steps.max()) for _, s in series)
    y_vals = []
    drawn = []
    for label, stats in series:
        steps = stats.steps.astype(float)
        mean = interp_series(steps, stats.mean, steps)
        std = interp_series(steps, np.where(np.isfinite(stats.std), stats.std, 0.0), steps)
        drawn.append((label, steps, mean, std))
        y_vals.append(mean - std)
        y_vals.append(mean + std)
    y_all = np.concatenate(y_vals)
    y_all = y_all[np.isfinite(y_all)]
    if y_all.size == 0:
        raise ValueError("no finite values to plot")
    y_lo, y_hi = float(y_all.min()), float(y_all.max())
    pad = 0.05 * (y_hi - y_lo)
    cv = _Canvas(x_lo, x_hi, y_lo - pad, y_hi + pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" '
        f'height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
    ]
    # Axes and ticks.
    ax_y = HEIGHT - MARGIN_B
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{MARGIN_T}" x2="{MARGIN_L}" y2="{ax_y}" '
        'stroke="black" stroke-width="1"/>'
    )
    parts.append(
        f'<line x1="{MARGIN_L}" y1="{ax_y}" x2="{WIDTH - MARGIN_R}" '
        f'y2="{ax_y}" stroke="black" stroke-width="1"/>'
    )
    for t in _ticks(cv.x_lo, cv.x_hi):
        px = cv.x(t)
        parts.append(
            f'<line x1="{px:.2f}" y1="{ax_y}" x2="{px:.2f}" y2="{ax_y + 4}" '
            'stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{px:.2f}" y="{ax_y + 16}" font-size="11" '
            f'text-anchor="middle" font-family="sans-serif">{_fmt(t)}</text>'
        )
    for t in _ticks(cv.y_lo, cv.y_hi):
        py = cv.y(t)
        parts.append(
            f'<line x1="{MARGIN_L - 4}" y1="{py:.2f}" x2="{MARGIN_L}" '
            f'y2="{py:.2f}" stroke="black" stroke-width="1"/>'
        )
        parts.append(
            f'<text x="{MARGIN_L - 7}" y="{py + 4:.2f}" font-size="11" '
            f'text-anchor="end" font-family="sans-serif">{_fmt(t)}</text>'
        )
    if title:
        parts.append(
            f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.2f}" y="18" '
            'font-size="14" text-anchor="middle" font-family="sans-serif">'
            f"{_escape(title)}</text>"
        )
    parts.append(
        f'<text x="{(MARGIN_L + WIDTH - MARGIN_R) / 2:.2f}" '
        f'y="{HEIGHT - 8}" font-size="12" text-anchor="middle" '
        f'font-family="sans-serif">{_escape(xlabel)}</text>'
    )
    if ylabel:
        cx, cy = 16, (MARGIN_T + HEIGHT - MARGIN_B) / 2
        parts.append(
            f'<text x="{cx}" y="{cy:.2f}" font-size="12" text-anchor="middle" '
            f'font-family="sans-serif" transform="rotate(-90 {cx} {cy:.2f})">'
            f"{_escape(ylabel)}</text>"
        )

    # Bands first so every mean line draws on top.
    for i, (label, steps, mean, std) in enumerate(drawn):
        color = PALETTE[i % len(PALETTE)]
        upper = [cv.point(s, m + d) for s, m, d in zip(steps, mean, std)]
        lower = [
            cv.point(s, m - d)
            for s, m, d in zip(steps[::-1], mean[::-1], std[::-1])
        ]
        parts.append(
            f'<polygon points="{" ".join(upper + lower)}" fill="{color}" '
            'fill-opacity="0.15" stroke="none"/>'
        )
    for i, (label, steps, mean, std) in enumerate(drawn):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(cv.point(s, m) for s, m in zip(steps, mean))
        parts.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" '
            'stroke-width="1.8"/>'
        )
    # Legend, top-right inside the plot area.
    for i, (label, _, _, _) in enumerate(drawn):
        color = PALETTE[i % len(PALETTE)]
        ly = MARGIN_T + 14 + 16 * i
        lx = WIDTH - MARGIN_R - 170
        parts.append(
            f'<line x1="{lx}" y1="{ly - 4}" x2="{lx + 22}" y2="{ly - 4}" '
            f'stroke="{color}" stroke-width="2"/>'
        )
        parts.append(
            f'<text x="{lx + 28}" y="{ly}" font-size="11" '
            f'font-family="sans-serif">{_escape(label)}</text>'
        )
    parts.append("</svg>")
    data = "\n".join(parts) + "\n"
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(data)
    return path
