"""Minimal deterministic SVG line plots (semilog y), no plotting dependency.

Output contains no timestamps or random identifiers, so identical inputs give
byte-identical files.
"""

from __future__ import annotations

import math

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e"]

WIDTH = 640
HEIGHT = 420
MARGIN_L = 72
MARGIN_R = 16
MARGIN_T = 20
MARGIN_B = 52


def _fmt(v: float) -> str:
    return f"{v:.2f}"


def render_semilog_svg(
    series: list[tuple[str, list[float], list[float]]],
    x_label: str,
    y_label: str,
    title: str = "",
) -> str:
    """Polyline plot with a linear x axis and a log10 y axis.

    `series` is a list of (name, xs, ys); nonpositive y values are clamped to
    a decade below the smallest positive value so they stay drawable.
    """
    all_x = [x for _, xs, _ in series for x in xs]
    pos_y = [y for _, _, ys in series for y in ys if y > 0 and math.isfinite(y)]
    if not all_x or not pos_y:
        raise ValueError("nothing to plot")
    x_lo, x_hi = min(all_x), max(all_x)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    floor = min(pos_y) / 10.0
    y_lo = math.floor(math.log10(min(pos_y)))
    y_hi = math.ceil(math.log10(max(pos_y)))
    if y_hi == y_lo:
        y_hi = y_lo + 1

    inner_w = WIDTH - MARGIN_L - MARGIN_R
    inner_h = HEIGHT - MARGIN_T - MARGIN_B

    def px(x: float) -> float:
        return MARGIN_L + (x - x_lo) / (x_hi - x_lo) * inner_w

    def py(y: float) -> float:
        ly = math.log10(max(y, floor))
        return MARGIN_T + (y_hi - ly) / (y_hi - y_lo) * inner_h

    out = []
    out.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">'
    )
    out.append(f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>')
    if title:
        out.append(
            f'<text x="{WIDTH / 2:.0f}" y="14" text-anchor="middle" '
            f'font-family="sans-serif" font-size="13">{title}</text>'
        )

    # frame
    out.append(
        f'<rect x="{MARGIN_L}" y="{MARGIN_T}" width="{inner_w}" height="{inner_h}" '
        f'fill="none" stroke="black" stroke-width="1"/>'
    )

    # x ticks: at most ~6 round steps
    span = x_hi - x_lo
    step = 10 ** math.floor(math.log10(span / 5)) if span > 0 else 1
    for mult in (1, 2, 5, 10):
        if span / (step * mult) <= 6:
            step *= mult
            break
    tick = math.ceil(x_lo / step) * step
    while tick <= x_hi:
        x = px(tick)
        out.append(
            f'<line x1="{_fmt(x)}" y1="{MARGIN_T + inner_h}" x2="{_fmt(x)}" '
            f'y2="{MARGIN_T + inner_h + 5}" stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{_fmt(x)}" y="{MARGIN_T + inner_h + 18}" text-anchor="middle" '
            f'font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
        tick += step

    # y ticks at powers of ten
    for exp in range(y_lo, y_hi + 1):
        y = py(10.0**exp)
        out.append(
            f'<line x1="{MARGIN_L - 5}" y1="{_fmt(y)}" x2="{MARGIN_L}" '
            f'y2="{_fmt(y)}" stroke="black" stroke-width="1"/>'
        )
        out.append(
            f'<line x1="{MARGIN_L}" y1="{_fmt(y)}" x2="{MARGIN_L + inner_w}" '
            f'y2="{_fmt(y)}" stroke="#dddddd" stroke-width="1"/>'
        )
        out.append(
            f'<text x="{MARGIN_L - 8}" y="{_fmt(y + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">1e{exp}</text>'
        )

    # axis labels
    out.append(
        f'<text x="{MARGIN_L + inner_w / 2:.0f}" y="{HEIGHT - 12}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12">{x_label}</text>'
    )
    out.append(
        f'<text x="16" y="{MARGIN_T + inner_h / 2:.0f}" text-anchor="middle" '
        f'font-family="sans-serif" font-size="12" '
        f'transform="rotate(-90 16 {MARGIN_T + inner_h / 2:.0f})">{y_label}</text>'
    )

    # series
    for i, (name, xs, ys) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        pts = " ".join(f"{_fmt(px(x))},{_fmt(py(y))}" for x, y in zip(xs, ys))
        out.append(
            f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="1.5"/>'
        )

    # legend
    lx = MARGIN_L + 12
    ly = MARGIN_T + 14
    for i, (name, _, _) in enumerate(series):
        color = PALETTE[i % len(PALETTE)]
        y = ly + 16 * i
        out.append(
            f'<line x1="{lx}" y1="{y - 4}" x2="{lx + 22}" y2="{y - 4}" '
            f'stroke="{color}" stroke-width="1.5"/>'
        )
        out.append(
            f'<text x="{lx + 28}" y="{y}" font-family="sans-serif" font-size="11">{name}</text>'
        )

    out.append("</svg>")
    return "\n".join(out) + "\n"
