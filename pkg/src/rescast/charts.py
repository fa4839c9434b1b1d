"""Deterministic SVG line charts over dated series.

Output depends only on the input data: coordinates are printed with fixed
precision and there are no timestamps or random ids, so identical inputs
give byte-identical documents.
"""

from __future__ import annotations

from dataclasses import dataclass
from xml.sax.saxutils import escape, quoteattr

import numpy as np

# matplotlib's default cycle: blue actual, orange LSTM, green prediction, red RC
PALETTE = ("#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b")
DASHES = ("", "6,3", "2,2", "8,3,2,3")


@dataclass
class ChartSeries:
    label: str
    dates: np.ndarray
    values: np.ndarray
    color: str | None = None
    dash: str | None = None


@dataclass
class ChartStyle:
    width: int = 960
    height: int = 400
    title: str = ""
    y_label: str = ""
    x_ticks: int = 6
    y_ticks: int = 5
    stroke_width: float = 1.2


_MARGIN = {"left": 72, "right": 20, "top": 40, "bottom": 48}


def _fmt(v):
    return f"{v:.2f}"


def render_chart(series, style=None) -> str:
    """Render labelled series into one SVG line chart.

    Each series becomes a single ``<polyline>``; series may cover different
    date ranges and share the x axis. A series with no spread is centred
    vertically.
    """
    style = style or ChartStyle()
    series = [s for s in series if len(s.values)]
    if not series:
        raise ValueError("render_chart needs at least one nonempty series")

    days = [np.asarray(s.dates, dtype="datetime64[D]").astype(np.int64) for s in series]
    vals = [np.asarray(s.values, dtype=np.float64) for s in series]
    x_lo = min(int(d.min()) for d in days)
    x_hi = max(int(d.max()) for d in days)
    y_lo = min(float(v.min()) for v in vals)
    y_hi = max(float(v.max()) for v in vals)
    if x_hi == x_lo:
        x_lo, x_hi = x_lo - 1, x_hi + 1
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 1.0, y_hi + 1.0
    else:
        pad = 0.05 * (y_hi - y_lo)
        y_lo, y_hi = y_lo - pad, y_hi + pad

    left, top = _MARGIN["left"], _MARGIN["top"]
    plot_w = style.width - left - _MARGIN["right"]
    plot_h = style.height - top - _MARGIN["bottom"]

    def sx(d):
        return left + (d - x_lo) / (x_hi - x_lo) * plot_w

    def sy(v):
        return top + (y_hi - v) / (y_hi - y_lo) * plot_h

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{style.width}" height="{style.height}" '
        f'viewBox="0 0 {style.width} {style.height}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{style.width}" height="{style.height}" fill="white"/>',
    ]
    if style.title:
        out.append(f'<text x="{style.width / 2:.1f}" y="22" text-anchor="middle" font-size="14">'
                   f"{escape(style.title)}</text>")
    bottom = top + plot_h
    out.append(f'<g class="axes" stroke="black" stroke-width="1">'
               f'<line x1="{left}" y1="{bottom}" x2="{left + plot_w}" y2="{bottom}"/>'
               f'<line x1="{left}" y1="{top}" x2="{left}" y2="{bottom}"/></g>')

    ticks = ['<g class="ticks">']
    for k in range(style.y_ticks + 1):
        v = y_lo + (y_hi - y_lo) * k / style.y_ticks
        y = _fmt(sy(v))
        ticks.append(f'<line x1="{left - 4}" y1="{y}" x2="{left}" y2="{y}" stroke="black"/>'
                     f'<text x="{left - 6}" y="{y}" text-anchor="end" dominant-baseline="middle">'
                     f"{_fmt(v)}</text>")
    for k in range(style.x_ticks + 1):
        d = x_lo + round((x_hi - x_lo) * k / style.x_ticks)
        x = _fmt(sx(d))
        label = str(np.datetime64(d, "D"))
        ticks.append(f'<line x1="{x}" y1="{bottom}" x2="{x}" y2="{bottom + 4}" stroke="black"/>'
                     f'<text x="{x}" y="{bottom + 16}" text-anchor="middle">{label}</text>')
    ticks.append("</g>")
    out.extend(ticks)
    if style.y_label:
        out.append(f'<text x="14" y="{top + plot_h / 2:.1f}" text-anchor="middle" '
                   f'transform="rotate(-90 14 {top + plot_h / 2:.1f})">{escape(style.y_label)}</text>')

    legend = ['<g class="legend">']
    for k, (s, d, v) in enumerate(zip(series, days, vals)):
        color = s.color or PALETTE[k % len(PALETTE)]
        dash = s.dash if s.dash is not None else DASHES[(k // len(PALETTE)) % len(DASHES)]
        dash_attr = f' stroke-dasharray="{dash}"' if dash else ""
        points = " ".join(f"{_fmt(sx(a))},{_fmt(sy(b))}" for a, b in zip(d.tolist(), v.tolist()))
        out.append(f'<polyline fill="none" stroke="{color}" stroke-width="{style.stroke_width}"'
                   f'{dash_attr} data-label={quoteattr(s.label)} points="{points}"/>')
        ly = top + 10 + 16 * k
        legend.append(f'<line x1="{left + 10}" y1="{ly}" x2="{left + 34}" y2="{ly}" stroke="{color}" '
                      f'stroke-width="2"{dash_attr}/>'
                      f'<text x="{left + 40}" y="{ly}" dominant-baseline="middle">{escape(s.label)}</text>')
    legend.append("</g>")
    out.extend(legend)
    out.append("</svg>")
    return "\n".join(out) + "\n"


def save_png(series, style, path):
    """Write the same chart as a PNG through matplotlib (optional extra)."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    style = style or ChartStyle()
    fig, ax = plt.subplots(figsize=(style.width / 100, style.height / 100), dpi=100)
    for k, s in enumerate(series):
        ax.plot(np.asarray(s.dates, dtype="datetime64[D]"), s.values, label=s.label,
                color=s.color or PALETTE[k % len(PALETTE)], linewidth=style.stroke_width)
    ax.set_title(style.title)
    ax.set_ylabel(style.y_label)
    ax.legend(loc="upper left", frameon=False)
    fig.tight_layout()
    fig.savefig(path, metadata={"Software": None})
    plt.close(fig)
