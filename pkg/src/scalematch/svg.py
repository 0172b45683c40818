"""Standalone SVG rendering of paired size histograms.

No plotting dependency: the chart is assembled as text.  Every bin yields
exactly two <rect> bars (source and target series), overlaid with
translucent fills, plus the JS divergence printed in a corner.
"""

from __future__ import annotations

from xml.sax.saxutils import escape

from .stats import DivergenceReport

_WIDTH = 720
_HEIGHT = 420
_MARGIN_L = 56
_MARGIN_R = 16
_MARGIN_T = 40
_MARGIN_B = 44

_STYLE = (
    ".bar-source { fill: #d95f02; fill-opacity: 0.55; }\n"
    ".bar-target { fill: #1b6ca8; fill-opacity: 0.55; }\n"
    "text { font-family: sans-serif; font-size: 13px; fill: #222; }\n"
    ".axis { stroke: #444; stroke-width: 1; }\n"
)


def _fmt(v: float) -> str:
    return f"{v:.4g}"


def render_divergence_svg(report: DivergenceReport, title: str = "object size distribution") -> str:
    """Render a DivergenceReport as a self-contained SVG document string."""
    bounds = report.boundaries
    lo, hi = float(bounds[0]), float(bounds[-1])
    span = hi - lo if hi > lo else 1.0
    plot_w = _WIDTH - _MARGIN_L - _MARGIN_R
    plot_h = _HEIGHT - _MARGIN_T - _MARGIN_B
    peak = max(float(report.prob_source.max()), float(report.prob_target.max()), 1e-12)

    def x_of(v: float) -> float:
        return _MARGIN_L + (v - lo) / span * plot_w

    def bar(k: int, prob: float, cls: str) -> str:
        x0 = x_of(float(bounds[k]))
        x1 = x_of(float(bounds[k + 1]))
        h = prob / peak * plot_h
        y = _MARGIN_T + plot_h - h
        return (
            f'<rect class="bar {cls}" x="{x0:.2f}" y="{y:.2f}" '
            f'width="{max(x1 - x0, 0.0):.2f}" height="{h:.2f}"/>'
        )

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_WIDTH}" height="{_HEIGHT}" '
        f'viewBox="0 0 {_WIDTH} {_HEIGHT}">',
        f"<style>{_STYLE}</style>",
        f'<rect x="0" y="0" width="{_WIDTH}" height="{_HEIGHT}" fill="#ffffff"/>',
        f'<text x="{_MARGIN_L}" y="22" font-size="16">{escape(title)}</text>',
    ]
    for k in range(report.prob_target.size):
        parts.append(bar(k, float(report.prob_target[k]), "bar-target"))
    for k in range(report.prob_source.size):
        parts.append(bar(k, float(report.prob_source[k]), "bar-source"))

    base = _MARGIN_T + plot_h
    parts.append(
        f'<line class="axis" x1="{_MARGIN_L}" y1="{base}" x2="{_WIDTH - _MARGIN_R}" y2="{base}"/>'
    )
    parts.append(f'<line class="axis" x1="{_MARGIN_L}" y1="{_MARGIN_T}" x2="{_MARGIN_L}" y2="{base}"/>')
    parts.append(f'<text x="{_MARGIN_L}" y="{base + 18}">{_fmt(lo)}</text>')
    parts.append(f'<text x="{_WIDTH - _MARGIN_R - 40}" y="{base + 18}">{_fmt(hi)}</text>')
    parts.append(f'<text x="{_MARGIN_L - 48}" y="{_MARGIN_T + 12}">{_fmt(peak)}</text>')
    parts.append(
        f'<text class="js-value" x="{_WIDTH - _MARGIN_R - 170}" y="22">'
        f"JS divergence: {_fmt(report.js)}</text>"
    )
    legend_y = _MARGIN_T + 6
    parts.append(
        f'<rect x="{_WIDTH - 150}" y="{legend_y}" width="12" height="12" '
        'fill="#d95f02" fill-opacity="0.55"/>'
    )
    parts.append(f'<text x="{_WIDTH - 132}" y="{legend_y + 11}">source</text>')
    parts.append(
        f'<rect x="{_WIDTH - 150}" y="{legend_y + 18}" width="12" height="12" '
        'fill="#1b6ca8" fill-opacity="0.55"/>'
    )
    parts.append(f'<text x="{_WIDTH - 132}" y="{legend_y + 29}">target</text>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
