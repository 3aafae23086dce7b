"""SVG line plot of per-pair SSIM; failed pairs leave gaps in the line."""
from typing import Optional, Sequence
from xml.sax.saxutils import escape

WIDTH = 640
HEIGHT = 320
MARGIN = 40


def _runs(values: Sequence[Optional[float]], lo: int, hi: int) -> list[list[int]]:
    """Maximal runs of consecutive defined indices within ``[lo, hi]``."""
    runs: list[list[int]] = []
    current: list[int] = []
    for i in range(lo, hi + 1):
        if values[i] is None:
            if current:
                runs.append(current)
            current = []
        else:
            current.append(i)
    if current:
        runs.append(current)
    return runs


def ssim_plot_svg(
    values: Sequence[Optional[float]],
    title: str = "",
    highlight: Optional[tuple[int, int]] = None,
) -> str:
    """Render SSIM against pair index.

    Args:
        values: one SSIM per pair, ``None`` for pairs that failed
        title: text drawn above the plot
        highlight: inclusive pair index range drawn in red over the black line

    Returns:
        The SVG document as text; identical inputs give identical text
    """
    n = len(values)
    plot_w = WIDTH - 2 * MARGIN
    plot_h = HEIGHT - 2 * MARGIN

    def x_of(i: int) -> float:
        return MARGIN + (plot_w * i / (n - 1) if n > 1 else plot_w / 2)

    def y_of(v: float) -> float:
        # y axis spans SSIM 0..1; negative scores clamp to the axis
        return MARGIN + plot_h * (1.0 - min(max(v, 0.0), 1.0))

    def polyline(run: list[int], color: str) -> str:
        if len(run) == 1:
            i = run[0]
            return f'<circle cx="{x_of(i):.2f}" cy="{y_of(values[i]):.2f}" r="2" fill="{color}"/>'
        pts = " ".join(f"{x_of(i):.2f},{y_of(values[i]):.2f}" for i in run)
        return f'<polyline points="{pts}" stroke="{color}" stroke-width="1.5" fill="none"/>'

    parts = [
        f'<svg width="{WIDTH}" height="{HEIGHT}" xmlns="http://www.w3.org/2000/svg">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN + plot_h}" x2="{MARGIN + plot_w}" y2="{MARGIN + plot_h}" stroke="gray"/>',
        f'<line x1="{MARGIN}" y1="{MARGIN}" x2="{MARGIN}" y2="{MARGIN + plot_h}" stroke="gray"/>',
        f'<text x="{MARGIN - 6}" y="{MARGIN + 4}" font-size="10" text-anchor="end">1.0</text>',
        f'<text x="{MARGIN - 6}" y="{MARGIN + plot_h + 4}" font-size="10" text-anchor="end">0.0</text>',
        f'<text x="{MARGIN + plot_w}" y="{HEIGHT - 12}" font-size="10" text-anchor="end">pair index ({n} pairs)</text>',
    ]
    if title:
        parts.append(f'<text x="{WIDTH / 2:.0f}" y="{MARGIN / 2 + 4:.0f}" font-size="12" text-anchor="middle">{escape(title)}</text>')
    if n:
        parts.extend(polyline(run, "black") for run in _runs(values, 0, n - 1))
        if highlight is not None and highlight[0] < n:
            lo, hi = highlight[0], min(highlight[1], n - 1)
            parts.extend(polyline(run, "red") for run in _runs(values, lo, hi))
    parts.append("</svg>")
    return "\n".join(parts) + "\n"
