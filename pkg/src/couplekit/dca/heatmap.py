"""SVG heatmaps of coupling matrices: darker is larger, masked cells crossed out."""

from __future__ import annotations

from collections.abc import Sequence
from pathlib import Path
from xml.sax.saxutils import escape

import numpy as np

CELL = 48
LABEL_W = 120
LABEL_H = 120
LEGEND_H = 70
LIGHTEST = 250
DARKEST = 20
LEGEND_STEPS = 5


def _shade(frac: float) -> str:
    level = int(round(LIGHTEST - frac * (LIGHTEST - DARKEST)))
    return f"#{level:02x}{level:02x}{level:02x}"


def _text_color(frac: float) -> str:
    return "#ffffff" if frac > 0.55 else "#000000"


def render_heatmap(
    matrix: np.ndarray,
    mask: np.ndarray,
    names: Sequence[str],
    title: str = "",
) -> str:
    """Min-max scaled grayscale grid with values printed in each cell."""
    n = len(names)
    vals = matrix[~mask]
    lo = float(vals.min()) if vals.size else 0.0
    hi = float(vals.max()) if vals.size else 0.0
    span = hi - lo

    def frac(v: float) -> float:
        if span > 0:
            return (v - lo) / span
        return 1.0 if v > 0 else 0.0

    width = LABEL_W + n * CELL + 20
    height = 30 + LABEL_H + n * CELL + LEGEND_H
    top = 30 + LABEL_H
    lines = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" '
        f'viewBox="0 0 {width} {height}" font-family="Helvetica, Arial, sans-serif">',
        f'  <rect x="0" y="0" width="{width}" height="{height}" fill="#ffffff" />',
    ]
    if title:
        lines.append(f'  <text x="{width / 2:.1f}" y="20" text-anchor="middle" font-size="14">{escape(title)}</text>')

    for j, name in enumerate(names):
        x = LABEL_W + j * CELL + CELL / 2
        lines.append(
            f'  <text x="{x:.1f}" y="{top - 6}" font-size="11" text-anchor="start" '
            f'transform="rotate(-60 {x:.1f} {top - 6})">{escape(name)}</text>'
        )
    for i, name in enumerate(names):
        y = top + i * CELL + CELL / 2 + 4
        lines.append(
            f'  <text x="{LABEL_W - 6}" y="{y:.1f}" font-size="11" text-anchor="end">{escape(name)}</text>'
        )

    for i in range(n):
        for j in range(n):
            x0, y0 = LABEL_W + j * CELL, top + i * CELL
            if mask[i, j]:
                lines.append(
                    f'  <rect x="{x0}" y="{y0}" width="{CELL}" height="{CELL}" '
                    'fill="#ffffff" stroke="#999999" />'
                )
                lines.append(
                    f'  <line x1="{x0}" y1="{y0}" x2="{x0 + CELL}" y2="{y0 + CELL}" stroke="#999999" />'
                )
                lines.append(
                    f'  <line x1="{x0 + CELL}" y1="{y0}" x2="{x0}" y2="{y0 + CELL}" stroke="#999999" />'
                )
                continue
            f = frac(float(matrix[i, j]))
            lines.append(
                f'  <rect x="{x0}" y="{y0}" width="{CELL}" height="{CELL}" '
                f'fill="{_shade(f)}" stroke="#999999" />'
            )
            lines.append(
                f'  <text x="{x0 + CELL / 2:.1f}" y="{y0 + CELL / 2 + 4:.1f}" font-size="10" '
                f'text-anchor="middle" fill="{_text_color(f)}">{matrix[i, j]:.3g}</text>'
            )

    # scale legend
    ly = top + n * CELL + 20
    box = 24
    for k in range(LEGEND_STEPS):
        f = k / (LEGEND_STEPS - 1)
        lines.append(
            f'  <rect x="{LABEL_W + k * box}" y="{ly}" width="{box}" height="14" '
            f'fill="{_shade(f)}" stroke="#999999" />'
        )
    lines.append(
        f'  <text x="{LABEL_W}" y="{ly + 30}" font-size="11">'
        f"scale: min={lo:.4g} (light), max={hi:.4g} (dark)</text>"
    )
    lines.append("</svg>")
    return "\n".join(lines) + "\n"


def write_heatmap(path: Path, matrix: np.ndarray, mask: np.ndarray, names: Sequence[str], title: str = "") -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(render_heatmap(matrix, mask, names, title), encoding="utf-8")
