"""Deterministic SVG plots of error traces.

Hand-rolled SVG output so that identical inputs produce byte-identical
files: fixed canvas, fixed palette, fixed float formatting, no timestamps.
Curves are drawn on a log10 error axis against linear time.
"""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = ["parse_timeseries_csv", "emit_plot", "PALETTE"]

PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"]

WIDTH = 720.0
HEIGHT = 480.0
MARGIN_LEFT = 72.0
MARGIN_RIGHT = 16.0
MARGIN_TOP = 28.0
MARGIN_BOTTOM = 48.0
LOG_FLOOR = 1e-16


def parse_timeseries_csv(path: Path) -> dict[str, np.ndarray]:
    """Read a diagnostics CSV into column arrays.

    Skips leading ``#`` comment lines; the first remaining line is the
    header. Raises with the file name and line number on ragged rows.
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"CSV file not found: {path}")
    header: list[str] | None = None
    columns: list[list[float]] = []
    with path.open() as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            fields = line.split(",")
            if header is None:
                header = fields
                columns = [[] for _ in header]
                continue
            if len(fields) != len(header):
                raise ValueError(
                    f"{path}:{lineno}: expected {len(header)} fields, got {len(fields)}"
                )
            for col, text in zip(columns, fields):
                col.append(float(text))
    if header is None:
        raise ValueError(f"{path}: no header row found")
    return {name: np.asarray(col) for name, col in zip(header, columns)}


def _nice_ticks(lo: float, hi: float, target: int = 6) -> list[float]:
    span = hi - lo
    if span <= 0:
        return [lo]
    raw = span / target
    magnitude = 10.0 ** np.floor(np.log10(raw))
    for mult in (1.0, 2.0, 5.0, 10.0):
        step = mult * magnitude
        if span / step <= target:
            break
    first = np.ceil(lo / step) * step
    ticks = np.arange(first, hi + 0.5 * step, step)
    return [float(v) for v in ticks]


def _fmt(value: float) -> str:
    return f"{value:.2f}"


def emit_plot(
    csv_paths: Sequence[Path],
    out_path: Path,
    column: str = "l2_error_normalized",
    labels: Sequence[str] | None = None,
    title: str = "error vs time",
) -> Path:
    """Render one log-scale error curve per CSV into a deterministic SVG.

    Raises before creating the output file if the curve list is empty or any
    CSV is missing, ragged, or lacks the requested column.
    """
    if not csv_paths:
        raise ValueError("no input curves given")
    curves = []
    for idx, path in enumerate(csv_paths):
        table = parse_timeseries_csv(Path(path))
        if "t" not in table or column not in table:
            raise ValueError(f"{path}: missing column 't' or {column!r}")
        label = labels[idx] if labels else Path(path).stem
        curves.append((label, table["t"], np.maximum(table[column], LOG_FLOOR)))

    x_lo = min(float(t.min()) for _, t, _ in curves)
    x_hi = max(float(t.max()) for _, t, _ in curves)
    y_lo = np.floor(min(np.log10(e.min()) for _, _, e in curves))
    y_hi = np.ceil(max(np.log10(e.max()) for _, _, e in curves))
    if x_hi <= x_lo:
        x_hi = x_lo + 1.0
    if y_hi <= y_lo:
        y_hi = y_lo + 1.0

    plot_w = WIDTH - MARGIN_LEFT - MARGIN_RIGHT
    plot_h = HEIGHT - MARGIN_TOP - MARGIN_BOTTOM

    def sx(x: float) -> float:
        return MARGIN_LEFT + (x - x_lo) / (x_hi - x_lo) * plot_w

    def sy(log_e: float) -> float:
        return MARGIN_TOP + (y_hi - log_e) / (y_hi - y_lo) * plot_h

    parts = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH:.0f}" '
        f'height="{HEIGHT:.0f}" viewBox="0 0 {WIDTH:.0f} {HEIGHT:.0f}">',
        f'<rect x="0" y="0" width="{WIDTH:.0f}" height="{HEIGHT:.0f}" fill="white"/>',
        f'<rect x="{_fmt(MARGIN_LEFT)}" y="{_fmt(MARGIN_TOP)}" width="{_fmt(plot_w)}" '
        f'height="{_fmt(plot_h)}" fill="none" stroke="black" stroke-width="1"/>',
        f'<text x="{_fmt(MARGIN_LEFT + 0.5 * plot_w)}" y="18" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{title}</text>',
    ]

    for tick in _nice_ticks(x_lo, x_hi):
        px = sx(tick)
        parts.append(
            f'<line x1="{_fmt(px)}" y1="{_fmt(MARGIN_TOP + plot_h)}" '
            f'x2="{_fmt(px)}" y2="{_fmt(MARGIN_TOP + plot_h + 5)}" stroke="black"/>'
        )
        parts.append(
            f'<text x="{_fmt(px)}" y="{_fmt(MARGIN_TOP + plot_h + 20)}" '
            f'text-anchor="middle" font-family="sans-serif" font-size="11">{tick:g}</text>'
        )
    for decade in range(int(y_lo), int(y_hi) + 1):
        py = sy(float(decade))
        parts.append(
            f'<line x1="{_fmt(MARGIN_LEFT - 5)}" y1="{_fmt(py)}" '
            f'x2="{_fmt(MARGIN_LEFT)}" y2="{_fmt(py)}" stroke="black"/>'
        )
        parts.append(
            f'<line x1="{_fmt(MARGIN_LEFT)}" y1="{_fmt(py)}" x2="{_fmt(MARGIN_LEFT + plot_w)}" '
            f'y2="{_fmt(py)}" stroke="#dddddd" stroke-width="0.5"/>'
        )
        parts.append(
            f'<text x="{_fmt(MARGIN_LEFT - 8)}" y="{_fmt(py + 4)}" text-anchor="end" '
            f'font-family="sans-serif" font-size="11">1e{decade}</text>'
        )
    parts.append(
        f'<text x="{_fmt(MARGIN_LEFT + 0.5 * plot_w)}" y="{_fmt(HEIGHT - 10)}" '
        f'text-anchor="middle" font-family="sans-serif" font-size="12">t</text>'
    )

    for idx, (label, t, e) in enumerate(curves):
        color = PALETTE[idx % len(PALETTE)]
        points = " ".join(
            f"{_fmt(sx(float(x)))},{_fmt(sy(float(np.log10(y))))}"
            for x, y in zip(t, e)
        )
        parts.append(
            f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{points}"/>'
        )
        ly = MARGIN_TOP + 14 + 16 * idx
        lx = MARGIN_LEFT + plot_w - 150
        parts.append(
            f'<line x1="{_fmt(lx)}" y1="{_fmt(ly - 4)}" x2="{_fmt(lx + 24)}" '
            f'y2="{_fmt(ly - 4)}" stroke="{color}" stroke-width="1.5"/>'
        )
        parts.append(
            f'<text x="{_fmt(lx + 30)}" y="{_fmt(ly)}" font-family="sans-serif" '
            f'font-size="11">{label}</text>'
        )

    parts.append("</svg>")
    out_path = Path(out_path)
    out_path.parent.mkdir(parents=True, exist_ok=True)
    out_path.write_bytes(("\n".join(parts) + "\n").encode("utf-8"))
    return out_path
