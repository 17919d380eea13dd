"""Minimal SVG plot of residual decay, written by hand so output is byte-stable."""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .flow import FlowTrace

WIDTH, HEIGHT = 640, 400
MARGIN = dict(left=70, right=20, top=30, bottom=50)
FLOOR = 1e-16


def _scale(lo, hi, a, b):
    if hi <= lo:
        mid = 0.5 * (a + b)
        return lambda x: mid
    return lambda x: a + (x - lo) * (b - a) / (hi - lo)


def residual_svg(times, norms, title: str = "residual decay") -> str:
    times = np.asarray(times, dtype=float)
    norms = np.asarray(norms, dtype=float)
    if times.size == 0:
        raise ValueError("empty trace")
    logs = np.log10(np.maximum(norms, FLOOR))
    x0, x1 = MARGIN["left"], WIDTH - MARGIN["right"]
    y0, y1 = HEIGHT - MARGIN["bottom"], MARGIN["top"]
    lo, hi = math.floor(logs.min()), math.ceil(logs.max())
    if hi == lo:
        hi = lo + 1
    sx = _scale(times.min(), times.max(), x0, x1)
    sy = _scale(lo, hi, y0, y1)

    out = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{WIDTH}" height="{HEIGHT}" viewBox="0 0 {WIDTH} {HEIGHT}">',
        f'<rect x="0" y="0" width="{WIDTH}" height="{HEIGHT}" fill="white"/>',
        f'<text x="{WIDTH / 2:.1f}" y="18" text-anchor="middle" font-family="sans-serif" font-size="14">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    for e in range(lo, hi + 1):
        y = sy(e)
        out.append(f'<line x1="{x0 - 4}" y1="{y:.2f}" x2="{x0}" y2="{y:.2f}" stroke="black"/>')
        out.append(f'<text x="{x0 - 8}" y="{y + 4:.2f}" text-anchor="end" font-family="sans-serif" font-size="11">1e{e}</text>')
    for t in (times.min(), times.max()):
        out.append(f'<text x="{sx(t):.2f}" y="{y0 + 18}" text-anchor="middle" font-family="sans-serif" font-size="11">{t:.4g}</text>')
    out.append(f'<text x="{(x0 + x1) / 2:.1f}" y="{HEIGHT - 10}" text-anchor="middle" font-family="sans-serif" font-size="12">time</text>')

    pts = [(sx(t), sy(v)) for t, v in zip(times, logs)]
    if len(pts) == 1:
        out.append(f'<circle class="marker" cx="{pts[0][0]:.2f}" cy="{pts[0][1]:.2f}" r="3" fill="steelblue"/>')
    else:
        coords = " ".join(f"{x:.2f},{y:.2f}" for x, y in pts)
        out.append(f'<polyline class="residual" fill="none" stroke="steelblue" stroke-width="1.5" points="{coords}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def emit_plot(trace: FlowTrace, path, title: str = "residual decay") -> Path:
    """Write the log-scale residual sup-norm of ``trace`` against time as SVG."""
    if len(trace) == 0:
        raise ValueError("empty trace")
    path = Path(path)
    path.write_text(residual_svg(trace.times, trace.residual_norm, title))
    return path
