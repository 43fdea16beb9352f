"""Deterministic CSV / JSON / SVG emission for experiment results.

Output bytes are a pure function of the data: fixed float formatting,
sorted JSON keys, no timestamps. SVG plots are written directly (axes,
polylines, reference lines) so reruns with the same seed are
byte-identical.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

FLOAT_FMT = "{:.12g}"

_PALETTE = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#8c564b"]


def fmt(value) -> str:
    if isinstance(value, float):
        return FLOAT_FMT.format(value)
    return str(value)


@dataclass(frozen=True)
class MetricSeries:
    """An empirical distribution: sorted sample values with cumulative freq."""

    name: str
    values: np.ndarray
    cum: np.ndarray

    @classmethod
    def from_samples(cls, name: str, samples: Sequence[float]) -> "MetricSeries":
        arr = np.sort(np.asarray(list(samples), dtype=float))
        m = len(arr)
        cum = (np.arange(1, m + 1) / m) if m else np.empty(0)
        return cls(name=name, values=arr, cum=cum)

    @property
    def ccdf(self) -> np.ndarray:
        return 1.0 - self.cum

    def quantile_leq(self, threshold: float) -> float:
        """Fraction of samples <= threshold (1.0 for an empty series)."""
        if len(self.values) == 0:
            return 1.0
        return float(np.searchsorted(self.values, threshold, side="right")) / len(self.values)


@dataclass(frozen=True)
class PlotSpec:
    """One SVG plot: a set of series drawn as CDF or CCDF curves."""

    name: str
    series_names: tuple[str, ...]
    mode: str = "cdf"  # or "ccdf"
    ref_lines: tuple[tuple[float, str], ...] = ()
    xlabel: str = "value"
    title: str = ""


@dataclass(frozen=True)
class Table:
    name: str
    header: tuple[str, ...]
    rows: tuple[tuple, ...] = field(default_factory=tuple)


def write_csv(path: Path, header: Sequence[str], rows: Sequence[Sequence]) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(list(header))
        for row in rows:
            writer.writerow([fmt(v) for v in row])


def write_series_csv(path: Path, series: MetricSeries) -> None:
    rows = [(v, c, 1.0 - c) for v, c in zip(series.values, series.cum)]
    write_csv(path, ["value", "cdf", "ccdf"], rows)


def write_json(path: Path, obj: dict) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# SVG
# ---------------------------------------------------------------------------

_W, _H = 640, 420
_ML, _MR, _MT, _MB = 70, 20, 34, 48


def _ticks(lo: float, hi: float, n: int = 5) -> list[float]:
    if hi <= lo:
        hi = lo + 1.0
    raw = (hi - lo) / n
    mag = 10.0 ** math.floor(math.log10(raw))
    step = min(s * mag for s in (1, 2, 5, 10) if s * mag >= raw)
    first = math.ceil(lo / step) * step
    out = []
    v = first
    while v <= hi + 1e-9 * step:
        out.append(0.0 if abs(v) < 1e-12 * step else v)
        v += step
    return out


def _downsample(xs: np.ndarray, ys: np.ndarray, cap: int = 1200):
    if len(xs) <= cap:
        return xs, ys
    idx = np.linspace(0, len(xs) - 1, cap).astype(int)
    return xs[idx], ys[idx]


def write_distribution_svg(path: Path, all_series: Sequence[MetricSeries],
                           spec: PlotSpec) -> None:
    chosen = [s for s in all_series if s.name in spec.series_names and len(s.values)]
    xs_all = [s.values for s in chosen] + [np.array([x for x, _ in spec.ref_lines])
                                           if spec.ref_lines else np.empty(0)]
    xs_all = [a for a in xs_all if len(a)]
    if xs_all:
        xlo = min(float(a.min()) for a in xs_all)
        xhi = max(float(a.max()) for a in xs_all)
    else:
        xlo, xhi = 0.0, 1.0
    if xhi <= xlo:
        xhi = xlo + 1.0
    pad = 0.04 * (xhi - xlo)
    xlo, xhi = xlo - pad, xhi + pad

    def px(x: float) -> float:
        return _ML + (x - xlo) / (xhi - xlo) * (_W - _ML - _MR)

    def py(y: float) -> float:
        return _H - _MB - y * (_H - _MT - _MB)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2:.1f}" y="20" text-anchor="middle" '
        f'font-family="sans-serif" font-size="14">{spec.title or spec.name}</text>',
    ]
    # axes
    parts.append(f'<rect x="{_ML}" y="{_MT}" width="{_W - _ML - _MR}" '
                 f'height="{_H - _MT - _MB}" fill="none" stroke="black"/>')
    for xt in _ticks(xlo, xhi):
        parts.append(f'<line x1="{px(xt):.2f}" y1="{_H - _MB}" x2="{px(xt):.2f}" '
                     f'y2="{_H - _MB + 5}" stroke="black"/>')
        parts.append(f'<text x="{px(xt):.2f}" y="{_H - _MB + 18}" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="11">{xt:.6g}</text>')
    for yt in (0.0, 0.25, 0.5, 0.75, 1.0):
        parts.append(f'<line x1="{_ML - 5}" y1="{py(yt):.2f}" x2="{_ML}" '
                     f'y2="{py(yt):.2f}" stroke="black"/>')
        parts.append(f'<text x="{_ML - 9}" y="{py(yt) + 4:.2f}" text-anchor="end" '
                     f'font-family="sans-serif" font-size="11">{yt:g}</text>')
    parts.append(f'<text x="{(_ML + _W - _MR) / 2:.1f}" y="{_H - 10}" '
                 f'text-anchor="middle" font-family="sans-serif" font-size="12">'
                 f'{spec.xlabel}</text>')

    for idx, s in enumerate(chosen):
        ys = s.cum if spec.mode == "cdf" else s.ccdf
        vx, vy = _downsample(s.values, ys)
        pts = " ".join(f"{px(float(x)):.2f},{py(float(y)):.2f}"
                       for x, y in zip(vx, vy))
        color = _PALETTE[idx % len(_PALETTE)]
        parts.append(f'<polyline points="{pts}" fill="none" stroke="{color}" '
                     f'stroke-width="1.5"/>')
        parts.append(f'<text x="{_W - _MR - 6}" y="{_MT + 16 + 14 * idx}" '
                     f'text-anchor="end" font-family="sans-serif" font-size="11" '
                     f'fill="{color}">{s.name}</text>')

    for x, label in spec.ref_lines:
        parts.append(f'<line x1="{px(x):.2f}" y1="{_MT}" x2="{px(x):.2f}" '
                     f'y2="{_H - _MB}" stroke="red" stroke-dasharray="5,4"/>')
        parts.append(f'<text x="{px(x) + 4:.2f}" y="{_MT + 12}" '
                     f'font-family="sans-serif" font-size="11" fill="red">{label}</text>')

    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")


def write_overlay_svg(path: Path, side: float,
                      dots: Sequence[tuple[float, float, str]],
                      polylines: Sequence[Sequence[tuple[float, float]]],
                      title: str = "") -> None:
    """Spatial overlay: classified node dots plus packet trajectories."""
    size = 700
    margin = 20

    def p(x: float, y: float) -> tuple[float, float]:
        s = (size - 2 * margin) / side
        return margin + x * s, size - margin - y * s

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" '
        f'viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<rect x="{margin}" y="{margin}" width="{size - 2 * margin}" '
        f'height="{size - 2 * margin}" fill="none" stroke="black"/>',
    ]
    if title:
        parts.append(f'<text x="{size / 2}" y="14" text-anchor="middle" '
                     f'font-family="sans-serif" font-size="12">{title}</text>')
    for line in polylines:
        pts = " ".join(f"{p(x, y)[0]:.2f},{p(x, y)[1]:.2f}" for x, y in line)
        parts.append(f'<polyline points="{pts}" fill="none" stroke="#777777" '
                     f'stroke-width="0.7"/>')
    for x, y, color in dots:
        cx, cy = p(x, y)
        parts.append(f'<circle cx="{cx:.2f}" cy="{cy:.2f}" r="2.0" fill="{color}"/>')
    parts.append("</svg>")
    path.write_text("\n".join(parts) + "\n")
