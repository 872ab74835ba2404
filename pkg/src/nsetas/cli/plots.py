"""
SVG line charts rendered from jinja2 templates.

CSV traces are the canonical outputs; these charts are a convenience view
of them. Coordinates are computed here and the template only lays them out.
"""

from __future__ import annotations

import math
from collections.abc import Sequence
from pathlib import Path
from typing import Any, Optional

import numpy as np
from jinja2 import Environment, PackageLoader, select_autoescape

WIDTH, HEIGHT = 720, 420
MARGIN = {"left": 70, "right": 20, "top": 40, "bottom": 50}
PALETTE = ("#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b")

_env: Optional[Environment] = None


def template_env() -> Environment:
    global _env
    if _env is None:
        _env = Environment(
            loader=PackageLoader("nsetas", "templates"),
            autoescape=select_autoescape(["svg", "j2"]),
            trim_blocks=True,
            lstrip_blocks=True,
        )
    return _env


class Series:
    """One polyline (or step line, or dots) of a chart."""

    def __init__(
        self,
        name: str,
        x: Sequence[float],
        y: Sequence[float],
        *,
        style: str = "line",
        dash: bool = False,
    ) -> None:
        self.name = name
        self.x = np.asarray(x, dtype=float)
        self.y = np.asarray(y, dtype=float)
        self.style = style
        self.dash = dash


def _ticks(lo: float, hi: float, count: int = 5) -> list[float]:
    if hi <= lo:
        return [lo]
    step = (hi - lo) / (count - 1)
    return [lo + i * step for i in range(count)]


def render_chart(
    path: Path,
    title: str,
    series: Sequence[Series],
    *,
    xlabel: str = "time (days)",
    ylabel: str = "",
    log_y: bool = False,
    markers: Sequence[tuple[float, str]] = (),
) -> Path:
    """
    Write an SVG chart of the given series.

    With ``log_y`` values are plotted on a log10 axis and non-positive
    values are dropped. ``markers`` are labelled vertical lines.
    """
    def transform(values: np.ndarray) -> np.ndarray:
        if not log_y:
            return values
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(values > 0, np.log10(values), np.nan)

    xs = np.concatenate([s.x for s in series] + [np.array([m[0] for m in markers])])
    ys = np.concatenate([transform(s.y) for s in series])
    xs, ys = xs[np.isfinite(xs)], ys[np.isfinite(ys)]
    x_lo, x_hi = (float(xs.min()), float(xs.max())) if xs.size else (0.0, 1.0)
    y_lo, y_hi = (float(ys.min()), float(ys.max())) if ys.size else (0.0, 1.0)
    if x_hi == x_lo:
        x_hi = x_lo + 1.0
    if y_hi == y_lo:
        y_lo, y_hi = y_lo - 0.5, y_hi + 0.5

    plot_w = WIDTH - MARGIN["left"] - MARGIN["right"]
    plot_h = HEIGHT - MARGIN["top"] - MARGIN["bottom"]

    def px(x: float) -> float:
        return MARGIN["left"] + (x - x_lo) / (x_hi - x_lo) * plot_w

    def py(y: float) -> float:
        return MARGIN["top"] + (1.0 - (y - y_lo) / (y_hi - y_lo)) * plot_h

    drawn: list[dict[str, Any]] = []
    for index, s in enumerate(series):
        y = transform(s.y)
        ok = np.isfinite(s.x) & np.isfinite(y)
        points = list(zip(s.x[ok], y[ok]))
        if s.style == "step" and points:
            stepped = [points[0]]
            for (x0, y0), (x1, y1) in zip(points, points[1:]):
                stepped += [(x1, y0), (x1, y1)]
            points = stepped
        drawn.append(
            {
                "name": s.name,
                "color": PALETTE[index % len(PALETTE)],
                "style": s.style,
                "dash": s.dash,
                "points": [(round(float(px(x)), 2), round(float(py(y)), 2)) for x, y in points],
            }
        )

    y_ticks = [
        {"y": round(py(v), 2), "label": f"{10**v:.3g}" if log_y else f"{v:.3g}"}
        for v in _ticks(y_lo, y_hi)
    ]
    x_ticks = [{"x": round(px(v), 2), "label": f"{v:.4g}"} for v in _ticks(x_lo, x_hi)]
    svg = template_env().get_template("chart.svg.j2").render(
        width=WIDTH,
        height=HEIGHT,
        margin=MARGIN,
        title=title,
        xlabel=xlabel,
        ylabel=ylabel + (" (log scale)" if log_y and ylabel else ""),
        series=drawn,
        x_ticks=x_ticks,
        y_ticks=y_ticks,
        markers=[
            {"x": round(px(x), 2), "label": label} for x, label in markers if math.isfinite(x)
        ],
    )
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(svg, encoding="utf-8")
    return path
