"""Threshold-curve figure rendering.

Renders the curve command's table to a PNG next to the CSV: minimum
feasible threshold per analysis against the total per-coordinate noise,
with a marker at each series' lowest threshold and a dotted vertical line
at its feasibility edge. Uses the Agg backend so rendering works headless.
"""

from __future__ import annotations

import math
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

__all__ = ["render_curve"]


def render_curve(
    path,
    total_noise: Sequence[float],
    series: Mapping[str, Sequence[float | None]],
    *,
    title: str | None = None,
) -> None:
    """Write a PNG of threshold-vs-noise curves.

    ``series`` maps a label to per-grid-point thresholds, with None marking
    infeasible points; line segments break across gaps.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for label, values in series.items():
        cleaned = [math.nan if v is None else float(v) for v in values]
        (line,) = ax.plot(total_noise, cleaned, label=label, linewidth=1.4)
        feasible = [(x, v) for x, v in zip(total_noise, cleaned) if not math.isnan(v)]
        if not feasible:
            continue
        color = line.get_color()
        ax.axvline(feasible[0][0], color=color, linestyle=":", linewidth=0.9, alpha=0.6)
        low_x, low_v = min(feasible, key=lambda pair: pair[1])
        ax.plot([low_x], [low_v], marker="o", color=color, markersize=4)
    ax.set_xlabel("total noise per coordinate")
    ax.set_ylabel("minimum threshold offset tau")
    if title:
        ax.set_title(title)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, dpi=150)
    plt.close(fig)
