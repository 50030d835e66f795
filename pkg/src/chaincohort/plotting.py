"""Static SVG figures for the report subcommands.

Uses the object-oriented matplotlib API (no pyplot state) so figures can be
rendered from worker threads, and fixes the SVG id salt and drops the date
stamp so output is reproducible.
"""

from __future__ import annotations

from typing import Sequence

import matplotlib

matplotlib.use("Agg")
from matplotlib.backends.backend_svg import FigureCanvasSVG  # noqa: E402
from matplotlib.figure import Figure  # noqa: E402

import numpy as np  # noqa: E402

matplotlib.rcParams["svg.hashsalt"] = "chaincohort"
matplotlib.rcParams["svg.fonttype"] = "none"


def line_chart(
    path,
    x,
    series: Sequence[tuple[str, Sequence[float]]],
    title: str,
    xlabel: str,
    ylabel: str,
    logx: bool = False,
    logy: bool = False,
    markers: bool = False,
) -> None:
    fig = Figure(figsize=(7, 4.2))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    x = np.asarray(x, dtype=float)
    for label, y in series:
        y = np.asarray(y, dtype=float)
        ok = np.isfinite(y) & np.isfinite(x)
        if logy:
            ok &= y > 0
        if logx:
            ok &= x > 0
        ax.plot(x[ok], y[ok], "o-" if markers else "-", label=label, markersize=3, linewidth=1.2)
    if logx:
        ax.set_xscale("log")
    if logy:
        ax.set_yscale("log")
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    if len(series) > 1:
        ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})


def step_chart(path, x, y, title: str, xlabel: str, ylabel: str) -> None:
    fig = Figure(figsize=(7, 4.2))
    FigureCanvasSVG(fig)
    ax = fig.add_subplot()
    ax.step(np.asarray(x, dtype=float), np.asarray(y, dtype=float), where="post", linewidth=1.2)
    ax.set_title(title)
    ax.set_xlabel(xlabel)
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
