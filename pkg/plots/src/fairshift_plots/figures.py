"""Static 3-D surface rendering of sweep grids.

Each figure overlays one surface per requested column over the
(tau_g, tau_h) plane: a realized-disparity mesh next to its bound, in the
style of solid versus gradated meshes. Rendering is deterministic: fixed
view angles, figure size, and dpi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .grid import GridData, GridError, read_grid

STYLES = ("solid", "gradated")
VIEW = {"elev": 24.0, "azim": -63.0}
FIGSIZE = (7.0, 5.6)
DPI = 130
SOLID_COLOR = "#2969b0"


@dataclass(frozen=True)
class SurfaceSpec:
    column: str
    style: str = "solid"

    def __post_init__(self):
        if self.style not in STYLES:
            raise GridError(f"unknown surface style {self.style!r}, expected one of {STYLES}")


@dataclass(frozen=True)
class FigureSpec:
    """What to draw: input grid, surfaces with styles, labels, output path."""

    input_path: str
    surfaces: Sequence[SurfaceSpec]
    output_path: str
    x_label: str = "tau_g"
    y_label: str = "tau_h"
    z_label: str = "disparity"
    title: str = ""

    def __post_init__(self):
        object.__setattr__(
            self,
            "surfaces",
            tuple(
                s if isinstance(s, SurfaceSpec) else SurfaceSpec(**s) for s in self.surfaces
            ),
        )
        if not self.surfaces:
            raise GridError("a figure needs at least one surface")

    @classmethod
    def from_json(cls, payload: dict) -> "FigureSpec":
        return cls(
            input_path=payload["input_path"],
            surfaces=tuple(SurfaceSpec(**s) for s in payload["surfaces"]),
            output_path=payload["output_path"],
            x_label=payload.get("x_label", "tau_g"),
            y_label=payload.get("y_label", "tau_h"),
            z_label=payload.get("z_label", "disparity"),
            title=payload.get("title", ""),
        )


def render(spec: FigureSpec) -> dict:
    """Render the figure to ``spec.output_path`` and return the plotted arrays.

    The input file is only read. Missing columns and ragged grids raise
    GridError before anything is written.
    """
    grid: GridData = read_grid(spec.input_path)
    surfaces = {s.column: grid.surface(s.column) for s in spec.surfaces}

    tg, th = np.meshgrid(grid.tau_g, grid.tau_h, indexing="ij")
    fig = plt.figure(figsize=FIGSIZE, dpi=DPI)
    ax = fig.add_subplot(projection="3d")
    for s in spec.surfaces:
        z = surfaces[s.column]
        if s.style == "solid":
            ax.plot_surface(
                tg, th, z, color=SOLID_COLOR, alpha=0.85, linewidth=0.2,
                edgecolor="white", label=s.column,
            )
        else:
            ax.plot_surface(
                tg, th, z, cmap="magma", alpha=0.55, linewidth=0.2,
                edgecolor="gray", label=s.column,
            )
    ax.set_xlabel(spec.x_label)
    ax.set_ylabel(spec.y_label)
    ax.set_zlabel(spec.z_label)
    if spec.title:
        ax.set_title(spec.title)
    ax.view_init(**VIEW)
    fig.savefig(spec.output_path)
    plt.close(fig)
    return surfaces
