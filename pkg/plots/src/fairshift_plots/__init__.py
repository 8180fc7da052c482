"""Figure rendering for fairshift sweep grids."""

from .figures import FigureSpec, SurfaceSpec, render
from .grid import GridData, GridError, read_grid

__version__ = "0.1.0"
