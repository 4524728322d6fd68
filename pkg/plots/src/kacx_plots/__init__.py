"""Figure rendering for kacx CSV artifacts."""

from .figures import FIGURE_KINDS, FigureSpec, render

__all__ = ["FIGURE_KINDS", "FigureSpec", "render"]
__version__ = "0.1.0"
