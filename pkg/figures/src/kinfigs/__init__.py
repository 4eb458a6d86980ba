"""Plotting layer over the kinetic-equation toolbox's CSV outputs.

This package never recomputes mathematics: it draws exactly what the
numerical component emitted.  Rendering is a pure function of the CSV bytes
and the figure specification (fixed size, no clock, no randomness).
"""

from .render import FigureSpec, build_figure, render

__all__ = ["FigureSpec", "build_figure", "render"]
__version__ = "0.1.0"
