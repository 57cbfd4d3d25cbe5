"""Batch renderer for compsched campaign CSVs."""

from .render import FigureSpec, load_spec, render

__all__ = ["FigureSpec", "load_spec", "render"]
__version__ = "0.1.0"
