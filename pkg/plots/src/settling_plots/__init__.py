"""Figure generation from settling sweep records (CSV schema only)."""

from .render import KINDS, FigureSpec, SchemaError, render

__all__ = ["KINDS", "FigureSpec", "SchemaError", "render"]
__version__ = "0.1.0"
