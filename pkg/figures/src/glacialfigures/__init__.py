"""Figure rendering for glacialdde CSV outputs."""

__version__ = "0.1.0"

from .render import KINDS, FigureSpec, SchemaError, pivot, read_table, render

__all__ = ["KINDS", "FigureSpec", "SchemaError", "pivot", "read_table",
           "render"]
