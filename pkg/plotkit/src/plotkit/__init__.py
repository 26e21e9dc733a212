"""Figure rendering for the aggregation simulator's CSV outputs."""

from .figures import KINDS, FigureSpec, render
from .schema import SchemaError

__all__ = ["KINDS", "FigureSpec", "render", "SchemaError"]
