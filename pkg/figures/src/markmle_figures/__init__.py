"""Static figure rendering for markmle CSV artifacts."""

from .render import FigureRequest, RenderReport, SchemaError, render

__all__ = ["FigureRequest", "RenderReport", "SchemaError", "render"]
