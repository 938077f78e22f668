"""Figure rendering for eigenstate-filtering results tables."""

from .render import CSV_COLUMNS, KINDS, RecipeError, build_figure, read_table, render

__version__ = "0.1.0"

__all__ = [
    "CSV_COLUMNS",
    "KINDS",
    "RecipeError",
    "build_figure",
    "read_table",
    "render",
]
