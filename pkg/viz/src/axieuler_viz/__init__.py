"""Post-hoc figure generation from axieuler CSV outputs.

Strict schema-versioned CSV contract; never reads snapshot binaries.
"""

from .plots import FigureSpec, plot_criterion, plot_growth, plot_scaling, render
from .schema import CSV_VERSION, SchemaError, read_table

__version__ = "0.1.0"

__all__ = ["FigureSpec", "plot_criterion", "plot_growth", "plot_scaling",
           "render", "CSV_VERSION", "SchemaError", "read_table",
           "__version__"]
