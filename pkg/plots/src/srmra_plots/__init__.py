"""Figure rendering for srmra experiment CSV outputs.

Standalone consumer of the documented table formats; it never imports
the generating package.
"""

from .figures import FIGURE_KINDS, PlotJob, fit_loglog_slope, render
from .tables import SchemaError, read_table

__version__ = "0.1.0"

__all__ = [
    "FIGURE_KINDS",
    "PlotJob",
    "SchemaError",
    "fit_loglog_slope",
    "read_table",
    "render",
    "__version__",
]
