"""Figure rendering for performa CSV/JSON artifacts."""

from .io import SchemaError, load_report, load_summary, load_surface
from .render import load_style, plot_estimators, plot_surface

__version__ = "0.1.0"
