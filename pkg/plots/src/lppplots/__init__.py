"""Figures from lppsim CSV/JSON result files."""

from .render import (
    DEFAULT_REFERENCE_SLOPE,
    EmptyInputError,
    PlotError,
    PlotSpec,
    RenderResult,
    SchemaError,
    SCHEMA_COLUMNS,
    fit_loglog,
    read_rows,
    render,
)

__version__ = "0.1.0"
