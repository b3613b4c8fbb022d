"""Batch figure rendering for districting-experiment results CSVs."""

from .data import DataError, bin_indices, column, least_squares, read_table
from .figures import KINDS, PlotSpec, RenderInfo, render

__version__ = "0.1.0"
