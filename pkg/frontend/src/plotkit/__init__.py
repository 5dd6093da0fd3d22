"""Batch figure generation for hjbfem experiment outputs.

Reads the solver's report.csv and mesh text files; never imports the
solver itself.
"""

from .csvdata import CsvError, load_report
from .meshfile import MeshFileError, load_mesh
from .figures import PlotSpec, fit_slope, plot_convergence, plot_mesh

__all__ = ["CsvError", "load_report", "MeshFileError", "load_mesh",
           "PlotSpec", "fit_slope", "plot_convergence", "plot_mesh"]

__version__ = "0.1.0"
