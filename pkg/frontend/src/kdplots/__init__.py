"""Static figure rendering for denoising reports (data cloud, fitted atom
chains, principal directions), consuming only the solver's JSON/CSV files."""

from .render import FigureJob, RenderError, render

__all__ = ["FigureJob", "RenderError", "render"]

__version__ = "0.1.0"
