"""Plotting companion for the Lambda-system simulator's file artifacts."""

from .render import PlotJob, render

__version__ = "0.1.0"
