"""Certified convergence and escape-rate bounds for piecewise expanding maps."""

__version__ = "0.1.0"
