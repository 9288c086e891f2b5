"""Degenerate SIS epidemic models with saturated incidence on an interval."""

__version__ = "0.1.0"
