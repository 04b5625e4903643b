"""Sectorial solutions of linear ODEs with irregular singular points."""

from .puiseux import PuiseuxPoly, compose_chart, format_puiseux, parse_puiseux

__version__ = "0.1.0"

__all__ = ["PuiseuxPoly", "compose_chart", "format_puiseux", "parse_puiseux", "__version__"]
