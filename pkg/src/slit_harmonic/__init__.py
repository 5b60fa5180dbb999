"""Numerical toolkit for the degenerate operator div(|y|^a grad u) on slit
domains: profiles and distances, weighted finite differences, the homogeneous
spectral basis in zip coordinates, the thin-obstacle solver, regularized
distance functions, and regularity analytics."""

from .geometry import Params, Point, PowerCurve, SlitGeometry

__version__ = "0.1.0"

__all__ = ["Params", "Point", "PowerCurve", "SlitGeometry", "__version__"]
