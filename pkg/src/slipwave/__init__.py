"""Spectral solver and verification lab for traveling free-surface Stokes
waves over a Navier-slip bottom."""

from .fields import DataTuple, SolutionState, StripSpectrum, SurfaceSpectrum, frequency_filter
from .grid import ChebOps, Grid, chebyshev_ops
from .params import BoundaryMode, PhysicalParams, SlipLaw

__all__ = [
    "Grid",
    "ChebOps",
    "chebyshev_ops",
    "SurfaceSpectrum",
    "StripSpectrum",
    "DataTuple",
    "SolutionState",
    "frequency_filter",
    "PhysicalParams",
    "SlipLaw",
    "BoundaryMode",
]

__version__ = "0.1.0"
