"""Simulation and dimension estimation for tall peaks of Gaussian fields and linear SPDEs."""

__version__ = "0.1.0"

from . import (  # noqa: E402
    bounds,
    covariance,
    dimension,
    errors,
    fieldgen,
    geometry,
    peaks,
    spectral,
)

__all__ = ["bounds", "covariance", "dimension", "errors", "fieldgen", "geometry", "peaks", "spectral", "__version__"]
