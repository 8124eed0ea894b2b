"""Kinetic and fluid numerics for the incompressible Euler limit in bounded domains."""
from .grid import (
    MaxwellianParams,
    Moments,
    SpatialGrid1D,
    VelocityGrid,
    build_velocity_grid,
    maxwellian,
    moments,
)

__version__ = "0.1.0"

__all__ = [
    "MaxwellianParams",
    "Moments",
    "SpatialGrid1D",
    "VelocityGrid",
    "build_velocity_grid",
    "maxwellian",
    "moments",
]
