"""Delayed free-boundary tumour growth with angiogenesis.

Stationary radii, linear stability thresholds, first-order delay
corrections and a radially symmetric simulator with delay.
"""

from tumordelay.errors import (
    ConvergenceError,
    DelayTooLargeError,
    DomainError,
    NoStationaryRadiusError,
    SimulationAborted,
)
from tumordelay.stationary import ModelParams

__all__ = [
    "ConvergenceError",
    "DelayTooLargeError",
    "DomainError",
    "ModelParams",
    "NoStationaryRadiusError",
    "SimulationAborted",
]
