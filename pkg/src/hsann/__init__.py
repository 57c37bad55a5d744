"""Spectral simulator and verification harness for the two-free-surface Hele-Shaw problem."""

from hsann.errors import HSANNError
from hsann.harmonics import ModeIndex, SurfaceCoeffs
from hsann.params import ProblemParams

__version__ = "0.1.0"

__all__ = ["HSANNError", "ModeIndex", "ProblemParams", "SurfaceCoeffs", "__version__"]
