"""Numerical verification of OPUC sum rules for unitary ensembles."""

from .errors import (
    DetectionError,
    DomainError,
    InvalidMeasureError,
    KindError,
    OpucError,
    SingularInputError,
)
from .measures import CircleMeasure, CoefficientSequence, RealMeasure, Tail

__version__ = "0.1.0"

__all__ = [
    "CircleMeasure",
    "CoefficientSequence",
    "RealMeasure",
    "Tail",
    "OpucError",
    "DomainError",
    "SingularInputError",
    "KindError",
    "InvalidMeasureError",
    "DetectionError",
]
