"""Measurement-based SINR modelling: gain matrices, metricity, affectance,
multi-channel link capacity and classifier evaluation."""

from .core import Environment, Link, PowerAssignment
from .gains import UNREACHABLE, GainMatrix, NodeLayout, PathLossFit

__version__ = "0.1.0"

__all__ = [
    "Environment",
    "Link",
    "PowerAssignment",
    "UNREACHABLE",
    "GainMatrix",
    "NodeLayout",
    "PathLossFit",
]
