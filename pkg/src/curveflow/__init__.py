"""Discrete planar curves, symmetric isoperimetric minimisers and curve diffusion flow."""

from .curve import CurveError, CurveMetrics, DiscreteCurve, metrics
from .flow import FlowConfig, FlowReport, kstar, run, smallness_gate
from .symmetry import SymmetrySpec, covered_circle, index_i

__all__ = [
    "CurveError", "CurveMetrics", "DiscreteCurve", "metrics",
    "FlowConfig", "FlowReport", "kstar", "run", "smallness_gate",
    "SymmetrySpec", "covered_circle", "index_i",
]
