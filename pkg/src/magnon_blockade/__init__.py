"""Magnon blockade in a two-magnon / qubit hybrid: Lindblad and truncated-amplitude g2(0)."""

__version__ = "0.1.0"

from .analytic import g2_analytic, optimal_delta1, steady_amplitudes
from .hilbert import EffectiveParams, FullModelParams, HilbertSpace, Operator
from .lindblad import ThermalConfig, g2_numeric, solve_effective

__all__ = [
    "EffectiveParams", "FullModelParams", "HilbertSpace", "Operator", "ThermalConfig",
    "g2_analytic", "g2_numeric", "optimal_delta1", "solve_effective", "steady_amplitudes",
]
