"""Spectral-Galerkin Monte Carlo simulation of the stochastic nonclassical diffusion equation

    d(u - eps u_xx) + (-u_xx + u^3 - u) dt = g(u) dB    on [0, 1], u = 0 at both ends.
"""

from .dynamics import Additive, Cubic, GalerkinState, Linear, LinearMult, SineMult, Truncated
from .integrators import BlowUpError, Scheme, SimConfig, Trajectory, simulate, step, strong_order
from .spectral import SobolevSpace, SpectralField
from .stochastic import BrownianPath, derive_seed, refine, sample_path

__all__ = [
    "Additive",
    "BlowUpError",
    "BrownianPath",
    "Cubic",
    "GalerkinState",
    "Linear",
    "LinearMult",
    "Scheme",
    "SimConfig",
    "SineMult",
    "SobolevSpace",
    "SpectralField",
    "Trajectory",
    "Truncated",
    "derive_seed",
    "refine",
    "sample_path",
    "simulate",
    "step",
    "strong_order",
]
