"""Scattering theory for the 1-D Schrödinger operator ``H = -d^2/dx^2 + V(x)``.

Jost solutions from Volterra equations, scattering coefficients, the
generalized Fourier transform, the dispersive propagator, the nonlinear
Schrödinger flow with potential, and scattering-data recovery.
"""
from .jost import (Classification, ScatteringCoefficients, classify, jost_data,
                   scattering_coefficients, solve_m)
from .nls import NlsConfig, Trajectory, evolve_nls
from .numerics import MomentumGrid, SpatialGrid
from .potential import (PotentialSpec, build_potential, gaussian, load_potential,
                        poschl_teller, square_well, zero)
from .propagator import decay_scan, evolve_linear, free_kernel, kernel_continuous
from .scattering import (linear_S, nonlinear_S_V, recover_lambda, sl_matrix,
                         wave_operator)
from .spectral import SpectralData, build_spectral_data, find_bound_states

__version__ = "0.1.0"

__all__ = [
    "Classification", "MomentumGrid", "NlsConfig", "PotentialSpec", "ScatteringCoefficients",
    "SpatialGrid", "SpectralData", "Trajectory", "build_potential", "build_spectral_data",
    "classify", "decay_scan", "evolve_linear", "evolve_nls", "find_bound_states",
    "free_kernel", "gaussian", "jost_data", "kernel_continuous", "linear_S", "load_potential",
    "nonlinear_S_V", "poschl_teller", "recover_lambda", "scattering_coefficients",
    "sl_matrix", "solve_m", "square_well", "wave_operator", "zero",
]
