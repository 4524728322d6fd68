"""Toolkit for a one-dimensional energy-exchange jump process with exclusion.

Subpackages cover the domain model and simplex parameterization, samplers for
chaotic initial data, closed-form and tabulated equilibrium analysis, the
event-driven particle simulator, and a deterministic solver for the limiting
collision equation.
"""

from .density import DensityTable, empirical_histogram, w1_distance
from .equilibrium import (exclusion_factor, exp_density, f_alpha, g_from_w,
                          gap_statistics, h_from_g, phi, phi_inverse,
                          psi_from_g, w_from_g)
from .model import (Configuration, GapSample, ModelParams, SimplexPoint,
                    t_n_map, t_n_inverse, validate)
from .samplers import (DirichletSpec, RngStream, sample_detailed,
                       sample_dirichlet, sample_flat, weights_from_density)

__all__ = [
    "Configuration", "DensityTable", "DirichletSpec", "GapSample",
    "ModelParams", "RngStream", "SimplexPoint", "empirical_histogram",
    "exclusion_factor", "exp_density", "f_alpha", "g_from_w",
    "gap_statistics", "h_from_g", "phi", "phi_inverse", "psi_from_g",
    "sample_detailed", "sample_dirichlet", "sample_flat", "t_n_inverse",
    "t_n_map", "validate", "w1_distance", "w_from_g", "weights_from_density",
]

__version__ = "0.1.0"
