"""Localization measures for densities and eigenfunctions.

``beta(u, Omega)``, the Wasserstein-2 distance from a normalized density to
the uniform density, is computed three ways: the 1D quantile integral, the
homogeneous H^{-1} norm of a Neumann-Poisson solve, and an exact network
simplex transport solver. Classical measures (rearrangements, participation
ratios, the concentration preorder) live in :mod:`locz.density`.
"""
from .density import (
    GaussFamilyParams, GridDensity1D, Interval, MaskedGrid2D, StepFamilyParams,
    decreasing_rearrangement, distribution_function, less_concentrated, lp_norm,
    make_gauss_family, make_step_family, mass_concentration_compare_vv,
    participation_ratio, spherical_rearrangement,
)
from .errors import (
    BudgetExceededError, CompatibilityError, ConsistencyError, ConvergenceError,
    LoczError, NumericalError, ParameterError, ResolutionError,
)
from .hm1 import h_minus1_norm, peyre_bounds, solve_neumann_poisson
from .ot import CostKernel, DiscreteMeasure, TransportPlan, atomize, solve_exact
from .transport1d import (
    extended_domain_beta, h_minus1_1d, lp_w2_1d, periodized_w2_1d, w2_quantile,
)

__version__ = "0.1.0"
