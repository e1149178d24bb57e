"""Exterior k-plane transform of differential forms on R^n: forward transform,
dual transform, inversion by a matrix Fourier multiplier, and recovery of
currents from their projections onto k-planes."""

__version__ = "0.1.0"

from .exterior import (
    DomainError,
    MOperator,
    MVector,
    basis_indices,
    hyperplane_projections,
    induced_map,
    restrict_to_plane,
    sphere_volume,
    symbol_constant,
    symbol_h,
    wedge,
)
from .grassmann import Plane, PlaneSet, UnsupportedQuadrature, complement_frame, distance, fixed_quadrature, project_point, sample_haar
from .forms import AnalyticForm, FormField, GridSpec, eval_analytic, gaussian_form, hdot_norm, interpolate, l2_norm, sample_to_grid
from .transform import QuadratureSpec, Sinogram, adjoint, forward, forward_point, x_norm
from .multiplier import MultiplierSpec, apply_Q, decay_check, multiplier_matrix
from .currents import DiracCurrent, PlaneCurrent, SimplexCurrent, pair, pullback_form_eval, pushforward, simplex_to_dirac
from .pipeline import ConfigError, ExperimentConfig, decompose, holder_check, invert, pair_via_projections, boundedness_check
