"""Fourier-Galerkin verification lab for periodic elasticity homogenization.

The package assembles quasimomentum fiber operators of a periodic
fourth-order elasticity coefficient on a truncated Fourier lattice, solves
the classical and quasimomentum cell problems, builds the effective tensor
and its 3x3 fiber matrices, runs the two-cycle resolvent expansion with
its corrector operators, and measures norm-resolvent convergence rates in
the quasimomentum and in the period of the medium.
"""
__version__ = "0.1.0"

from .tensors import (ElasticTensor, CoefficientField, apply_tensor,
                      make_isotropic, make_laminate, make_smooth_laminate,
                      make_cube_inclusion, constant_field, check_coefficients,
                      field_from_json, read_field, write_field)
from .lattice import Lattice, TorusField, sym_grad, x_chi_apply
from .fiber import (FormEngine, get_engine, get_operator, fiber_spectrum,
                    fiber_resolvent, rayleigh_bounds)
from .cell import solve_cell, solve_chi_cell, homogenized_tensor, fiber_hom_matrix
from .korn import korn_constants, rank_one_sym_ratio
from .contour import build_contour, spectral_filter
from .expansion import expand_cycle1, expand_cycle2, corrector_ops, CorrectorOps
from .rates import (fiber_rate_study, r_corr1_eps, r_corr2_eps,
                    rescaled_correctors)
from .fullspace import (EpsilonStudyConfig, epsilon_rate_study,
                        smoothing_apply, two_scale_agreement)
