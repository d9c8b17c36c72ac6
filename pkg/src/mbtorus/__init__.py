"""Majda-Biello coupled KdV system on the torus.

Spectral discretisation, resonance classification of the coupling
parameter, time integration, the differentiation-by-parts normal form and
desk-scale numerical experiments.
"""
__version__ = "0.1.0"

from .spectral import (ConfigurationError, GridSpec, SpectralField, StructuralError, dealias_product,
                       derivative, embedding_constant, random_field, sobolev_norm, to_physical, to_spectral)
from .diophantine import (AlphaClassification, DomainError, classify_alpha, continued_fraction_expand,
                          near_resonance_scan, resonance_roots, resonant_modes, special_rational,
                          type_index_estimate)
from .dynamics import (BlowUpError, MBState, RunRecord, SimParams, conserved_quantities,
                       damped_energy_residual, evolve, linear_flow, step_ifrk4)
from .normal_form import (NormalFormOps, PartialNormalFormStepper, identity_residual, nonlinear_residual,
                          rho_correction_integral)
from .experiments import (SmoothingReport, StationaryPair, absorbing_set_experiment, growth_tracking,
                          smoothing_experiment, stationary_residual, stationary_solve,
                          trivial_attractor_experiment)
from .config import RunConfig, parse_config

__all__ = [name for name in dir() if not name.startswith("_")]
