"""Numerical homogenization with weakly* almost periodic coefficients.

Submodules
----------
ap_core
    Trigonometric polynomials, null functions, mean values, Fejer
    extraction of almost periodic parts.
fields
    Quasi-periodic coefficient ensembles on a torus.
operators
    Uniformly elliptic operators and their audits.
solver
    Monotone finite-difference Dirichlet solver.
corrector
    Damped correctors and the effective operator.
harness
    Configured experiments and convergence studies.
"""

from . import ap_core, corrector, fields, harness, kernels, operators, solver
from .ap_core import (
    MeanValueEstimate,
    NullFunction,
    TrigPolynomial,
    WStarAPFunction,
    besicovitch_seminorm,
    bochner_fejer_kernel,
    extract_ap_component,
    mean_value_exact,
    mean_value_numeric,
)
from .corrector import (
    EffectiveEstimate,
    EffectiveTable,
    effective_ellipticity_check,
    estimate_effective,
    omega_independence_check,
    shift_covariance_check,
    solve_delta_corrector,
)
from .errors import *  # noqa: F401,F403
from .fields import Phase, QuasiPeriodicEnsemble, birkhoff_compare, sample_phase, shift
from .harness import load_config, run_convergence_study, solve_homogenized
from .operators import EllipticOperator, ellipticity_audit, modulus_audit, pucci
from .solver import Grid, solve_dirichlet, sup_distance

__version__ = "0.1.0"
