"""Estimating the dissipation rate of a controlled, damped bosonic mode.

Submodules:

* :mod:`dampqfi.fock` -- truncated Fock-space primitives and state types
* :mod:`dampqfi.dynamics` -- closed-form and ODE evolution of the damped mode
* :mod:`dampqfi.metrology` -- Fisher information, Cramer-Rao bound, fidelity
* :mod:`dampqfi.moo` -- peak-information / deformation trade-off
* :mod:`dampqfi.sme` -- homodyne trajectories and a Bayesian filter bank
* :mod:`dampqfi.cli` -- figure-data command-line tool
"""
from .dynamics import evolve_analytic, evolve_ode, pure_state_approx, rho_element_analytic
from .errors import ConfigError, DampQfiError, NumericalError, PreconditionError
from .fock import DensityMatrix, StateVector, SystemConfig, coherent_density, coherent_state
from .metrology import (
    cramer_rao_bound,
    deformation,
    fidelity_approx,
    fidelity_uhlmann,
    qfi_approx_closed,
    qfi_exact,
    qfi_exact_state,
    qfi_pure,
)
from .moo import (
    GridSpec,
    ParetoPoint,
    epsilon_constrained_optimize,
    pareto_front,
    qfi_star,
    solve_tau_star,
)
from .sme import (
    CandidateSet,
    estimate_gamma,
    generate_candidates,
    simulate_trajectory,
    update_posteriors,
)

__version__ = "0.1.0"
