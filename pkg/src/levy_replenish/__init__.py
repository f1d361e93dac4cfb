"""Optimal periodic barrier replenishment for Levy-driven inventories.

The library computes, for a spectrally negative Levy inventory process with
Poisson-paced replenishment opportunities, the optimal order-up-to barrier
and the associated discounted cost, all in closed scale-function form, and
cross-validates the formulas by event-driven Monte Carlo and residual checks
on the governing equations.
"""

__version__ = "0.1.0"

from .levy_model import (
    CostModel,
    JumpLaw,
    LevyModel,
    ProblemSpec,
    ValidationError,
    kappa_prime,
    laplace_exponent,
    phi,
    spec_from_json,
    spec_to_json,
    validate,
)
from .scale_kernel import KernelPair, ScaleBasis, build_basis, kernel_pair
from .valuation import (
    DEFAULT_QUAD,
    QuadratureConfig,
    QuadratureError,
    ValuationReport,
    big_f,
    big_f_dual,
    control_cost,
    m_func,
    report,
    resolvent_density,
    value,
    value_derivative,
)
from .barrier_solver import (
    SolveResult,
    SweepRow,
    bstar_quadratic_closed_form,
    classical_bstar,
    solve_bstar,
    sweep,
    sweep_flags,
)
from .policy_simulator import (
    SimConfig,
    SimEstimate,
    ValueEstimate,
    estimate_killed_resolvent,
    estimate_occupation_to_ruin,
    estimate_value,
    simulate_path,
    simulate_path_events,
    suggested_horizon,
    truncation_bound,
)
from .verifier import (
    AVAILABLE_CHECKS,
    CheckReport,
    check_generator,
    check_m_derivative,
    check_resolvent_identities,
    check_slope_and_convexity,
    run_all_checks,
)

__all__ = [name for name in dir() if not name.startswith("_")]
