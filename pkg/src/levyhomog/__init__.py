"""Homogenization of nonlocal Bellman equations with alpha-stable jumps and multiscale forcing."""

from .effective_operator import (EffectiveOperatorTable, OutOfTableRange, check_continuity,
                                 check_subellipticity, tabulate)
from .ergodic_cell import (CellProblemSpec, ErgodicResult, control_value_oracle, ergodic_constant,
                           holder_diagnostic, verify_weak_solution)
from .forcing import (GOLDEN, MultiscaleForcing, TrigTerm, build_trig_truncation, check_nonresonance,
                      constant_forcing, geometric_series, orbit_density, term)
from .grid import ExteriorData, GridFunction, Torus, exterior_grid, torus_grid
from .hjb_solver import (CoefficientField, ControlField, DiscountedProblem, EpsProblemSpec,
                         LiftedProblem, SolverNotConverged, UnresolvedOscillationError,
                         check_comparison, sample_along_line, solve_discounted,
                         solve_discounted_lifted, solve_effective, solve_eps_problem,
                         strong_max_principle_check)
from .levy_kernel import (InsufficientCollarError, LevyKernel, LiftedDirection, analytic_symbol,
                          apply_levy, apply_levy_lifted, build_kernel)

__version__ = "0.1.0"

__all__ = [
    "CellProblemSpec",
    "CoefficientField",
    "ControlField",
    "DiscountedProblem",
    "EffectiveOperatorTable",
    "EpsProblemSpec",
    "ErgodicResult",
    "ExteriorData",
    "GOLDEN",
    "GridFunction",
    "InsufficientCollarError",
    "LevyKernel",
    "LiftedDirection",
    "LiftedProblem",
    "MultiscaleForcing",
    "OutOfTableRange",
    "SolverNotConverged",
    "Torus",
    "TrigTerm",
    "UnresolvedOscillationError",
    "analytic_symbol",
    "apply_levy",
    "apply_levy_lifted",
    "build_kernel",
    "build_trig_truncation",
    "check_comparison",
    "check_continuity",
    "check_nonresonance",
    "check_subellipticity",
    "constant_forcing",
    "control_value_oracle",
    "ergodic_constant",
    "exterior_grid",
    "geometric_series",
    "holder_diagnostic",
    "orbit_density",
    "sample_along_line",
    "solve_discounted",
    "solve_discounted_lifted",
    "solve_effective",
    "solve_eps_problem",
    "strong_max_principle_check",
    "tabulate",
    "term",
    "torus_grid",
    "verify_weak_solution",
]
