"""Security- and chance-constrained unit commitment under Gaussian wind.

The package builds the full mixed-integer commitment model with N-1
contingencies and Gaussian wind chance constraints, solves it exactly with
three cutting-plane algorithms (outer approximation, scenario-based
decomposition, Benders feasibility decomposition), and validates solutions by
Monte Carlo simulation of the affine recourse policy.
"""

__version__ = "0.1.0"

from .algorithms import (
    SOLVERS,
    AlgorithmReport,
    lf_audit,
    solve_benders,
    solve_oa,
    solve_sbd,
)
from .netmodel import (
    Bus,
    Contingency,
    FlowMap,
    GeneratorSpec,
    Line,
    RiskLevels,
    SccucCase,
    build_admittance,
    build_flowmap,
    load_case,
    save_case,
    scale_case,
)
from .solverio import SolverConfig
from .stochastic import WindModel, gaussian_quantile, total_deviation_stdev
from .ucmodel import BuildOptions, Solution, evaluate_cost, validate_schedule
from .validate import sample_wind, solve_deterministic, violation_report

__all__ = [
    "AlgorithmReport",
    "BuildOptions",
    "Bus",
    "Contingency",
    "FlowMap",
    "GeneratorSpec",
    "Line",
    "RiskLevels",
    "SOLVERS",
    "SccucCase",
    "Solution",
    "SolverConfig",
    "WindModel",
    "build_admittance",
    "build_flowmap",
    "evaluate_cost",
    "gaussian_quantile",
    "lf_audit",
    "load_case",
    "sample_wind",
    "save_case",
    "scale_case",
    "solve_benders",
    "solve_deterministic",
    "solve_oa",
    "solve_sbd",
    "total_deviation_stdev",
    "validate_schedule",
    "violation_report",
    "__version__",
]
