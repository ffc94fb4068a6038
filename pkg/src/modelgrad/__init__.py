"""Adaptive gradient-type methods driven by inexact model information.

The package implements three related solvers around a common oracle
contract (a first-order model with known slack levels): an adaptive
method for convex composite problems with an averaged output and an a
posteriori accuracy certificate, a restarted variant for objectives
whose subgradient jumps are bounded, and a gradient-descent variant for
gradient-dominated objectives with noise-aware step sizes.  Problem
families, an experiment harness, and a CLI sit on top.
"""

from .core import (
    AdaptiveTriple,
    CertificateUnavailableError,
    DimensionMismatchError,
    FeasibleSet,
    FunctionOracle,
    InconsistentTraceError,
    ModelOracle,
    NonTerminationError,
    ProxSetup,
    UnsupportedCombinationError,
    as_vector,
    bregman_divergence,
    check_oracle_conformance,
    project_ball,
    scale_triple,
)
from .convex import (
    ConvexConfig,
    ConvexTrace,
    acceptance_test,
    certificate_bound,
    convex_minimize,
    inner_call_budget,
    model_step,
)
from .nonsmooth import (
    STOP_DELTA_TERM,
    STOP_SMOOTH,
    NonsmoothConfig,
    RestartRecord,
    complexity_estimate,
    nonsmooth_minimize,
    p_bound,
    restart_inner,
)
from .pl import (
    TERM_COMPLETED,
    TERM_FLOOR,
    PLConfig,
    PLDichotomyReport,
    PLTrace,
    SmallGradientError,
    pl_dichotomy_check,
    pl_inexact_floor,
    pl_minimize,
    pl_rate_bound,
    pl_rate_bound_nonadaptive,
    pl_step_size,
)
from .problems import (
    BallIndicator,
    BallSumProblem,
    CompositeOracle,
    L1Penalty,
    MinMaxBallProblem,
    NoisyOracle,
    PLQuadratic,
    composite_oracle,
    generate_task1,
    generate_task2,
    load_centers,
    pl_quadratic_make,
    save_centers,
)
from .harness import (
    SOLVERS,
    TASKS,
    ConfigError,
    ExperimentSpec,
    ResultTable,
    compare_adaptive_nonadaptive,
    default_solver,
    finite_diff_check,
    parse_config,
    parse_grid,
    run_experiment,
    run_single,
    write_config,
    write_csv,
)
from .kernels import NUMBA_ENABLED

__version__ = "0.1.0"

__all__ = [
    "AdaptiveTriple",
    "CertificateUnavailableError",
    "DimensionMismatchError",
    "FeasibleSet",
    "FunctionOracle",
    "InconsistentTraceError",
    "ModelOracle",
    "NonTerminationError",
    "ProxSetup",
    "UnsupportedCombinationError",
    "as_vector",
    "bregman_divergence",
    "check_oracle_conformance",
    "project_ball",
    "scale_triple",
    "ConvexConfig",
    "ConvexTrace",
    "acceptance_test",
    "certificate_bound",
    "convex_minimize",
    "inner_call_budget",
    "model_step",
    "STOP_DELTA_TERM",
    "STOP_SMOOTH",
    "NonsmoothConfig",
    "RestartRecord",
    "complexity_estimate",
    "nonsmooth_minimize",
    "p_bound",
    "restart_inner",
    "TERM_COMPLETED",
    "TERM_FLOOR",
    "PLConfig",
    "PLDichotomyReport",
    "PLTrace",
    "SmallGradientError",
    "pl_dichotomy_check",
    "pl_inexact_floor",
    "pl_minimize",
    "pl_rate_bound",
    "pl_rate_bound_nonadaptive",
    "pl_step_size",
    "BallIndicator",
    "BallSumProblem",
    "CompositeOracle",
    "L1Penalty",
    "MinMaxBallProblem",
    "NoisyOracle",
    "PLQuadratic",
    "composite_oracle",
    "generate_task1",
    "generate_task2",
    "load_centers",
    "pl_quadratic_make",
    "save_centers",
    "SOLVERS",
    "TASKS",
    "ConfigError",
    "ExperimentSpec",
    "ResultTable",
    "compare_adaptive_nonadaptive",
    "default_solver",
    "finite_diff_check",
    "parse_config",
    "parse_grid",
    "run_experiment",
    "run_single",
    "write_config",
    "write_csv",
    "NUMBA_ENABLED",
    "__version__",
]
