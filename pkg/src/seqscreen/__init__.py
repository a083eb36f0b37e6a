"""Feedback-controlled sequential safe screening for lasso problems."""

from ._kernels import COMPILED as kernel_compiled
from .dictionary import (Dictionary, LambdaMaxResult, gen_synthetic,
                         lambda_max, normalize_columns)
from .regions import (KeepMask, Region, build_initial_region,
                      build_step_region, dpp_region, prop1_diameter,
                      region_diameter, region_max, screen, strong_rule_screen)
from .sequence import (BoundParams, NoiseConfig, SequenceStrategy,
                       SequenceTrace, estimate_dual_bound, geometric_grid,
                       inject_noise, n_upper_bound, next_lambda_dass,
                       next_lambda_dpp_feedback, run_sequence)
from .solver import (LassoProblem, LassoSolution, SolverConfig, dual_point,
                     duality_gap, solve_lasso)
from .bench import (aggregate_rows, rejection_percentage, run_benchmark,
                    speedup, write_plot_series, write_report_csv)

__version__ = "0.1.0"

__all__ = [
    "Dictionary", "LambdaMaxResult", "gen_synthetic", "lambda_max",
    "normalize_columns",
    "KeepMask", "Region", "build_initial_region", "build_step_region",
    "dpp_region", "prop1_diameter", "region_diameter", "region_max",
    "screen", "strong_rule_screen",
    "BoundParams", "NoiseConfig", "SequenceStrategy", "SequenceTrace",
    "estimate_dual_bound", "geometric_grid", "inject_noise", "n_upper_bound",
    "next_lambda_dass", "next_lambda_dpp_feedback", "run_sequence",
    "LassoProblem", "LassoSolution", "SolverConfig", "dual_point",
    "duality_gap", "solve_lasso",
    "aggregate_rows", "rejection_percentage", "run_benchmark", "speedup",
    "write_plot_series", "write_report_csv",
    "kernel_compiled",
]
