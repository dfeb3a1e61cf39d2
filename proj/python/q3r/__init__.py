"""Quadratic reweighted rank regularizer bindings.

The compiled extension carries the full surface; see `help(q3r._q3r)`.
"""

from ._q3r import (
    AdamQ3R,
    ConfigError,
    F_eps,
    NumericError,
    ReweightingOperator,
    SmoothingState,
    f_eps,
    grad_F_eps,
    rank_for_retention,
    run_matrix_recovery,
    singular_values,
    svd_truncated,
    tail_ratio,
    truncate_matrix,
    update_operator,
)

__all__ = [
    "AdamQ3R",
    "ConfigError",
    "F_eps",
    "NumericError",
    "ReweightingOperator",
    "SmoothingState",
    "f_eps",
    "grad_F_eps",
    "rank_for_retention",
    "run_matrix_recovery",
    "singular_values",
    "svd_truncated",
    "tail_ratio",
    "truncate_matrix",
    "update_operator",
]
