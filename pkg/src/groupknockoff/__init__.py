"""FDR-controlled group and multitask feature selection via knockoffs.

Typical entry points: :class:`GroupKnockoffFilter` /
:class:`MultitaskKnockoffFilter` for the sklearn-style API,
:func:`run_group_knockoff_filter` / :func:`run_multitask_knockoff` for the
functional pipeline, and the ``groupknockoff`` command line tool.
"""

from .construction import (
    KnockoffAugmentation,
    block_inverse_sqrt,
    build_s_matrix,
    construct_group_knockoffs,
    equivariant_gamma,
    orthonormal_complement,
    psd_factor,
    verify_knockoff_conditions,
)
from .design import (
    GroundTruth,
    GroupedDesign,
    gram,
    new_grouped_design,
    normalize_columns,
    singleton_design,
    validate_response,
)
from .errors import DataValidationError, NumericalError
from .estimators import GroupKnockoffFilter, MultitaskKnockoffFilter
from .filtering import (
    FilterConfig,
    FilterResult,
    check_group_antisymmetry,
    check_sufficiency,
    fdp_estimate,
    knockoff_threshold,
    run_group_knockoff_filter,
    selection_sets,
    signed_max_statistics,
)
from .multitask import (
    MultitaskFilterResult,
    block_design,
    multitask_group_index,
    run_multitask_knockoff,
    vectorize_response,
)
from .simulation import (
    GroupSparseSimConfig,
    MultitaskSimConfig,
    SimulationReport,
    evaluate_selection,
    gen_group_sparse_instance,
    gen_multitask_instance,
    run_experiment,
)
from .solver import (
    GroupLassoProblem,
    LambdaGrid,
    PathResult,
    entry_times,
    kkt_residual,
    lambda_max,
    make_lambda_grid,
    solve_group_lasso,
)

__version__ = "0.1.0"

__all__ = [
    "DataValidationError",
    "NumericalError",
    "GroupedDesign",
    "GroundTruth",
    "new_grouped_design",
    "singleton_design",
    "normalize_columns",
    "gram",
    "validate_response",
    "KnockoffAugmentation",
    "construct_group_knockoffs",
    "verify_knockoff_conditions",
    "block_inverse_sqrt",
    "equivariant_gamma",
    "build_s_matrix",
    "orthonormal_complement",
    "psd_factor",
    "GroupLassoProblem",
    "LambdaGrid",
    "PathResult",
    "make_lambda_grid",
    "lambda_max",
    "solve_group_lasso",
    "kkt_residual",
    "entry_times",
    "FilterConfig",
    "FilterResult",
    "signed_max_statistics",
    "selection_sets",
    "fdp_estimate",
    "knockoff_threshold",
    "run_group_knockoff_filter",
    "check_sufficiency",
    "check_group_antisymmetry",
    "MultitaskFilterResult",
    "vectorize_response",
    "multitask_group_index",
    "block_design",
    "run_multitask_knockoff",
    "GroupSparseSimConfig",
    "MultitaskSimConfig",
    "SimulationReport",
    "gen_group_sparse_instance",
    "gen_multitask_instance",
    "evaluate_selection",
    "run_experiment",
    "GroupKnockoffFilter",
    "MultitaskKnockoffFilter",
]
