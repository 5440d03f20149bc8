"""Knockoff filter step: statistics, FDP estimates, threshold, selection.

The statistic for group i is the signed maximum of the pair of path entry
times (lambda_i, lambda_tilde_i):

    W_i = max(lambda_i, lambda_tilde_i) * sign(lambda_i - lambda_tilde_i),

zero exactly on ties.  Thresholding W at the smallest realized |W| whose
estimated false discovery proportion is below the target q gives the
selected group set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construction import KnockoffAugmentation, construct_group_knockoffs
from .design import GroupedDesign, validate_response
from .errors import DataValidationError
from .solver import (
    DEFAULT_ACTIVE_TOL,
    DEFAULT_GRID_SIZE,
    DEFAULT_KKT_TOL,
    DEFAULT_MAX_ITER,
    DEFAULT_MIN_RATIO,
    GroupLassoProblem,
    LambdaGrid,
    PathResult,
    entry_times,
    lambda_max,
    make_lambda_grid,
)

__all__ = [
    "FilterConfig",
    "FilterResult",
    "signed_max_statistics",
    "selection_sets",
    "fdp_estimate",
    "knockoff_threshold",
    "apply_threshold",
    "compute_w_statistics",
    "run_group_knockoff_filter",
    "check_sufficiency",
    "check_group_antisymmetry",
    "augment_design",
    "augmented_group_index",
    "augmented_weights",
    "swap_group_columns",
]

VARIANTS = ("knockoff", "knockoff+")


@dataclass(frozen=True)
class FilterConfig:
    """Tuning knobs shared by the filter pipelines and the CLI.

    ``seed`` feeds the knockoff construction and accepts anything
    ``numpy.random.default_rng`` does (int, sequence of ints, SeedSequence).
    """

    q: float = 0.2
    variant: str = "knockoff"
    grid_size: int = DEFAULT_GRID_SIZE
    grid_min_ratio: float = DEFAULT_MIN_RATIO
    kkt_tol: float = DEFAULT_KKT_TOL
    max_iter: int = DEFAULT_MAX_ITER
    active_tol: float = DEFAULT_ACTIVE_TOL
    group_weights: str = "none"
    seed: object = 0

    def __post_init__(self):
        if not 0.0 < self.q < 1.0:
            raise DataValidationError(f"q must lie in (0, 1), got {self.q}")
        if self.variant not in VARIANTS:
            raise DataValidationError(f"variant must be one of {VARIANTS}")
        if self.group_weights not in ("none", "sqrt"):
            raise DataValidationError("group_weights must be 'none' or 'sqrt'")


@dataclass(frozen=True)
class FilterResult:
    """Outcome of one filter run, with the intermediate artifacts for audit."""

    W: np.ndarray
    threshold: float | None
    selected: np.ndarray
    fdp_estimate: float | None
    variant: str
    q: float
    gamma: float
    path: PathResult | None
    augmentation: KnockoffAugmentation | None


def signed_max_statistics(path: PathResult) -> np.ndarray:
    """Signed-max entry-time statistic per group; exactly zero on ties."""
    lo = path.entry_original
    lk = path.entry_knockoff
    return np.maximum(lo, lk) * np.sign(lo - lk)


def selection_sets(W: np.ndarray, t: float) -> tuple[np.ndarray, np.ndarray]:
    """(indices with W >= t, indices with W <= -t); requires t > 0.

    t = 0 would place tied groups (W exactly zero) in both sets.
    """
    if t <= 0.0:
        raise DataValidationError("selection threshold must be positive")
    W = np.asarray(W, dtype=float)
    return np.nonzero(W >= t)[0], np.nonzero(W <= -t)[0]


def fdp_estimate(W: np.ndarray, t: float, variant: str = "knockoff") -> float:
    """Estimated false discovery proportion of the selection at threshold t.

    knockoff: |{W <= -t}| / max(|{W >= t}|, 1);
    knockoff+ adds 1 to the numerator (the conservative estimate).
    """
    if variant not in VARIANTS:
        raise DataValidationError(f"variant must be one of {VARIANTS}")
    selected, controls = selection_sets(W, t)
    numer = controls.size + (1 if variant == "knockoff+" else 0)
    return numer / max(selected.size, 1)


def knockoff_threshold(W: np.ndarray, q: float, variant: str = "knockoff") -> float | None:
    """Smallest realized |W| whose FDP estimate is at most q, or None.

    Candidate thresholds are the distinct nonzero |W_i| values; None means
    no threshold qualifies and the selection is empty.
    """
    if not 0.0 < q < 1.0:
        raise DataValidationError(f"q must lie in (0, 1), got {q}")
    W = np.asarray(W, dtype=float)
    candidates = np.unique(np.abs(W[W != 0.0]))
    for t in candidates:
        if fdp_estimate(W, float(t), variant) <= q:
            return float(t)
    return None


def apply_threshold(W: np.ndarray, q: float,
                    variant: str = "knockoff") -> tuple[float | None, np.ndarray, float | None]:
    """(threshold, selected indices, FDP estimate) for a statistic vector."""
    threshold = knockoff_threshold(W, q, variant)
    if threshold is None:
        return None, np.array([], dtype=np.intp), None
    selected = selection_sets(W, threshold)[0]
    return threshold, selected, fdp_estimate(W, threshold, variant)


def augment_design(design: GroupedDesign, X_tilde: np.ndarray) -> np.ndarray:
    """The n x 2p matrix [X X_tilde]."""
    return np.hstack([design.X, np.asarray(X_tilde, dtype=float)])


def augmented_group_index(design: GroupedDesign) -> np.ndarray:
    """Column->group labels for [X X_tilde]: original groups then knockoffs."""
    base = design.group_index
    return np.concatenate([base, base + design.m])


def augmented_weights(design: GroupedDesign, scheme: str) -> np.ndarray:
    """Penalty weights for the 2m augmented groups ('none' or 'sqrt')."""
    if scheme == "none":
        return np.ones(2 * design.m)
    if scheme == "sqrt":
        sizes = design.group_sizes.astype(float)
        return np.sqrt(np.concatenate([sizes, sizes]))
    raise DataValidationError("group_weights must be 'none' or 'sqrt'")


def _augmented_problem(design: GroupedDesign, X_tilde: np.ndarray, y: np.ndarray,
                       config: FilterConfig) -> GroupLassoProblem:
    return GroupLassoProblem.from_design(
        augment_design(design, X_tilde), y, augmented_group_index(design),
        2 * design.m, weights=augmented_weights(design, config.group_weights),
    )


def _w_from_problem(problem: GroupLassoProblem, grid: LambdaGrid,
                    config: FilterConfig) -> tuple[np.ndarray, PathResult]:
    path = entry_times(
        problem, grid, active_tol=config.active_tol,
        kkt_tol=config.kkt_tol, max_iter=config.max_iter,
    )
    return signed_max_statistics(path), path


def compute_w_statistics(design: GroupedDesign, y,
                         config: FilterConfig = FilterConfig(),
                         ) -> tuple[np.ndarray, PathResult | None, KnockoffAugmentation]:
    """Knockoff construction plus path tracing, stopping short of selection.

    Returns (W, path, augmentation); the path is None in the degenerate case
    where the response is orthogonal to every feature (W is then all zero).
    """
    y = validate_response(y, design.n)
    aug = construct_group_knockoffs(design, seed=config.seed)
    problem = _augmented_problem(design, aug.X_tilde, y, config)
    lmax = lambda_max(problem)
    if lmax == 0.0:
        return np.zeros(design.m), None, aug
    grid = make_lambda_grid(lmax, config.grid_size, config.grid_min_ratio)
    W, path = _w_from_problem(problem, grid, config)
    return W, path, aug


def run_group_knockoff_filter(design: GroupedDesign, y,
                              config: FilterConfig = FilterConfig()) -> FilterResult:
    """Construct knockoffs, trace the group-lasso path, threshold W.

    The design is used as given (normalize beforehand for unscaled data) and
    must satisfy n >= 2p.
    """
    W, path, aug = compute_w_statistics(design, y, config)
    threshold, selected, fdp = apply_threshold(W, config.q, config.variant)
    return FilterResult(
        W=W, threshold=threshold, selected=selected, fdp_estimate=fdp,
        variant=config.variant, q=config.q, gamma=aug.gamma,
        path=path, augmentation=aug,
    )


def check_sufficiency(design: GroupedDesign, aug: KnockoffAugmentation, y,
                      Q: np.ndarray, config: FilterConfig = FilterConfig(),
                      tol: float = 1e-6) -> bool:
    """True iff W is unchanged when the rows of ([X X_tilde], y) are mapped by Q.

    For orthogonal Q the statistic must not change: it depends on the data
    only through the Gram matrix and feature-response inner products, which
    rotations preserve.  A non-orthogonal Q generally perturbs them.  Both
    runs share the grid computed from the unrotated data.
    """
    y = validate_response(y, design.n)
    A = augment_design(design, aug.X_tilde)
    gidx = augmented_group_index(design)
    weights = augmented_weights(design, config.group_weights)
    problem = GroupLassoProblem.from_design(A, y, gidx, 2 * design.m, weights=weights)
    lmax = lambda_max(problem)
    if lmax == 0.0:
        return True
    grid = make_lambda_grid(lmax, config.grid_size, config.grid_min_ratio)
    W0, _ = _w_from_problem(problem, grid, config)
    Q = np.asarray(Q, dtype=float)
    rotated = GroupLassoProblem.from_design(Q @ A, Q @ y, gidx, 2 * design.m,
                                            weights=weights)
    W1, _ = _w_from_problem(rotated, grid, config)
    return bool(np.max(np.abs(W1 - W0)) < tol)


def swap_group_columns(design: GroupedDesign, X_tilde: np.ndarray, i: int) -> np.ndarray:
    """[X X_tilde] with the columns of group i exchanged between the halves."""
    A = augment_design(design, X_tilde)
    g = design.groups[i]
    A[:, g], A[:, g + design.p] = A[:, g + design.p], A[:, g]
    return A


def check_group_antisymmetry(design: GroupedDesign, aug: KnockoffAugmentation, y,
                             i: int, config: FilterConfig = FilterConfig(),
                             tol: float = 1e-10) -> bool:
    """True iff swapping group i with its knockoff flips W_i and nothing else."""
    if not 0 <= i < design.m:
        raise DataValidationError(f"group index {i} out of range for m={design.m}")
    y = validate_response(y, design.n)
    A = augment_design(design, aug.X_tilde)
    gidx = augmented_group_index(design)
    weights = augmented_weights(design, config.group_weights)
    problem = GroupLassoProblem.from_design(A, y, gidx, 2 * design.m, weights=weights)
    lmax = lambda_max(problem)
    if lmax == 0.0:
        return True
    grid = make_lambda_grid(lmax, config.grid_size, config.grid_min_ratio)
    W0, _ = _w_from_problem(problem, grid, config)
    swapped = GroupLassoProblem.from_design(
        swap_group_columns(design, aug.X_tilde, i), y, gidx, 2 * design.m,
        weights=weights,
    )
    W1, _ = _w_from_problem(swapped, grid, config)
    expected = W0.copy()
    expected[i] = -W0[i]
    return bool(np.max(np.abs(W1 - expected)) <= tol)
