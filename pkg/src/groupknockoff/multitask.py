"""Multitask regression as a group-lasso knockoff problem.

A multitask model Y = X B + E with row-sparse B vectorizes to
y = vec(Y), design I_r (x) X, and feature groups
G_j = {j, j+p, ..., j+(r-1)p} tying feature j's coefficient across the r
responses.  Knockoffs for the block design are the repeated blocks
I_r (x) X_tilde, where X_tilde is a singleton-group (per-feature) knockoff
matrix for X.

The block design is never materialized: the path solver sees it through a
Gram operator that applies the base 2p x 2p Gram block-wise.  Dense
materialization exists only for small-scale verification.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .construction import KnockoffAugmentation, construct_group_knockoffs
from .design import new_grouped_design
from .errors import DataValidationError
from .filtering import FilterConfig, FilterResult, apply_threshold
from .solver import (
    GroupLassoProblem,
    PathResult,
    entry_times,
    lambda_max,
    make_lambda_grid,
    power_iteration_lmax,
)
from .filtering import signed_max_statistics

__all__ = [
    "MultitaskFilterResult",
    "KroneckerGramOperator",
    "vectorize_response",
    "multitask_group_index",
    "block_design",
    "multitask_problem",
    "compute_multitask_w",
    "run_multitask_knockoff",
]


@dataclass(frozen=True)
class MultitaskFilterResult:
    """Feature-level discoveries plus the underlying group-filter run."""

    selected_features: np.ndarray
    inner: FilterResult


def vectorize_response(Y) -> np.ndarray:
    """Stack the columns of an n x r response matrix into a length-nr vector."""
    Y = np.asarray(Y, dtype=float)
    if Y.ndim != 2:
        raise DataValidationError(f"response matrix must be 2-d, got shape {Y.shape}")
    if not np.all(np.isfinite(Y)):
        raise DataValidationError("response matrix contains non-finite entries")
    return Y.ravel(order="F")


def multitask_group_index(p: int, r: int) -> np.ndarray:
    """Column->group labels tying feature j across r response blocks.

    Column j + l*p of the block design belongs to group j, so the label
    array is (0, 1, ..., p-1) repeated r times.
    """
    if p < 1 or r < 1:
        raise DataValidationError("p and r must be positive")
    return np.tile(np.arange(p, dtype=np.intp), r)


def block_design(M: np.ndarray, r: int) -> np.ndarray:
    """Dense I_r (x) M.  Small-scale verification only; pipelines stay implicit."""
    return np.kron(np.eye(r), np.asarray(M, dtype=float))


class KroneckerGramOperator:
    """Gram operator of [I_r (x) X,  I_r (x) X_tilde] applied block-wise.

    Holds the 2p x 2p base Gram of [X X_tilde]; a matvec reshapes the input
    into per-response columns, applies the base Gram once, and reshapes
    back.  The spectrum equals the base Gram's, so the Lipschitz constant is
    computed on the small matrix.
    """

    def __init__(self, base_gram: np.ndarray, r: int):
        self.base = np.asarray(base_gram, dtype=float)
        self.r = int(r)
        self.p2 = self.base.shape[0]

    @property
    def dim(self) -> int:
        return self.p2 * self.r

    def matvec(self, v: np.ndarray) -> np.ndarray:
        p = self.p2 // 2
        half = p * self.r
        V = np.vstack([
            v[:half].reshape(p, self.r, order="F"),
            v[half:].reshape(p, self.r, order="F"),
        ])
        out = self.base @ V
        return np.concatenate([
            out[:p].ravel(order="F"),
            out[p:].ravel(order="F"),
        ])

    def lipschitz(self) -> float:
        return power_iteration_lmax(lambda u: self.base @ u, self.p2)


def multitask_problem(X: np.ndarray, X_tilde: np.ndarray, Y: np.ndarray,
                      feature_groups: bool = True,
                      weights=None) -> GroupLassoProblem:
    """Group-lasso problem for ([I_r (x) X, I_r (x) X_tilde], vec(Y)).

    With ``feature_groups`` the 2p groups tie each feature (and its
    knockoff) across responses; without it every one of the 2pr columns is
    its own group (the pooled formulation).
    """
    X = np.asarray(X, dtype=float)
    X_tilde = np.asarray(X_tilde, dtype=float)
    Y = np.asarray(Y, dtype=float)
    n, p = X.shape
    if Y.shape[0] != n:
        raise DataValidationError(
            f"response matrix has {Y.shape[0]} rows, expected {n}"
        )
    r = Y.shape[1]
    base = np.hstack([X, X_tilde])
    G = base.T @ base
    G = (G + G.T) / 2.0
    cross = base.T @ Y  # (2p, r)
    c = np.concatenate([
        cross[:p].ravel(order="F"),
        cross[p:].ravel(order="F"),
    ])
    if feature_groups:
        gidx = np.concatenate([
            multitask_group_index(p, r),
            multitask_group_index(p, r) + p,
        ])
        n_groups = 2 * p
    else:
        gidx = np.arange(2 * p * r, dtype=np.intp)
        n_groups = 2 * p * r
    if weights is None:
        weights = np.ones(n_groups)
    return GroupLassoProblem(
        gram=KroneckerGramOperator(G, r),
        c=c,
        y_sqnorm=float(np.sum(Y * Y)),
        group_index=gidx,
        n_groups=n_groups,
        weights=np.asarray(weights, dtype=float),
    )


def compute_multitask_w(X, Y, config: FilterConfig = FilterConfig(),
                        feature_groups: bool = True,
                        ) -> tuple[np.ndarray, PathResult | None, KnockoffAugmentation]:
    """Per-feature knockoffs on X, then W on the vectorized block problem.

    With ``feature_groups`` the statistic has one entry per feature; without
    it, one entry per column of the block design (pooled formulation).
    Returns (W, path, augmentation); path is None when the response is
    orthogonal to every feature.
    """
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if Y.ndim == 1:
        Y = Y[:, None]
    vectorize_response(Y)  # validates shape and finiteness
    design = new_grouped_design(X, range(X.shape[1]))
    aug = construct_group_knockoffs(design, seed=config.seed)
    p, r = X.shape[1], Y.shape[1]
    weights = None
    if config.group_weights == "sqrt" and feature_groups:
        weights = np.sqrt(float(r)) * np.ones(2 * p)
    problem = multitask_problem(X, aug.X_tilde, Y, feature_groups=feature_groups,
                                weights=weights)
    lmax = lambda_max(problem)
    if lmax == 0.0:
        return np.zeros(problem.n_groups // 2), None, aug
    grid = make_lambda_grid(lmax, config.grid_size, config.grid_min_ratio)
    path = entry_times(problem, grid, active_tol=config.active_tol,
                       kkt_tol=config.kkt_tol, max_iter=config.max_iter)
    return signed_max_statistics(path), path, aug


def run_multitask_knockoff(X, Y, config: FilterConfig = FilterConfig()) -> MultitaskFilterResult:
    """Run the group knockoff filter on the vectorized multitask problem.

    Knockoffs are constructed per-feature on X (which must satisfy n >= 2p
    and should be column-normalized); a feature is discovered iff its
    cross-response coefficient group is selected.
    """
    W, path, aug = compute_multitask_w(X, Y, config, feature_groups=True)
    threshold, selected, fdp = apply_threshold(W, config.q, config.variant)
    inner = FilterResult(
        W=W, threshold=threshold, selected=selected, fdp_estimate=fdp,
        variant=config.variant, q=config.q, gamma=aug.gamma,
        path=path, augmentation=aug,
    )
    return MultitaskFilterResult(selected_features=selected, inner=inner)
