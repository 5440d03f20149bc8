"""Scikit-learn compatible selector estimators.

Both estimators are feature selectors: ``fit`` runs a knockoff filter and
``transform`` keeps the selected columns, so they drop into pipelines,
``clone``, and grid search like any other sklearn transformer.  Both
require n >= 2p rows for the knockoff construction.
"""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_is_fitted, validate_data

from .design import new_grouped_design, normalize_columns, normalize_matrix_columns
from .filtering import FilterConfig, run_group_knockoff_filter
from .multitask import run_multitask_knockoff

__all__ = ["GroupKnockoffFilter", "MultitaskKnockoffFilter"]


class GroupKnockoffFilter(SelectorMixin, BaseEstimator):
    """FDR-controlled group selection for a single-response linear model.

    Parameters
    ----------
    groups : array-like of length n_features or None
        Group label per column; None puts every feature in its own group.
    q : float
        Target false discovery rate for the selected groups.
    variant : {"knockoff", "knockoff+"}
        "knockoff+" uses the conservative FDP estimate (exact FDR control).
    normalize : bool
        Rescale columns to unit norm before constructing knockoffs; turn
        off only for pre-scaled data.
    grid_size, grid_min_ratio, kkt_tol, max_iter, active_tol, group_weights
        Path-solver controls; see :class:`~groupknockoff.FilterConfig`.
    random_state : int
        Seed for the knockoff construction.

    Attributes
    ----------
    selected_groups_ : int array of selected group positions (0-based).
    selected_group_labels_ : the matching entries of ``groups``.
    W_ : per-group statistic vector.
    threshold_ : chosen threshold, or None for an empty selection.
    gamma_ : equivariant scale used in the knockoff construction.
    support_ : boolean mask over features (True inside selected groups).
    result_ : the full :class:`~groupknockoff.FilterResult` for audit.
    """

    def __init__(self, groups=None, q=0.2, variant="knockoff", normalize=True,
                 grid_size=100, grid_min_ratio=1e-3, kkt_tol=1e-6,
                 max_iter=10000, active_tol=1e-8, group_weights="none",
                 random_state=0):
        self.groups = groups
        self.q = q
        self.variant = variant
        self.normalize = normalize
        self.grid_size = grid_size
        self.grid_min_ratio = grid_min_ratio
        self.kkt_tol = kkt_tol
        self.max_iter = max_iter
        self.active_tol = active_tol
        self.group_weights = group_weights
        self.random_state = random_state

    def _config(self) -> FilterConfig:
        return FilterConfig(
            q=self.q, variant=self.variant, grid_size=self.grid_size,
            grid_min_ratio=self.grid_min_ratio, kkt_tol=self.kkt_tol,
            max_iter=self.max_iter, active_tol=self.active_tol,
            group_weights=self.group_weights, seed=self.random_state,
        )

    def fit(self, X, y):
        X, y = validate_data(self, X, y, y_numeric=True, dtype=float)
        labels = range(X.shape[1]) if self.groups is None else self.groups
        design = new_grouped_design(X, labels)
        if self.normalize:
            design = normalize_columns(design)
        result = run_group_knockoff_filter(design, y, self._config())
        self.result_ = result
        self.W_ = result.W
        self.threshold_ = result.threshold
        self.gamma_ = result.gamma
        self.selected_groups_ = result.selected
        self.selected_group_labels_ = [design.labels[i] for i in result.selected]
        mask = np.zeros(X.shape[1], dtype=bool)
        for i in result.selected:
            mask[design.groups[i]] = True
        self.support_ = mask
        self.n_groups_ = design.m
        return self

    def _get_support_mask(self):
        check_is_fitted(self)
        return self.support_


class MultitaskKnockoffFilter(SelectorMixin, BaseEstimator):
    """FDR-controlled feature selection shared across several responses.

    ``fit(X, Y)`` accepts an (n, r) response matrix; a feature is selected
    when its coefficient group (tied across all r responses) survives the
    knockoff filter on the vectorized problem.  Attributes mirror
    :class:`GroupKnockoffFilter` with ``selected_features_`` in place of
    group indices.
    """

    def __init__(self, q=0.2, variant="knockoff", normalize=True,
                 grid_size=100, grid_min_ratio=1e-3, kkt_tol=1e-6,
                 max_iter=10000, active_tol=1e-8, group_weights="none",
                 random_state=0):
        self.q = q
        self.variant = variant
        self.normalize = normalize
        self.grid_size = grid_size
        self.grid_min_ratio = grid_min_ratio
        self.kkt_tol = kkt_tol
        self.max_iter = max_iter
        self.active_tol = active_tol
        self.group_weights = group_weights
        self.random_state = random_state

    def _config(self) -> FilterConfig:
        return FilterConfig(
            q=self.q, variant=self.variant, grid_size=self.grid_size,
            grid_min_ratio=self.grid_min_ratio, kkt_tol=self.kkt_tol,
            max_iter=self.max_iter, active_tol=self.active_tol,
            group_weights=self.group_weights, seed=self.random_state,
        )

    def fit(self, X, Y):
        X, Y = validate_data(self, X, Y, multi_output=True, y_numeric=True,
                             dtype=float)
        Y = np.asarray(Y, dtype=float)
        if Y.ndim == 1:
            Y = Y[:, None]
        if self.normalize:
            X = normalize_matrix_columns(X)
        result = run_multitask_knockoff(X, Y, self._config())
        self.result_ = result
        self.W_ = result.inner.W
        self.threshold_ = result.inner.threshold
        self.gamma_ = result.inner.gamma
        self.selected_features_ = result.selected_features
        mask = np.zeros(X.shape[1], dtype=bool)
        mask[result.selected_features] = True
        self.support_ = mask
        self.n_responses_ = Y.shape[1]
        return self

    def _get_support_mask(self):
        check_is_fitted(self)
        return self.support_
