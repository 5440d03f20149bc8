"""Grouped regression data model.

A :class:`GroupedDesign` couples a design matrix with a partition of its
columns into feature groups; every algorithm in the package consumes it.
Instances are immutable (arrays are read-only views) and therefore safe to
share across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError

__all__ = [
    "GroupedDesign",
    "GroundTruth",
    "new_grouped_design",
    "singleton_design",
    "normalize_columns",
    "normalize_matrix_columns",
    "gram",
    "validate_response",
]


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.array(a, dtype=float)
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class GroupedDesign:
    """Design matrix whose columns are partitioned into disjoint groups.

    Attributes
    ----------
    X : (n, p) read-only float array
        Design matrix, one row per observation.
    groups : tuple of int arrays
        0-based column indices of each group, in first-appearance order of
        the labels used at construction.
    labels : tuple
        Original group labels, one per group, parallel to ``groups``.
    """

    X: np.ndarray
    groups: tuple[np.ndarray, ...]
    labels: tuple = field(default=())

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def m(self) -> int:
        return len(self.groups)

    @property
    def group_sizes(self) -> np.ndarray:
        return np.array([g.size for g in self.groups])

    @property
    def group_index(self) -> np.ndarray:
        """Length-p array mapping each column to its group position."""
        idx = np.empty(self.p, dtype=np.intp)
        for i, g in enumerate(self.groups):
            idx[g] = i
        return idx


@dataclass(frozen=True)
class GroundTruth:
    """Which groups carry signal in a synthetic instance.

    ``beta`` is the generating coefficient array: shape (p,) for single
    responses, (p, r) for multitask instances (rows correspond to features).
    Coefficients outside ``signal_groups`` are exactly zero.
    """

    signal_groups: np.ndarray
    beta: np.ndarray | None = None


def new_grouped_design(X, group_labels) -> GroupedDesign:
    """Build a validated :class:`GroupedDesign` from per-column group labels.

    Groups are formed in first-appearance order of the labels; they need not
    be contiguous blocks of columns.

    Raises
    ------
    DataValidationError
        If ``X`` is not a finite 2-d matrix or the label list does not assign
        exactly one label per column.
    """
    X = np.asarray(X, dtype=float)
    if X.ndim != 2 or X.shape[0] == 0 or X.shape[1] == 0:
        raise DataValidationError(f"design must be a nonempty 2-d matrix, got shape {X.shape}")
    if not np.all(np.isfinite(X)):
        bad = np.argwhere(~np.isfinite(X))[0]
        raise DataValidationError(
            f"design contains a non-finite entry at row {bad[0]}, column {bad[1]} (0-based)"
        )
    labels = list(group_labels)
    if len(labels) != X.shape[1]:
        raise DataValidationError(
            f"got {len(labels)} group labels for {X.shape[1]} columns"
        )
    order: dict = {}
    for j, lab in enumerate(labels):
        order.setdefault(lab, []).append(j)
    if not order:
        raise DataValidationError("empty group label set")
    groups = tuple(np.array(cols, dtype=np.intp) for cols in order.values())
    return GroupedDesign(X=_readonly(X), groups=groups, labels=tuple(order.keys()))


def singleton_design(design: GroupedDesign) -> GroupedDesign:
    """The same design with every column in its own group."""
    return new_grouped_design(design.X, range(design.p))


def normalize_matrix_columns(X: np.ndarray) -> np.ndarray:
    """Scale each column of ``X`` to unit Euclidean norm."""
    X = np.asarray(X, dtype=float)
    norms = np.linalg.norm(X, axis=0)
    zero = np.nonzero(norms == 0)[0]
    if zero.size:
        raise DataValidationError(
            f"column {zero[0]} (0-based) has zero norm and cannot be normalized"
        )
    return X / norms


def normalize_columns(design: GroupedDesign) -> GroupedDesign:
    """Return a copy of ``design`` with unit-norm columns; grouping unchanged."""
    X = normalize_matrix_columns(design.X)
    return GroupedDesign(X=_readonly(X), groups=design.groups, labels=design.labels)


def gram(design: GroupedDesign) -> np.ndarray:
    """The p x p Gram matrix of the design, symmetrized exactly."""
    M = design.X.T @ design.X
    return (M + M.T) / 2.0


def validate_response(y, n_obs: int) -> np.ndarray:
    """Validate a single-response vector against a design with ``n_obs`` rows."""
    y = np.asarray(y, dtype=float).reshape(-1)
    if y.shape[0] != n_obs:
        raise DataValidationError(
            f"response has length {y.shape[0]}, expected {n_obs}"
        )
    if not np.all(np.isfinite(y)):
        raise DataValidationError("response contains non-finite entries")
    return y
