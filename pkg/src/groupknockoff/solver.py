"""Group lasso path solver.

Minimizes

    0.5 * ||y - A b||_2^2 + lam * sum_g w_g ||b_g||_2

over a decreasing log-spaced grid of lam values with warm starts, via
accelerated proximal gradient (fixed step 1/L, L = largest eigenvalue of
A'A from power iteration, group soft-thresholding prox, adaptive restart).

The solver only ever touches the data through the Gram matrix G = A'A and
the inner products c = A'y, held in a :class:`GroupLassoProblem`.  This is
what makes the downstream selection statistic a function of (G, c) alone,
and it lets structured designs (repeated response blocks) supply G as an
implicit operator instead of a dense matrix.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import DataValidationError

__all__ = [
    "LambdaGrid",
    "PathResult",
    "SolveStats",
    "GroupLassoProblem",
    "DenseGramOperator",
    "make_lambda_grid",
    "lambda_max",
    "solve_group_lasso",
    "kkt_residual",
    "objective_value",
    "entry_times",
    "group_norms",
    "power_iteration_lmax",
]

DEFAULT_GRID_SIZE = 100
DEFAULT_MIN_RATIO = 1e-3
DEFAULT_KKT_TOL = 1e-6
DEFAULT_MAX_ITER = 10000
DEFAULT_ACTIVE_TOL = 1e-8


def group_norms(v: np.ndarray, group_index: np.ndarray, n_groups: int) -> np.ndarray:
    """Per-group Euclidean norms of ``v`` under a column->group label array."""
    return np.sqrt(np.bincount(group_index, weights=v * v, minlength=n_groups))


def power_iteration_lmax(matvec, dim: int, rel_tol: float = 1e-6,
                         max_iter: int = 1000) -> float:
    """Largest eigenvalue of a symmetric PSD operator by power iteration."""
    rng = np.random.default_rng(0)
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam = 0.0
    for _ in range(max_iter):
        w = matvec(v)
        nw = np.linalg.norm(w)
        if nw == 0.0:
            return 0.0
        lam_new = float(v @ w)
        v = w / nw
        if abs(lam_new - lam) <= rel_tol * max(abs(lam_new), 1e-30):
            return lam_new
        lam = lam_new
    return lam


class DenseGramOperator:
    """Gram matrix of a dense design, wrapped in the operator protocol."""

    def __init__(self, G: np.ndarray):
        self.G = np.asarray(G, dtype=float)

    @classmethod
    def from_design(cls, A: np.ndarray) -> "DenseGramOperator":
        G = A.T @ A
        return cls((G + G.T) / 2.0)

    @property
    def dim(self) -> int:
        return self.G.shape[0]

    def matvec(self, v: np.ndarray) -> np.ndarray:
        return self.G @ v

    def lipschitz(self) -> float:
        return power_iteration_lmax(self.matvec, self.dim)


@dataclass(frozen=True)
class GroupLassoProblem:
    """A group-lasso instance in Gram form.

    ``gram`` implements ``matvec``/``lipschitz``/``dim`` for G = A'A,
    ``c`` is A'y, and ``y_sqnorm`` is ||y||^2 (only used for objective
    values).  ``group_index`` labels every column with its group position in
    0..n_groups-1 and ``weights`` holds one penalty weight per group.
    """

    gram: object
    c: np.ndarray
    y_sqnorm: float
    group_index: np.ndarray
    n_groups: int
    weights: np.ndarray

    @classmethod
    def from_design(cls, A: np.ndarray, y: np.ndarray, group_index,
                    n_groups: int, weights=None) -> "GroupLassoProblem":
        A = np.asarray(A, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if A.shape[0] != y.shape[0]:
            raise DataValidationError(
                f"design has {A.shape[0]} rows but response has length {y.shape[0]}"
            )
        group_index = np.asarray(group_index, dtype=np.intp)
        if group_index.shape[0] != A.shape[1]:
            raise DataValidationError("group index length must match column count")
        if weights is None:
            weights = np.ones(n_groups)
        return cls(
            gram=DenseGramOperator.from_design(A),
            c=A.T @ y,
            y_sqnorm=float(y @ y),
            group_index=group_index,
            n_groups=n_groups,
            weights=np.asarray(weights, dtype=float),
        )


@dataclass(frozen=True)
class LambdaGrid:
    """Strictly decreasing log-spaced penalty grid."""

    values: np.ndarray
    lambda_max: float
    min_ratio: float


@dataclass(frozen=True)
class SolveStats:
    iterations: int
    kkt_residual: float
    converged: bool
    objective: float


@dataclass(frozen=True)
class PathResult:
    """Group entry times along a penalty grid.

    ``entry_original[i]`` (resp. ``entry_knockoff[i]``) is the largest grid
    value at which group i of the first (resp. second) half of the groups
    has an active coefficient block, or 0.0 if it never activates.

    Per-point solver stats cover the first ``n_solved`` grid values: the
    path stops early once every group has entered, because later (smaller)
    penalties cannot change any entry time.
    """

    entry_original: np.ndarray
    entry_knockoff: np.ndarray
    grid: LambdaGrid
    iterations: np.ndarray
    kkt_residuals: np.ndarray
    converged: np.ndarray = field(repr=False)

    @property
    def n_solved(self) -> int:
        return self.iterations.shape[0]


def make_lambda_grid(lambda_max: float, size: int = DEFAULT_GRID_SIZE,
                     min_ratio: float = DEFAULT_MIN_RATIO) -> LambdaGrid:
    """K log-spaced values from lambda_max down to lambda_max * min_ratio."""
    if lambda_max <= 0.0:
        raise DataValidationError(
            "lambda_max must be positive (response is orthogonal to every feature)"
        )
    if size < 2:
        raise DataValidationError("grid size must be at least 2")
    if not 0.0 < min_ratio < 1.0:
        raise DataValidationError("grid min_ratio must lie in (0, 1)")
    values = np.geomspace(lambda_max, lambda_max * min_ratio, size)
    return LambdaGrid(values=values, lambda_max=float(lambda_max), min_ratio=float(min_ratio))


def lambda_max(problem: GroupLassoProblem) -> float:
    """Smallest penalty at which the all-zero solution is optimal.

    Equals max_g ||A_g'y||_2 / w_g: the zero vector satisfies the optimality
    conditions exactly for every lam at or above this value.
    """
    norms = group_norms(problem.c, problem.group_index, problem.n_groups)
    return float(np.max(norms / problem.weights))


def _prox(v: np.ndarray, thresh: np.ndarray, group_index: np.ndarray,
          n_groups: int) -> np.ndarray:
    """Group soft-thresholding: shrink each group block toward zero."""
    norms = group_norms(v, group_index, n_groups)
    with np.errstate(divide="ignore", invalid="ignore"):
        scale = np.where(norms > 0.0, np.maximum(0.0, 1.0 - thresh / norms), 0.0)
    return v * scale[group_index]


def kkt_residual(problem: GroupLassoProblem, lam: float, b: np.ndarray,
                 gradient: np.ndarray | None = None) -> float:
    """Scaled optimality-condition violation at ``b``.

    With g = A'(y - Ab): active groups contribute
    ||g_g - lam * w_g * b_g / ||b_g||||, inactive groups contribute
    max(0, ||g_g|| - lam * w_g); the max over groups is scaled by
    1 / max(1, ||A'y||_inf).
    """
    gidx, ng = problem.group_index, problem.n_groups
    if gradient is None:
        gradient = problem.c - problem.gram.matvec(b)
    nb = group_norms(b, gidx, ng)
    active = nb > 0.0
    with np.errstate(divide="ignore", invalid="ignore"):
        coef = np.where(active, lam * problem.weights / np.where(active, nb, 1.0), 0.0)
    d = gradient - b * coef[gidx]
    nd = group_norms(d, gidx, ng)
    ngrad = group_norms(gradient, gidx, ng)
    per_group = np.where(active, nd, np.maximum(0.0, ngrad - lam * problem.weights))
    scale = max(1.0, float(np.max(np.abs(problem.c))) if problem.c.size else 1.0)
    return float(np.max(per_group)) / scale


def objective_value(problem: GroupLassoProblem, lam: float, b: np.ndarray,
                    Gb: np.ndarray | None = None) -> float:
    """0.5*||y - Ab||^2 + lam * sum_g w_g ||b_g||, computed in Gram form."""
    if Gb is None:
        Gb = problem.gram.matvec(b)
    penalty = float(problem.weights @ group_norms(b, problem.group_index, problem.n_groups))
    return 0.5 * float(b @ Gb) - float(problem.c @ b) + 0.5 * problem.y_sqnorm + lam * penalty


def solve_group_lasso(problem: GroupLassoProblem, lam: float,
                      init: np.ndarray | None = None,
                      kkt_tol: float = DEFAULT_KKT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER,
                      lipschitz: float | None = None) -> tuple[np.ndarray, SolveStats]:
    """Solve one grid point, warm-started from ``init``.

    Terminates when the KKT residual drops to ``kkt_tol`` (and the objective
    is no worse than the initializer's) or after ``max_iter`` iterations;
    non-convergence is flagged in the stats, not raised.
    """
    if lam < 0.0:
        raise DataValidationError("penalty must be nonnegative")
    gidx, ng = problem.group_index, problem.n_groups
    dim = problem.gram.dim
    x = np.zeros(dim) if init is None else np.array(init, dtype=float)
    if x.shape[0] != dim:
        raise DataValidationError("initializer has the wrong dimension")
    if lipschitz is None:
        lipschitz = problem.gram.lipschitz()
    if lipschitz <= 0.0:
        # Zero design: the penalty alone makes 0 optimal.
        zero = np.zeros(dim)
        return zero, SolveStats(0, 0.0, True, objective_value(problem, lam, zero, zero))
    step = 1.0 / lipschitz
    thresh = step * lam * problem.weights

    c = problem.c
    weights = problem.weights
    lam_w = lam * weights
    kkt_scale = max(1.0, float(np.max(np.abs(c))) if c.size else 1.0)
    matvec = problem.gram.matvec

    def _kkt(b, gradient, nb):
        # Same quantity as kkt_residual, reusing the group norms of b.
        active = nb > 0.0
        coef = np.zeros(ng)
        np.divide(lam_w, nb, out=coef, where=active)
        d = gradient - b * coef[gidx]
        nd = np.sqrt(np.bincount(gidx, weights=d * d, minlength=ng))
        ngrad = np.sqrt(np.bincount(gidx, weights=gradient * gradient, minlength=ng))
        per_group = np.where(active, nd, np.maximum(0.0, ngrad - lam_w))
        return float(np.max(per_group)) / kkt_scale

    Gx = matvec(x)
    nx = group_norms(x, gidx, ng)
    obj_init = 0.5 * float(x @ Gx) - float(c @ x) + 0.5 * problem.y_sqnorm \
        + lam * float(weights @ nx)
    kkt = _kkt(x, c - Gx, nx)
    if kkt <= kkt_tol:
        return x, SolveStats(0, kkt, True, obj_init)

    x_prev, Gx_prev = x, Gx
    theta = 1.0
    obj_slack = 1e-12 * max(1.0, abs(obj_init))
    it = 0
    for it in range(1, max_iter + 1):
        theta_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * theta * theta))
        beta = (theta - 1.0) / theta_next
        y_vec = x + beta * (x - x_prev)
        Gy = Gx + beta * (Gx - Gx_prev)
        grad_y = Gy - c
        v = y_vec - step * grad_y
        nv = np.sqrt(np.bincount(gidx, weights=v * v, minlength=ng))
        scale = np.zeros(ng)
        np.divide(thresh, nv, out=scale, where=nv > 0.0)
        np.clip(1.0 - scale, 0.0, None, out=scale)
        x_new = v * scale[gidx]
        Gx_new = matvec(x_new)
        # Gradient-based adaptive restart: drop momentum when it points uphill.
        if float(grad_y @ (x_new - x)) > 0.0:
            theta_next = 1.0
        x_prev, Gx_prev = x, Gx
        x, Gx = x_new, Gx_new
        theta = theta_next
        nx = scale * nv  # group norms of x_new, reusing the prox scaling
        kkt = _kkt(x, c - Gx, nx)
        if kkt <= kkt_tol:
            obj = 0.5 * float(x @ Gx) - float(c @ x) + 0.5 * problem.y_sqnorm \
                + lam * float(weights @ nx)
            if obj <= obj_init + obj_slack:
                return x, SolveStats(it, kkt, True, obj)
    return x, SolveStats(it, kkt, kkt <= kkt_tol,
                         objective_value(problem, lam, x, Gx))


def entry_times(problem: GroupLassoProblem, grid: LambdaGrid,
                active_tol: float = DEFAULT_ACTIVE_TOL,
                kkt_tol: float = DEFAULT_KKT_TOL,
                max_iter: int = DEFAULT_MAX_ITER) -> PathResult:
    """Solve along the grid with warm starts and record group entry times.

    A group's entry time is the largest grid value at which its coefficient
    block has norm above ``active_tol`` (0.0 if it never does).  The first
    half of the groups is reported as "original", the second as "knockoff".
    """
    if problem.n_groups % 2 != 0:
        raise DataValidationError(
            "entry_times expects an augmented problem with original and "
            "knockoff halves (even group count)"
        )
    lipschitz = problem.gram.lipschitz()
    entries = np.zeros(problem.n_groups)
    iterations = []
    kkts = []
    converged = []
    b = np.zeros(problem.gram.dim)
    for lam in grid.values:
        b, stats = solve_group_lasso(
            problem, float(lam), init=b, kkt_tol=kkt_tol, max_iter=max_iter,
            lipschitz=lipschitz,
        )
        iterations.append(stats.iterations)
        kkts.append(stats.kkt_residual)
        converged.append(stats.converged)
        norms = group_norms(b, problem.group_index, problem.n_groups)
        newly = (entries == 0.0) & (norms > active_tol)
        entries[newly] = lam
        if np.all(entries > 0.0):
            break
    m = problem.n_groups // 2
    return PathResult(
        entry_original=entries[:m],
        entry_knockoff=entries[m:],
        grid=grid,
        iterations=np.array(iterations, dtype=np.intp),
        kkt_residuals=np.array(kkts),
        converged=np.array(converged, dtype=bool),
    )
