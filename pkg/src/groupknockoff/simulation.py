"""Synthetic benchmarks: instance generators, competing methods, FDR/power scoring.

Two experimental settings are covered.  The group-sparse setting draws a
grouped linear model with configurable within- and between-group feature
correlation and compares group-level knockoff selection against the
per-feature (singleton-group) filter.  The multitask setting draws a
row-sparse coefficient matrix with configurable design and noise
correlation and compares the multitask filter against pooled and parallel
per-feature baselines.

Trials are independent given their derived seeds (master seed plus trial
counter), so records are reproducible and order-insensitive.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from typing import Iterable, Sequence

import numpy as np
from scipy import linalg

from .construction import construct_group_knockoffs
from .design import (
    GroundTruth,
    GroupedDesign,
    new_grouped_design,
    normalize_columns,
    normalize_matrix_columns,
    singleton_design,
)
from .errors import DataValidationError, NumericalError
from .filtering import (
    FilterConfig,
    apply_threshold,
    compute_w_statistics,
    signed_max_statistics,
)
from .multitask import multitask_problem
from .solver import GroupLassoProblem, entry_times, lambda_max, make_lambda_grid

__all__ = [
    "GroupSparseSimConfig",
    "MultitaskSimConfig",
    "SimulationReport",
    "within_between_covariance",
    "tapered_covariance",
    "equicorrelated_covariance",
    "gen_group_sparse_instance",
    "gen_multitask_instance",
    "evaluate_selection",
    "run_experiment",
    "GROUP_SPARSE_METHODS",
    "MULTITASK_METHODS",
]

GROUP_SPARSE_FAMILIES = ("group", "ungrouped")
MULTITASK_FAMILIES = ("multitask", "pooled", "parallel")
GROUP_SPARSE_METHODS = ("group-knockoff", "group-knockoff+",
                        "ungrouped-knockoff", "ungrouped-knockoff+")
MULTITASK_METHODS = ("multitask-knockoff", "multitask-knockoff+",
                     "pooled-knockoff", "pooled-knockoff+",
                     "parallel-knockoff", "parallel-knockoff+")


@dataclass(frozen=True)
class GroupSparseSimConfig:
    """Group-sparse simulation cell.  Defaults are desk scale; see
    :meth:`paper_scale` for the full-size setting."""

    n: int = 600
    p: int = 200
    m: int = 40
    group_size: int = 5
    k: int = 8
    amplitude: float = 3.5
    rho: float = 0.0
    gamma_factor: float = 0.0
    q: float = 0.2
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if self.m * self.group_size != self.p:
            raise DataValidationError(
                f"m * group_size must equal p ({self.m}*{self.group_size} != {self.p})"
            )
        if not 0 <= self.k <= self.m:
            raise DataValidationError("k must lie in [0, m]")
        if not 0.0 <= self.rho < 1.0:
            raise DataValidationError("rho must lie in [0, 1)")
        if not 0.0 <= self.gamma_factor <= 1.0:
            raise DataValidationError("gamma_factor must lie in [0, 1]")

    @classmethod
    def paper_scale(cls, **overrides) -> "GroupSparseSimConfig":
        """The full-size setting: n=3000, p=1000, 200 groups of 5, k=20."""
        base = dict(n=3000, p=1000, m=200, group_size=5, k=20)
        base.update(overrides)
        return cls(**base)


@dataclass(frozen=True)
class MultitaskSimConfig:
    """Multitask simulation cell.  The default scale is already desk scale.

    ``signal_scale`` defaults to 2*sqrt(r) when left as None.
    """

    n: int = 150
    p: int = 50
    r: int = 5
    k: int = 10
    signal_scale: float | None = None
    rho_x: float = 0.0
    rho_y: float = 0.0
    q: float = 0.2
    trials: int = 100
    seed: int = 0

    def __post_init__(self):
        if not 0 <= self.k <= self.p:
            raise DataValidationError("k must lie in [0, p]")
        if not 0.0 <= self.rho_x < 1.0:
            raise DataValidationError("rho_x must lie in [0, 1)")
        if not -1.0 < self.rho_y < 1.0:
            raise DataValidationError("rho_y must lie in (-1, 1)")

    @property
    def scale(self) -> float:
        return 2.0 * math.sqrt(self.r) if self.signal_scale is None else self.signal_scale


def within_between_covariance(p: int, group_index, rho: float,
                              gamma_factor: float) -> np.ndarray:
    """Unit-diagonal covariance: rho within groups, gamma_factor*rho between.

    Raises if the resulting matrix is not PSD (min eigenvalue below -1e-10).
    """
    group_index = np.asarray(group_index)
    same = group_index[:, None] == group_index[None, :]
    Sigma = np.where(same, rho, gamma_factor * rho)
    np.fill_diagonal(Sigma, 1.0)
    if linalg.eigvalsh(Sigma)[0] < -1e-10:
        raise NumericalError(
            f"covariance parameters (rho={rho}, gamma_factor={gamma_factor}) "
            "give a non-PSD matrix"
        )
    return Sigma


def tapered_covariance(p: int, rho_x: float) -> np.ndarray:
    """AR(1)-style covariance with entries rho_x**|j-k| (always PSD)."""
    if not -1.0 < rho_x < 1.0:
        raise DataValidationError("rho_x must lie in (-1, 1)")
    idx = np.arange(p)
    return rho_x ** np.abs(idx[:, None] - idx[None, :]).astype(float)


def equicorrelated_covariance(r: int, rho_y: float) -> np.ndarray:
    """Unit diagonal, rho_y everywhere off-diagonal; PSD needs rho_y > -1/(r-1)."""
    if r > 1 and not -1.0 / (r - 1) < rho_y < 1.0:
        raise NumericalError(
            f"equicorrelation rho_y={rho_y} is not PSD for r={r} "
            f"(needs rho_y > {-1.0 / (r - 1):.4f})"
        )
    Sigma = np.full((r, r), rho_y)
    np.fill_diagonal(Sigma, 1.0)
    return Sigma


def _covariance_sqrt(Sigma: np.ndarray) -> np.ndarray:
    """Symmetric factor L with L L' = Sigma, tolerating tiny negative eigs."""
    w, V = linalg.eigh((Sigma + Sigma.T) / 2.0)
    return V * np.sqrt(np.clip(w, 0.0, None))


def _trial_rng(master_seed: int, trial: int, stream: int) -> np.random.Generator:
    # Counter-derived per-trial streams: independent and order-insensitive.
    return np.random.default_rng([master_seed, trial, stream])


def gen_group_sparse_instance(config: GroupSparseSimConfig, trial_seed: int,
                              ) -> tuple[GroupedDesign, np.ndarray, GroundTruth]:
    """One synthetic grouped-regression instance.

    Rows of X are drawn from the configured covariance (iid standard normal
    when rho=0), columns are normalized, k signal groups get iid +-amplitude
    coefficients, and y = X beta + standard normal noise.
    """
    rng = _trial_rng(config.seed, trial_seed, 0)
    labels = np.repeat(np.arange(config.m), config.group_size)
    Z = rng.standard_normal((config.n, config.p))
    if config.rho > 0.0:
        Sigma = within_between_covariance(config.p, labels, config.rho,
                                          config.gamma_factor)
        Z = Z @ _covariance_sqrt(Sigma).T
    design = normalize_columns(new_grouped_design(Z, labels))
    beta = np.zeros(config.p)
    if config.k > 0:
        signal = np.sort(rng.choice(config.m, size=config.k, replace=False))
        for i in signal:
            g = design.groups[i]
            beta[g] = config.amplitude * rng.choice([-1.0, 1.0], size=g.size)
    else:
        signal = np.array([], dtype=int)
    y = design.X @ beta + rng.standard_normal(config.n)
    return design, y, GroundTruth(signal_groups=signal, beta=beta)


def gen_multitask_instance(config: MultitaskSimConfig, trial_seed: int,
                           ) -> tuple[np.ndarray, np.ndarray, GroundTruth]:
    """One synthetic multitask instance (X normalized, Y = X B + E).

    B has k nonzero rows, each the configured scale times a random unit
    vector; noise rows are drawn from the equicorrelated covariance.
    """
    rng = _trial_rng(config.seed, trial_seed, 0)
    Z = rng.standard_normal((config.n, config.p))
    if config.rho_x > 0.0:
        Z = Z @ _covariance_sqrt(tapered_covariance(config.p, config.rho_x)).T
    X = normalize_matrix_columns(Z)
    B = np.zeros((config.p, config.r))
    if config.k > 0:
        rows = np.sort(rng.choice(config.p, size=config.k, replace=False))
        for j in rows:
            u = rng.standard_normal(config.r)
            B[j] = config.scale * u / np.linalg.norm(u)
    else:
        rows = np.array([], dtype=int)
    E = rng.standard_normal((config.n, config.r))
    if config.rho_y != 0.0:
        E = E @ _covariance_sqrt(equicorrelated_covariance(config.r, config.rho_y)).T
    Y = X @ B + E
    return X, Y, GroundTruth(signal_groups=rows, beta=B)


def evaluate_selection(selected, truth: GroundTruth) -> tuple[float, float]:
    """(false discovery proportion, power) of a selected index set."""
    selected = np.asarray(selected, dtype=int)
    signal = np.asarray(truth.signal_groups, dtype=int)
    false = np.setdiff1d(selected, signal).size
    hits = np.intersect1d(selected, signal).size
    fdp = false / max(selected.size, 1)
    power = hits / max(signal.size, 1)
    return fdp, power


def _parse_method(method: str) -> tuple[str, str]:
    if method.endswith("-knockoff+"):
        family, variant = method[: -len("-knockoff+")], "knockoff+"
    elif method.endswith("-knockoff"):
        family, variant = method[: -len("-knockoff")], "knockoff"
    else:
        raise DataValidationError(f"unknown method name: {method!r}")
    if family not in GROUP_SPARSE_FAMILIES + MULTITASK_FAMILIES:
        raise DataValidationError(f"unknown method family: {family!r}")
    return family, variant


def _config_cells(config) -> dict:
    if isinstance(config, GroupSparseSimConfig):
        return {"setting": "group-sparse", "n": config.n, "p": config.p,
                "m": config.m, "group_size": config.group_size, "k": config.k,
                "amplitude": config.amplitude, "rho": config.rho,
                "gamma_factor": config.gamma_factor, "q": config.q}
    return {"setting": "multitask", "n": config.n, "p": config.p,
            "r": config.r, "k": config.k, "signal_scale": config.scale,
            "rho_x": config.rho_x, "rho_y": config.rho_y, "q": config.q}


def _problem_w(problem: GroupLassoProblem, config: FilterConfig) -> np.ndarray:
    lmax = lambda_max(problem)
    if lmax == 0.0:
        return np.zeros(problem.n_groups // 2)
    grid = make_lambda_grid(lmax, config.grid_size, config.grid_min_ratio)
    path = entry_times(problem, grid, active_tol=config.active_tol,
                       kkt_tol=config.kkt_tol, max_iter=config.max_iter)
    return signed_max_statistics(path)


def _group_sparse_family_w(design: GroupedDesign, y, family: str,
                           config: FilterConfig):
    """(W, gamma, selection->group mapper) for one family on one instance.

    The ungrouped family selects features; a group counts as discovered when
    any of its features is selected.
    """
    if family == "group":
        W, _, aug = compute_w_statistics(design, y, config)
        return W, aug.gamma, lambda sel: sel
    if family == "ungrouped":
        single = singleton_design(design)
        W, _, aug = compute_w_statistics(single, y, config)
        gi = design.group_index
        return W, aug.gamma, lambda sel: np.unique(gi[sel])
    raise DataValidationError(f"family {family!r} is not a group-sparse method")


def _multitask_family_w(X, Y, aug, family: str, config: FilterConfig):
    """(list of W vectors, selection->feature mapper) for one family.

    parallel yields one W per response (thresholded separately, discoveries
    unioned); pooled selects columns of the block design, mapped to features
    by column index modulo p.
    """
    p, r = X.shape[1], Y.shape[1]
    if family == "multitask":
        weights = None
        if config.group_weights == "sqrt":
            weights = np.sqrt(float(r)) * np.ones(2 * p)
        problem = multitask_problem(X, aug.X_tilde, Y, feature_groups=True,
                                    weights=weights)
        return [_problem_w(problem, config)], lambda sel: sel
    if family == "pooled":
        problem = multitask_problem(X, aug.X_tilde, Y, feature_groups=False)
        return [_problem_w(problem, config)], lambda sel: np.unique(sel % p)
    if family == "parallel":
        A = np.hstack([X, aug.X_tilde])
        gidx = np.arange(2 * p, dtype=np.intp)
        Ws = []
        for l in range(r):
            problem = GroupLassoProblem.from_design(A, Y[:, l], gidx, 2 * p)
            Ws.append(_problem_w(problem, config))
        return Ws, lambda sel: sel
    raise DataValidationError(f"family {family!r} is not a multitask method")


@dataclass(frozen=True)
class SimulationReport:
    """Per-trial records (long format) and per-cell aggregates."""

    records: list
    summary: list


_CELL_COLUMNS = ("setting", "n", "p", "m", "group_size", "k", "amplitude",
                 "rho", "gamma_factor", "r", "signal_scale", "rho_x", "rho_y", "q")


def _summarize(records: list) -> list:
    cells: dict = {}
    for rec in records:
        cells.setdefault((rec["cell"], rec["method"]), []).append(rec)
    summary = []
    for (cell, method), recs in sorted(cells.items()):
        ok = [r for r in recs if not r["failed"]]
        n_failed = len(recs) - len(ok)
        entry = {"cell": cell, "method": method,
                 "n_trials": len(ok), "n_failed": n_failed,
                 "flagged": n_failed > 0.05 * len(recs)}
        for col in _CELL_COLUMNS:
            if col in recs[0]:
                entry[col] = recs[0][col]
        if ok:
            fdps = np.array([r["fdp"] for r in ok])
            powers = np.array([r["power"] for r in ok])
            entry.update(
                mean_fdp=float(fdps.mean()),
                se_fdp=float(fdps.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0,
                mean_power=float(powers.mean()),
                se_power=float(powers.std(ddof=1) / math.sqrt(len(ok))) if len(ok) > 1 else 0.0,
                mean_selected=float(np.mean([r["n_selected"] for r in ok])),
            )
        summary.append(entry)
    return summary


def _failed_records(cell, cell_fields, t, methods, message):
    return [dict(cell=cell, **cell_fields, trial=t, method=mth, fdp=np.nan,
                 power=np.nan, n_selected=0, threshold=None, gamma=np.nan,
                 failed=True, error=message) for mth in methods]


def _run_trial(config, cell, cell_fields, t, methods, parsed, base_solver,
               is_group_sparse):
    records = []
    families = sorted({fam for fam, _ in parsed})
    try:
        if is_group_sparse:
            design, y, truth = gen_group_sparse_instance(config, t)
            family_data = {}
            for stream, fam in enumerate(families, start=1):
                cfg = replace(base_solver, q=config.q,
                              seed=[config.seed, t, stream])
                family_data[fam] = _group_sparse_family_w(design, y, fam, cfg)
            for mth, (fam, variant) in zip(methods, parsed):
                W, gamma, mapper = family_data[fam]
                threshold, sel, _ = apply_threshold(W, config.q, variant)
                chosen = mapper(sel)
                fdp, power = evaluate_selection(chosen, truth)
                records.append(dict(cell=cell, **cell_fields, trial=t, method=mth,
                                    fdp=fdp, power=power,
                                    n_selected=int(np.size(chosen)),
                                    threshold=threshold, gamma=gamma,
                                    failed=False, error=""))
        else:
            X, Y, truth = gen_multitask_instance(config, t)
            design = new_grouped_design(X, range(X.shape[1]))
            cfg = replace(base_solver, q=config.q, seed=[config.seed, t, 1])
            aug = construct_group_knockoffs(design, seed=cfg.seed)
            family_data = {fam: _multitask_family_w(X, Y, aug, fam, cfg)
                           for fam in families}
            for mth, (fam, variant) in zip(methods, parsed):
                Ws, mapper = family_data[fam]
                pieces = []
                thresholds = []
                for W in Ws:
                    threshold, sel, _ = apply_threshold(W, config.q, variant)
                    pieces.append(np.asarray(mapper(sel), dtype=np.intp))
                    thresholds.append(threshold)
                selected = np.unique(np.concatenate(pieces))
                fdp, power = evaluate_selection(selected, truth)
                threshold = thresholds[0] if len(thresholds) == 1 else None
                records.append(dict(cell=cell, **cell_fields, trial=t, method=mth,
                                    fdp=fdp, power=power,
                                    n_selected=int(selected.size),
                                    threshold=threshold, gamma=aug.gamma,
                                    failed=False, error=""))
    except (DataValidationError, NumericalError) as exc:
        return _failed_records(cell, cell_fields, t, methods, str(exc))
    return records


def run_experiment(configs: Sequence, methods: Iterable[str],
                   trials: int | None = None,
                   solver: FilterConfig | None = None) -> SimulationReport:
    """Run every method on every cell of a parameter sweep.

    ``configs`` is a list of simulation cells (either kind); ``methods``
    names come from :data:`GROUP_SPARSE_METHODS` / :data:`MULTITASK_METHODS`.
    Per-trial failures are recorded (with ``failed=True``) rather than
    raised; a cell with more than 5% failed trials is flagged in the
    summary.  ``trials`` overrides each config's trial count.
    """
    methods = list(methods)
    parsed = [_parse_method(mth) for mth in methods]
    base_solver = solver if solver is not None else FilterConfig()
    records: list = []
    for cell, config in enumerate(configs):
        is_group_sparse = isinstance(config, GroupSparseSimConfig)
        allowed = GROUP_SPARSE_FAMILIES if is_group_sparse else MULTITASK_FAMILIES
        for fam, _ in parsed:
            if fam not in allowed:
                raise DataValidationError(
                    f"method family {fam!r} does not apply to "
                    f"{'group-sparse' if is_group_sparse else 'multitask'} cells"
                )
        n_trials = trials if trials is not None else config.trials
        cell_fields = _config_cells(config)
        for t in range(n_trials):
            records.extend(
                _run_trial(config, cell, cell_fields, t, methods, parsed,
                           base_solver, is_group_sparse)
            )
    return SimulationReport(records=records, summary=_summarize(records))
