"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run with ``pytest tests/test_acceptance.py -s`` to see the per-criterion
lines.  The Monte Carlo criteria use fixed seeds, so outcomes are
reproducible; the heavy ones (7-9) dominate the runtime.
"""

import time

import numpy as np
import pytest
from scipy import linalg
from scipy.stats import binomtest

from conftest import make_design, random_orthogonal
from groupknockoff.construction import (
    block_inverse_sqrt,
    construct_group_knockoffs,
    equivariant_gamma,
    verify_knockoff_conditions,
)
from groupknockoff.design import gram, new_grouped_design, singleton_design
from groupknockoff.filtering import (
    FilterConfig,
    augment_design,
    augmented_group_index,
    check_group_antisymmetry,
    check_sufficiency,
    compute_w_statistics,
    fdp_estimate,
    knockoff_threshold,
    run_group_knockoff_filter,
    selection_sets,
)
from groupknockoff.multitask import (
    block_design,
    multitask_group_index,
    multitask_problem,
    run_multitask_knockoff,
)
from groupknockoff.simulation import (
    GroupSparseSimConfig,
    MultitaskSimConfig,
    run_experiment,
)
from groupknockoff.solver import (
    GroupLassoProblem,
    kkt_residual,
    lambda_max,
    make_lambda_grid,
    solve_group_lasso,
)


def _report(num, name, ok, detail=""):
    line = f"[criterion {num:02d}] {name}: {'PASS' if ok else 'FAIL'}"
    if detail:
        line += f"  ({detail})"
    print(line)
    assert ok, line


def test_criterion_01_knockoff_condition_fidelity():
    start = time.perf_counter()
    combos = [(rho, gf) for rho in (0.0, 0.5, 0.9) for gf in (0.0, 0.5)]
    worst = 0.0
    for i in range(50):
        rho, gf = combos[i % len(combos)]
        d = make_design(200, 60, 12, rho=rho, gamma_factor=gf, seed=1000 + i)
        aug = construct_group_knockoffs(d, seed=i)
        report = verify_knockoff_conditions(d.X, aug.X_tilde, aug.S, d.groups,
                                            tol=1e-8)
        worst = max(worst, report.max_gram_dev, report.max_cross_dev,
                    report.max_off_block, -report.min_eig_s)
        if not report.passed:
            _report(1, "knockoff condition fidelity", False,
                    f"instance {i} (rho={rho}, gf={gf})")
    elapsed = time.perf_counter() - start
    _report(1, "knockoff condition fidelity", elapsed < 30.0,
            f"50 instances, worst deviation {worst:.2e}, {elapsed:.1f}s")


def test_criterion_02_equivariant_gamma_closed_form():
    worst = 0.0
    for rho in [i / 10 for i in range(10)]:
        # Exact two-column design with pairwise correlation rho.
        X = np.zeros((8, 2))
        X[0, 0] = 1.0
        X[0, 1] = rho
        X[1, 1] = np.sqrt(1.0 - rho * rho)
        d = new_grouped_design(X, [0, 1])
        gamma = equivariant_gamma(gram(d), d.groups)
        worst = max(worst, abs(gamma - min(1.0, 2.0 * (1.0 - rho))))
        # And on the exact correlation matrix itself.
        Sigma = np.array([[1.0, rho], [rho, 1.0]])
        gamma_mat = equivariant_gamma(Sigma, d.groups)
        worst = max(worst, abs(gamma_mat - min(1.0, 2.0 * (1.0 - rho))))
    _report(2, "equivariant gamma closed form", worst < 1e-10,
            f"max |gamma - min(1, 2(1-rho))| = {worst:.2e}")


def test_criterion_03_solver_correctness():
    # KKT residual at every grid point on 20 random instances, recomputed
    # from the returned coefficients via the public residual function.
    worst_kkt = 0.0
    rhos = (0.0, 0.0, 0.4, 0.7)
    for i in range(20):
        d = make_design(100, 24, 6, rho=rhos[i % 4], seed=2000 + i)
        rng = np.random.default_rng(3000 + i)
        beta = np.zeros(24)
        k = i % 3
        for g in range(k):
            beta[d.groups[g]] = 3.5 * rng.choice([-1.0, 1.0], d.groups[g].size)
        y = d.X @ beta + rng.standard_normal(100)
        aug = construct_group_knockoffs(d, seed=i)
        prob = GroupLassoProblem.from_design(
            augment_design(d, aug.X_tilde), y, augmented_group_index(d), 2 * d.m)
        grid = make_lambda_grid(lambda_max(prob))
        b = np.zeros(prob.gram.dim)
        for lam in grid.values:
            b, stats = solve_group_lasso(prob, float(lam), init=b)
            res = kkt_residual(prob, float(lam), b)
            worst_kkt = max(worst_kkt, res)
            if res > 1e-6:
                _report(3, "solver correctness", False,
                        f"instance {i}, lam={lam:.3g}, kkt={res:.2e}")
    ok_kkt = worst_kkt <= 1e-6

    # Orthonormal single-group closed form: b = (1 - lam/||c||)+ c.
    A = np.eye(8)[:, :2]
    y = np.zeros(8)
    y[0], y[1] = 3.0, 4.0
    prob = GroupLassoProblem.from_design(A, y, [0, 0], 1)
    b, _ = solve_group_lasso(prob, 2.5, kkt_tol=1e-10)
    closed_form_err = float(np.max(np.abs(b - np.array([1.5, 2.0]))))
    ok_cf = closed_form_err < 1e-8

    # Above lambda_max the zero solution is returned exactly.
    rng = np.random.default_rng(17)
    A2 = rng.standard_normal((40, 10))
    y2 = rng.standard_normal(40)
    prob2 = GroupLassoProblem.from_design(A2, y2, np.arange(10) % 5, 5)
    b2, _ = solve_group_lasso(prob2, 1.01 * lambda_max(prob2))
    ok_zero = bool(np.array_equal(b2, np.zeros(10)))

    _report(3, "solver correctness", ok_kkt and ok_cf and ok_zero,
            f"worst KKT {worst_kkt:.2e}, closed-form err {closed_form_err:.2e}, "
            f"zero-above-lambda-max {ok_zero}")


def test_criterion_04_sufficiency_property():
    cfg = FilterConfig(grid_size=40)
    for i in range(10):
        d = make_design(64, 16, 4, seed=4000 + i)
        rng = np.random.default_rng(5000 + i)
        beta = np.zeros(16)
        beta[d.groups[i % 4]] = 3.0
        y = d.X @ beta + rng.standard_normal(64)
        aug = construct_group_knockoffs(d, seed=i)
        Q = random_orthogonal(64, seed=6000 + i)
        if not check_sufficiency(d, aug, y, Q, cfg):
            _report(4, "sufficiency under row rotation", False, f"instance {i}")
    _report(4, "sufficiency under row rotation", True,
            "10 instances x random orthogonal Q, max|dW| < 1e-6")


def test_criterion_05_group_antisymmetry_property():
    cfg = FilterConfig(grid_size=40)
    for i in range(5):
        d = make_design(64, 16, 4, seed=7000 + i)
        rng = np.random.default_rng(8000 + i)
        beta = np.zeros(16)
        beta[d.groups[0]] = 3.0
        y = d.X @ beta + rng.standard_normal(64)
        aug = construct_group_knockoffs(d, seed=i)
        for g in range(d.m):
            if not check_group_antisymmetry(d, aug, y, g, cfg):
                _report(5, "group antisymmetry", False,
                        f"instance {i}, group {g}")
    _report(5, "group antisymmetry", True,
            "5 instances x every group, sign flip within 1e-10")


def test_criterion_06_null_sign_symmetry():
    start = time.perf_counter()
    positives = 0
    nonzero = 0
    trial = 0
    cfg_template = GroupSparseSimConfig(n=300, p=100, m=20, group_size=5, k=0,
                                        trials=1, seed=99)
    from groupknockoff.simulation import gen_group_sparse_instance

    while nonzero < 500 and trial < 80:
        design, y, _ = gen_group_sparse_instance(cfg_template, trial)
        W, _, _ = compute_w_statistics(design, y,
                                       FilterConfig(seed=[99, trial, 1]))
        positives += int(np.sum(W > 0.0))
        nonzero += int(np.sum(W != 0.0))
        trial += 1
    pvalue = binomtest(positives, nonzero, 0.5).pvalue
    elapsed = time.perf_counter() - start
    _report(6, "null sign symmetry", nonzero >= 500 and pvalue >= 0.01,
            f"{positives}/{nonzero} positive, binomial p={pvalue:.3f}, "
            f"{trial} trials, {elapsed:.0f}s")


def test_criterion_07_group_fdr_control():
    start = time.perf_counter()
    cfg = GroupSparseSimConfig(n=600, p=200, m=40, group_size=5, k=8,
                               amplitude=3.5, rho=0.0, q=0.2, trials=200, seed=0)
    report = run_experiment([cfg], ["group-knockoff+"])
    s = report.summary[0]
    elapsed = time.perf_counter() - start
    bound = 0.2 + 2.0 * s["se_fdp"]
    ok = s["n_failed"] == 0 and s["mean_fdp"] <= bound and elapsed < 900.0
    _report(7, "group FDR control (knockoff+)", ok,
            f"mean FDP {s['mean_fdp']:.4f} <= {bound:.4f} "
            f"(se {s['se_fdp']:.4f}, power {s['mean_power']:.3f}, {elapsed:.0f}s)")


def test_criterion_08_power_ordering_under_correlation():
    start = time.perf_counter()
    cfg = GroupSparseSimConfig(n=600, p=200, m=40, group_size=5, k=8,
                               amplitude=3.5, rho=0.8, gamma_factor=0.0,
                               q=0.2, trials=100, seed=0)
    report = run_experiment([cfg], ["group-knockoff", "ungrouped-knockoff"])
    by = {s["method"]: s for s in report.summary}
    g, u = by["group-knockoff"], by["ungrouped-knockoff"]
    diff = g["mean_power"] - u["mean_power"]
    se_diff = float(np.hypot(g["se_power"], u["se_power"]))
    elapsed = time.perf_counter() - start
    ok = diff >= 2.0 * se_diff
    _report(8, "power ordering at high within-group correlation", ok,
            f"group {g['mean_power']:.3f} vs ungrouped {u['mean_power']:.3f}, "
            f"diff {diff:.3f} >= 2*SE {2 * se_diff:.3f}, {elapsed:.0f}s")


def test_criterion_09_multitask_fdr_and_power():
    start = time.perf_counter()
    cells = [MultitaskSimConfig(rho_y=0.0, q=0.2, trials=100, seed=0),
             MultitaskSimConfig(rho_y=0.5, q=0.2, trials=100, seed=0)]
    report = run_experiment(
        cells, ["multitask-knockoff", "multitask-knockoff+", "pooled-knockoff"])
    ok = True
    details = []
    for cell in (0, 1):
        by = {s["method"]: s for s in report.summary if s["cell"] == cell}
        plus = by["multitask-knockoff+"]
        mt = by["multitask-knockoff"]
        pooled = by["pooled-knockoff"]
        fdr_bound = 0.2 + 2.0 * plus["se_fdp"]
        fdr_ok = plus["mean_fdp"] <= fdr_bound
        se_diff = float(np.hypot(mt["se_power"], pooled["se_power"]))
        power_ok = mt["mean_power"] >= pooled["mean_power"] - 2.0 * se_diff
        ok = ok and fdr_ok and power_ok and plus["n_failed"] == 0
        details.append(
            f"rho_y={cells[cell].rho_y}: FDR+ {plus['mean_fdp']:.3f}<={fdr_bound:.3f}, "
            f"power mt {mt['mean_power']:.3f} vs pooled {pooled['mean_power']:.3f}"
        )
    elapsed = time.perf_counter() - start
    _report(9, "multitask FDR control and power vs pooled", ok,
            "; ".join(details) + f", {elapsed:.0f}s")


def test_criterion_10_reduction_identities():
    # (a) r=1 multitask equals the singleton-group filter.
    d = make_design(60, 12, 12, seed=21)
    rng = np.random.default_rng(21)
    beta = np.zeros(12)
    beta[[3, 8]] = 5.0
    y = d.X @ beta + rng.standard_normal(60)
    cfg = FilterConfig(q=0.3, seed=22, grid_size=60)
    mt = run_multitask_knockoff(d.X, y[:, None], cfg)
    single = run_group_knockoff_filter(singleton_design(d), y, cfg)
    ok_reduction = bool(np.array_equal(mt.selected_features, single.selected))

    # (b) block solver matches a densely materialized oracle at tiny sizes.
    n, p, r = 20, 5, 3
    d2 = make_design(n, p, p, seed=23)
    aug = construct_group_knockoffs(d2, seed=23)
    rng = np.random.default_rng(23)
    Y = rng.standard_normal((n, r))
    op_prob = multitask_problem(d2.X, aug.X_tilde, Y, feature_groups=True)
    A = np.hstack([block_design(d2.X, r), block_design(aug.X_tilde, r)])
    gidx = np.concatenate([multitask_group_index(p, r),
                           multitask_group_index(p, r) + p])
    dense_prob = GroupLassoProblem.from_design(A, Y.ravel(order="F"), gidx, 2 * p)
    lmax = lambda_max(dense_prob)
    worst = 0.0
    for lam in (0.5 * lmax, 0.1 * lmax, 0.02 * lmax):
        b_op, _ = solve_group_lasso(op_prob, lam)
        b_dense, _ = solve_group_lasso(dense_prob, lam)
        worst = max(worst, float(np.max(np.abs(b_op - b_dense))))
    ok_oracle = worst < 1e-8
    _report(10, "reduction identities", ok_reduction and ok_oracle,
            f"r=1 selection equal: {ok_reduction}; "
            f"materialized-oracle max diff {worst:.2e}")


def test_criterion_11_filter_arithmetic():
    W = np.array([3.0, -2.0, 1.0])
    checks = [
        knockoff_threshold(W, 0.5, "knockoff") == 1.0,
        selection_sets(W, 1.0)[0].tolist() == [0, 2],
        knockoff_threshold(W, 0.4, "knockoff") == 3.0,
        selection_sets(W, 3.0)[0].tolist() == [0],
        knockoff_threshold(W, 0.5, "knockoff+") is None,
        knockoff_threshold(W, 0.4, "knockoff+") is None,
        fdp_estimate(W, 1.0, "knockoff") == 0.5,
        fdp_estimate(W, 2.0, "knockoff") == 1.0,
        fdp_estimate(W, 3.0, "knockoff") == 0.0,
        fdp_estimate(W, 1.0, "knockoff+") == 1.0,
        fdp_estimate(W, 2.0, "knockoff+") == 2.0,
        fdp_estimate(W, 3.0, "knockoff+") == 1.0,
    ]
    _report(11, "filter arithmetic worked examples", all(checks),
            f"{sum(checks)}/{len(checks)} exact")
