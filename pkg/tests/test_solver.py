import numpy as np
import pytest

from conftest import make_design
from groupknockoff.construction import construct_group_knockoffs
from groupknockoff.design import singleton_design
from groupknockoff.errors import DataValidationError
from groupknockoff.filtering import (
    augment_design,
    augmented_group_index,
    augmented_weights,
)
from groupknockoff.solver import (
    GroupLassoProblem,
    LambdaGrid,
    entry_times,
    kkt_residual,
    lambda_max,
    make_lambda_grid,
    objective_value,
    solve_group_lasso,
)


def orthonormal_single_group_problem():
    # Two orthonormal columns in one group with A'y = (3, 4).
    A = np.eye(8)[:, :2]
    y = np.zeros(8)
    y[0], y[1] = 3.0, 4.0
    return GroupLassoProblem.from_design(A, y, [0, 0], 1)


def augmented_problem(design, y, weights_scheme="none"):
    aug = construct_group_knockoffs(design, seed=0)
    return GroupLassoProblem.from_design(
        augment_design(design, aug.X_tilde), y, augmented_group_index(design),
        2 * design.m, weights=augmented_weights(design, weights_scheme),
    )


class TestLambdaMax:
    def test_zero_response(self):
        A = np.eye(6)[:, :3]
        prob = GroupLassoProblem.from_design(A, np.zeros(6), [0, 1, 2], 3)
        assert lambda_max(prob) == 0.0

    def test_orthonormal_group_norm(self):
        prob = orthonormal_single_group_problem()
        assert lambda_max(prob) == pytest.approx(5.0, abs=1e-14)

    def test_zero_solution_above_lambda_max(self):
        rng = np.random.default_rng(0)
        A = rng.standard_normal((30, 8))
        y = rng.standard_normal(30)
        prob = GroupLassoProblem.from_design(A, y, np.arange(8) % 4, 4)
        lmax = lambda_max(prob)
        b, stats = solve_group_lasso(prob, 1.01 * lmax)
        assert np.array_equal(b, np.zeros(8))
        assert stats.converged
        b_at, _ = solve_group_lasso(prob, lmax)
        assert np.array_equal(b_at, np.zeros(8))

    def test_sqrt_weights_rescale(self):
        d = make_design(40, 8, 2, seed=1)
        rng = np.random.default_rng(1)
        y = rng.standard_normal(40)
        plain = augmented_problem(d, y, "none")
        weighted = augmented_problem(d, y, "sqrt")
        assert lambda_max(weighted) == pytest.approx(lambda_max(plain) / 2.0)


class TestMakeLambdaGrid:
    def test_log_spacing(self):
        grid = make_lambda_grid(100.0, 3, 0.01)
        assert np.allclose(grid.values, [100.0, 10.0, 1.0])

    def test_two_points(self):
        grid = make_lambda_grid(5.0, 2, 0.5)
        assert grid.values.tolist() == [5.0, 2.5]

    def test_constant_ratio_at_defaults(self):
        grid = make_lambda_grid(3.7)
        ratios = grid.values[1:] / grid.values[:-1]
        assert np.max(np.abs(ratios - ratios[0])) < 1e-12
        assert grid.values[0] == 3.7
        assert grid.values[-1] == pytest.approx(3.7e-3)

    def test_invalid_inputs(self):
        with pytest.raises(DataValidationError):
            make_lambda_grid(0.0)
        with pytest.raises(DataValidationError):
            make_lambda_grid(1.0, 1)
        with pytest.raises(DataValidationError):
            make_lambda_grid(1.0, 10, 1.5)


class TestSolveGroupLasso:
    def test_zero_response(self):
        A = np.eye(6)[:, :3]
        prob = GroupLassoProblem.from_design(A, np.zeros(6), [0, 1, 2], 3)
        b, stats = solve_group_lasso(prob, 0.5)
        assert np.array_equal(b, np.zeros(3))

    def test_block_soft_threshold_closed_form(self):
        # Orthonormal single group: solution is (1 - lam/||c||)+ * c.
        prob = orthonormal_single_group_problem()
        b, stats = solve_group_lasso(prob, 2.5, kkt_tol=1e-10)
        assert np.max(np.abs(b - np.array([1.5, 2.0]))) < 1e-8
        assert stats.converged
        assert kkt_residual(prob, 2.5, b) < 1e-10

    def test_kkt_residual_cases(self):
        prob = orthonormal_single_group_problem()
        zero = np.zeros(2)
        assert kkt_residual(prob, 5.0, zero) == 0.0
        assert kkt_residual(prob, 6.0, zero) == 0.0
        assert kkt_residual(prob, 2.5, zero) > 0.0

    def test_warm_start_never_worsens_objective(self):
        d = make_design(60, 12, 4, seed=2)
        rng = np.random.default_rng(2)
        beta = np.zeros(12)
        beta[d.groups[0]] = 3.0
        y = d.X @ beta + rng.standard_normal(60)
        prob = augmented_problem(d, y)
        grid = make_lambda_grid(lambda_max(prob), 25, 1e-2)
        b = np.zeros(prob.gram.dim)
        for lam in grid.values:
            obj_init = objective_value(prob, float(lam), b)
            b, stats = solve_group_lasso(prob, float(lam), init=b)
            assert stats.converged
            assert stats.objective <= obj_init + 1e-10 * max(1.0, abs(obj_init))
            assert kkt_residual(prob, float(lam), b) <= 1e-6


class TestEntryTimes:
    def test_entries_are_grid_values(self):
        d = make_design(60, 12, 4, seed=3)
        rng = np.random.default_rng(3)
        y = d.X @ rng.standard_normal(12) + rng.standard_normal(60)
        prob = augmented_problem(d, y)
        grid = make_lambda_grid(lambda_max(prob), 30, 1e-2)
        path = entry_times(prob, grid)
        for t in np.concatenate([path.entry_original, path.entry_knockoff]):
            assert t == 0.0 or np.any(grid.values == t)
        assert np.all(path.kkt_residuals <= 1e-6)
        assert np.all(path.converged)

    def test_coarse_grid_quantization(self):
        d = make_design(50, 10, 5, seed=4)
        rng = np.random.default_rng(4)
        y = d.X @ rng.standard_normal(10) + 0.1 * rng.standard_normal(50)
        prob = augmented_problem(d, y)
        lmax = lambda_max(prob)
        grid = make_lambda_grid(lmax, 2, 0.9)
        path = entry_times(prob, grid)
        allowed = {0.0, grid.values[0], grid.values[1]}
        seen = set(np.concatenate([path.entry_original, path.entry_knockoff]).tolist())
        assert seen <= allowed

    def test_uniform_scaling_contract(self):
        # Doubling the response and the grid doubles every entry time and
        # leaves the activity pattern (hence any downstream selection) alone.
        d = make_design(60, 12, 4, seed=5)
        rng = np.random.default_rng(5)
        beta = np.zeros(12)
        beta[d.groups[1]] = 4.0
        y = d.X @ beta + rng.standard_normal(60)
        aug = construct_group_knockoffs(d, seed=0)
        A = augment_design(d, aug.X_tilde)
        gidx = augmented_group_index(d)
        p1 = GroupLassoProblem.from_design(A, y, gidx, 2 * d.m)
        p2 = GroupLassoProblem.from_design(A, 2.0 * y, gidx, 2 * d.m)
        assert lambda_max(p2) == 2.0 * lambda_max(p1)
        grid1 = make_lambda_grid(lambda_max(p1), 20, 1e-2)
        grid2 = LambdaGrid(values=2.0 * grid1.values,
                           lambda_max=2.0 * grid1.lambda_max,
                           min_ratio=grid1.min_ratio)
        path1 = entry_times(p1, grid1)
        path2 = entry_times(p2, grid2)
        assert np.allclose(path2.entry_original, 2.0 * path1.entry_original,
                           rtol=1e-10, atol=0.0)
        assert np.allclose(path2.entry_knockoff, 2.0 * path1.entry_knockoff,
                           rtol=1e-10, atol=0.0)
        assert np.array_equal(path1.entry_original > 0, path2.entry_original > 0)

    def test_null_entry_symmetry_monte_carlo(self):
        # With no signal, each group and its knockoff are exchangeable, so
        # originals should beat knockoffs about as often as the reverse.
        wins, losses = 0, 0
        for t in range(30):
            d = make_design(64, 16, 8, seed=100 + t)
            rng = np.random.default_rng(200 + t)
            y = rng.standard_normal(64)
            prob = augmented_problem(d, y)
            lmax = lambda_max(prob)
            if lmax == 0.0:
                continue
            path = entry_times(prob, make_lambda_grid(lmax, 40, 1e-2))
            wins += int(np.sum(path.entry_original > path.entry_knockoff))
            losses += int(np.sum(path.entry_original < path.entry_knockoff))
        frac = wins / (wins + losses)
        assert 0.4 < frac < 0.6

    def test_strong_signal_enters_first(self):
        hits = 0
        trials = 20
        for t in range(trials):
            d = make_design(64, 16, 8, seed=300 + t)
            rng = np.random.default_rng(400 + t)
            beta = np.zeros(16)
            beta[d.groups[2]] = 10.0
            y = d.X @ beta + rng.standard_normal(64)
            prob = augmented_problem(d, y)
            path = entry_times(prob, make_lambda_grid(lambda_max(prob), 40, 1e-2))
            hits += int(path.entry_original[2] > path.entry_knockoff[2])
        assert hits >= 0.9 * trials

    def test_odd_group_count_rejected(self):
        A = np.eye(6)[:, :3]
        prob = GroupLassoProblem.from_design(A, np.ones(6), [0, 1, 2], 3)
        with pytest.raises(DataValidationError):
            entry_times(prob, make_lambda_grid(1.0, 5, 0.1))


def test_kronecker_reduction_consistency():
    # Singleton-group problem built densely vs through the augmented helpers.
    d = make_design(40, 8, 8, seed=6)
    rng = np.random.default_rng(6)
    y = rng.standard_normal(40)
    single = singleton_design(d)
    prob = augmented_problem(single, y)
    assert prob.n_groups == 16
    assert lambda_max(prob) > 0
