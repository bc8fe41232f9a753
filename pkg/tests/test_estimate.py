"""Least-squares estimators: exact identification, constraints, error metrics."""

import itertools
import math

import numpy as np
import pytest

from netprobe.estimate import (
    EntryConstraint,
    ErrorMetrics,
    LsProblem,
    constrained_estimate,
    constraints_from_decision,
    error_metrics,
    load_constraints,
    ols_estimate,
    save_constraints,
)
from netprobe.dynamics import NoiseModel, simulate
from netprobe.infer import infer_one_hop
from netprobe.topology import StabilityClass, generate_random_digraph, laplacian_weights

FREE = EntryConstraint.FREE
POS = EntryConstraint.POSITIVE
ZERO = EntryConstraint.ZERO


def basis_pairs(w):
    n = w.shape[0]
    eye = np.eye(n)
    return tuple((eye[k], w @ eye[k]) for k in range(n))


def noisy_pairs(tm, count, seed, sigma=1.0):
    traj = simulate(tm, np.zeros(tm.n), count, NoiseModel(sigma, sigma), seed=seed)
    return tuple((traj.observations[t], traj.observations[t + 1]) for t in range(count))


def row_objective(x_mat, y_col, row):
    return float(((x_mat @ row - y_col) ** 2).sum())


def brute_force_constrained_row(x_mat, y_col, kinds):
    """Enumerate active sets: globally optimal row under the constraints."""
    n = x_mat.shape[1]
    keep = [j for j in range(n) if kinds[j] is not ZERO]
    pos = [j for j in keep if kinds[j] is POS]
    best, best_obj = None, np.inf
    for zeroed in itertools.chain.from_iterable(
        itertools.combinations(pos, r) for r in range(len(pos) + 1)
    ):
        active = [j for j in keep if j not in zeroed]
        row = np.zeros(n)
        if active:
            sol = np.linalg.lstsq(x_mat[:, active], y_col, rcond=None)[0]
            row[active] = sol
        if any(row[j] < -1e-12 for j in pos):
            continue
        obj = row_objective(x_mat, y_col, row)
        if obj < best_obj - 1e-15:
            best, best_obj = row, obj
    return best, best_obj


class TestOls:
    def test_exact_identification_from_basis(self):
        tm = laplacian_weights(generate_random_digraph(8, 0.3, 5), 0.9)
        sol = ols_estimate(LsProblem(basis_pairs(tm.matrix)))
        assert np.abs(sol.matrix - tm.matrix).max() <= 1e-10
        assert not sol.rank_deficient

    def test_single_pair_min_norm_flagged(self):
        a = np.array([1.0, 2.0, 0.5])
        b = np.array([0.3, -0.1, 0.9])
        sol = ols_estimate(LsProblem(((a, b),)))
        assert sol.rank_deficient and sol.rank == 1
        expected = np.outer(b, a) / (a @ a)  # pseudo-inverse solution
        assert np.abs(sol.matrix - expected).max() <= 1e-12

    def test_residual_orthogonality(self):
        tm = laplacian_weights(generate_random_digraph(10, 0.3, 8), 1.0)
        problem = LsProblem(noisy_pairs(tm, 25, seed=1))
        sol = ols_estimate(problem)
        x, y = problem.regressors(), problem.targets()
        gram = x.T @ (y - x @ sol.matrix.T)
        assert np.abs(gram).max() <= 1e-8

    def test_row_separability(self):
        tm = laplacian_weights(generate_random_digraph(9, 0.3, 2), 1.0)
        problem = LsProblem(noisy_pairs(tm, 20, seed=4))
        x, y = problem.regressors(), problem.targets()
        joint = ols_estimate(problem).matrix
        for i in range(9):
            row = np.linalg.lstsq(x, y[:, i], rcond=None)[0]
            assert row_objective(x, y[:, i], joint[i]) == pytest.approx(
                row_objective(x, y[:, i], row), abs=1e-10
            )

    def test_error_shrinks_with_data(self):
        tm = laplacian_weights(generate_random_digraph(20, 0.2, 44), 1.0)
        short, long = [], []
        for s in range(20):
            m_short = error_metrics(ols_estimate(LsProblem(noisy_pairs(tm, 25, seed=s))).matrix, tm.matrix)
            m_long = error_metrics(ols_estimate(LsProblem(noisy_pairs(tm, 50, seed=1000 + s))).matrix, tm.matrix)
            short.append(m_short.magnitude_error)
            long.append(m_long.magnitude_error)
        assert np.median(long) < np.median(short)


class TestConstrained:
    def test_all_free_equals_ols_bitwise(self):
        tm = laplacian_weights(generate_random_digraph(8, 0.3, 5), 1.0)
        problem = LsProblem(noisy_pairs(tm, 15, seed=2))
        assert np.array_equal(constrained_estimate(problem).matrix, ols_estimate(problem).matrix)

    def test_true_pattern_noiseless_exact(self):
        tm = laplacian_weights(generate_random_digraph(7, 0.35, 6), 1.0)
        w = tm.matrix
        constraints = {
            (i, j): (POS if w[i, j] > 0 else ZERO)
            for i in range(7)
            for j in range(7)
        }
        sol = constrained_estimate(LsProblem(basis_pairs(w), constraints))
        assert np.abs(sol.matrix - w).max() <= 1e-10

    def test_constraint_soundness(self):
        tm = laplacian_weights(generate_random_digraph(10, 0.3, 9), 1.0)
        rng = np.random.default_rng(12)
        problem_pairs = noisy_pairs(tm, 16, seed=3)
        constraints = {}
        for i in range(10):
            for j in range(10):
                r = rng.random()
                if r < 0.15:
                    constraints[(i, j)] = ZERO
                elif r < 0.3:
                    constraints[(i, j)] = POS
        sol = constrained_estimate(LsProblem(problem_pairs, constraints))
        for (i, j), kind in constraints.items():
            if kind is ZERO:
                assert sol.matrix[i, j] == 0.0
            elif kind is POS:
                assert sol.matrix[i, j] >= 0.0

    def test_objective_beats_projected_ols(self):
        tm = laplacian_weights(generate_random_digraph(8, 0.3, 19), 1.0)
        problem_pairs = noisy_pairs(tm, 14, seed=5)
        constraints = {(i, 2): (POS if tm.matrix[i, 2] > 0 else ZERO) for i in range(8) if i != 2}
        problem = LsProblem(problem_pairs, constraints)
        x, y = problem.regressors(), problem.targets()
        con = constrained_estimate(problem).matrix
        proj = ols_estimate(problem).matrix.copy()
        for (i, j), kind in constraints.items():
            if kind is ZERO:
                proj[i, j] = 0.0
            elif kind is POS:
                proj[i, j] = max(proj[i, j], 0.0)
        for i in range(8):
            assert row_objective(x, y[:, i], con[i]) <= row_objective(x, y[:, i], proj[i]) + 1e-10

    def test_active_set_matches_enumeration_oracle(self):
        rng = np.random.default_rng(77)
        for trial in range(40):
            m, n = 12, 4
            x = rng.normal(size=(m, n))
            y = rng.normal(size=m)
            kinds = [rng.choice([FREE, POS, ZERO], p=[0.4, 0.4, 0.2]) for _ in range(n)]
            constraints = {(0, j): kinds[j] for j in range(n)}
            pairs = tuple((x[t], np.repeat(y[t], n)) for t in range(m))
            sol = constrained_estimate(LsProblem(pairs, constraints))
            _, best_obj = brute_force_constrained_row(x, y, kinds)
            got_obj = row_objective(x, y, sol.matrix[0])
            assert got_obj <= best_obj + 1e-9

    def test_fully_zeroed_row(self):
        tm = laplacian_weights(generate_random_digraph(5, 0.4, 2), 1.0)
        constraints = {(0, j): ZERO for j in range(5)}
        sol = constrained_estimate(LsProblem(noisy_pairs(tm, 8, seed=1), constraints))
        assert np.array_equal(sol.matrix[0], np.zeros(5))

    def test_dominance_with_correct_constraints(self):
        tm = laplacian_weights(generate_random_digraph(10, 0.3, 23), 1.0)
        w = tm.matrix
        constraints = {
            (i, j): (POS if w[i, j] > 0 else ZERO) for i in range(10) for j in range(10) if i != j
        }
        for seed, sigma in ((1, 0.0), (2, 0.05), (3, 0.05)):
            pairs = (
                basis_pairs(w)
                if sigma == 0.0
                else noisy_pairs(tm, 30, seed=seed, sigma=sigma)
            )
            problem = LsProblem(pairs, constraints)
            err_con = np.linalg.norm(constrained_estimate(problem).matrix - w)
            err_ols = np.linalg.norm(ols_estimate(problem).matrix - w)
            assert err_con <= err_ols + 1e-9


class TestErrorMetrics:
    def test_perfect_estimate(self):
        w = np.array([[0.0, 1.0], [0.5, 0.5]])
        m = error_metrics(w, w)
        assert m.structure_error == 0.0 and m.magnitude_error == 0.0

    def test_zero_estimate(self):
        w = np.array([[0.0, 1.0], [0.5, 0.5]])
        m = error_metrics(np.zeros((2, 2)), w)
        assert m.magnitude_error == 1.0
        assert m.structure_error == 3 / 4

    def test_single_entry_flip(self):
        w = np.zeros((5, 5))
        w[0, 1] = 1.0
        est = w.copy()
        est[3, 3] = 2e-6  # just above the default sign tolerance
        assert error_metrics(est, w).structure_error == pytest.approx(1 / 25)

    def test_rejects_degenerate_inputs(self):
        with pytest.raises(ValueError):
            error_metrics(np.zeros((2, 2)), np.zeros((2, 2)))
        with pytest.raises(ValueError):
            error_metrics(np.zeros((2, 2)), np.zeros((3, 3)))

    def test_metrics_invariant_bounds(self):
        with pytest.raises(ValueError):
            ErrorMetrics(1.5, 0.1)
        with pytest.raises(ValueError):
            ErrorMetrics(0.5, -0.1)


class TestConstraintPlumbing:
    def test_constraints_from_decision(self):
        decision = infer_one_hop(
            np.zeros(4), np.array([0.0, 5.0, 0.1, 5.0]), 0, 4.0, 0.5,
            StabilityClass.MARGINALLY_STABLE,
        )
        constraints = constraints_from_decision(decision, 4)
        assert constraints[(1, 0)] is POS
        assert constraints[(3, 0)] is POS
        assert constraints[(2, 0)] is ZERO
        assert (0, 0) not in constraints

    def test_file_round_trip(self, tmp_path):
        constraints = {(0, 1): POS, (2, 1): ZERO, (3, 1): FREE}
        path = tmp_path / "cons.txt"
        save_constraints(path, constraints)
        loaded = load_constraints(path)
        assert loaded == {(0, 1): POS, (2, 1): ZERO}

    def test_problem_validation(self):
        with pytest.raises(ValueError):
            LsProblem(())
        with pytest.raises(ValueError):
            LsProblem(((np.zeros(3), np.zeros(2)),))
        with pytest.raises(ValueError):
            LsProblem(((np.zeros(3), np.zeros(3)),), {(5, 0): ZERO})
