"""Simulator exactness, noise statistics, excitation propagation, exports."""

import csv
import math

import numpy as np
import pytest

from netprobe.detect import deviation_noise_std
from netprobe.dynamics import (
    ExcitationPlan,
    NoiseModel,
    Trajectory,
    deviation_bound,
    observation_deviation,
    simulate,
    write_trajectory_csv,
)
from netprobe.topology import (
    StabilityClass,
    generate_random_digraph,
    laplacian_weights,
    scale_to_asymptotic,
)


@pytest.fixture(scope="module")
def tm():
    return laplacian_weights(generate_random_digraph(10, 0.3, 17), 1.0)


class TestSimulate:
    def test_noiseless_matches_matrix_powers(self, tm):
        rng = np.random.default_rng(0)
        x0 = rng.uniform(-100, 100, 10)
        traj = simulate(tm, x0, 30, NoiseModel.noiseless(), seed=1)
        power = np.eye(10)
        for t in range(31):
            assert np.abs(traj.observations[t] - power @ x0).max() <= 1e-12
            power = power @ tm.matrix

    def test_noiseless_excitation_adds_weight_column(self, tm):
        x0 = np.zeros(10)
        e, j, t0 = 5.0, 2, 3
        traj = simulate(tm, x0, 6, NoiseModel.noiseless(), ExcitationPlan(j, t0, e), seed=1)
        assert np.abs(traj.observations[t0 + 1] - e * tm.matrix[:, j]).max() <= 1e-12
        # and the excited step's own observation is pre-injection
        assert np.abs(traj.observations[t0]).max() == 0.0

    def test_one_step_noise_covariance(self, tm):
        # variance of y_{t+1} - W y_t against its closed-form diagonal
        w = tm.matrix
        samples = np.empty((10**4, 10))
        for s in range(10**4):
            traj = simulate(tm, np.zeros(10), 1, NoiseModel(1.0, 1.0), seed=s)
            samples[s] = traj.observations[1] - w @ traj.observations[0]
        target = np.diag(w @ w.T) + 1.0 + 1.0
        rel = np.abs(samples.var(axis=0, ddof=1) - target) / target
        assert rel.max() <= 0.05

    def test_seeded_determinism(self, tm):
        a = simulate(tm, np.ones(10), 20, NoiseModel(1, 1), seed=99)
        b = simulate(tm, np.ones(10), 20, NoiseModel(1, 1), seed=99)
        assert np.array_equal(a.states, b.states)
        assert np.array_equal(a.observations, b.observations)

    def test_excitation_superposition(self, tm):
        # same seed with/without input: the difference is the propagated column
        x0 = np.random.default_rng(5).uniform(-100, 100, 10)
        e, j, t0 = 12.0, 4, 6
        base = simulate(tm, x0, 14, NoiseModel(1, 1), seed=77)
        excited = simulate(tm, x0, 14, NoiseModel(1, 1), ExcitationPlan(j, t0, e), seed=77)
        column = np.zeros(10)
        column[j] = e
        for t in range(t0 + 1, 15):
            column_next = tm.matrix @ column if t == t0 + 1 else tm.matrix @ column_next
            diff = excited.states[t] - base.states[t]
            assert np.abs(diff - column_next).max() <= 1e-9

    def test_marginal_noiseless_boundedness(self, tm):
        x0 = np.random.default_rng(8).uniform(-50, 50, 10)
        traj = simulate(tm, x0, 40, NoiseModel.noiseless(), seed=0)
        assert np.abs(traj.states).max() <= np.abs(x0).max() + 1e-12

    def test_rejects_bad_inputs(self, tm):
        with pytest.raises(ValueError):
            simulate(tm, np.zeros(3), 5, NoiseModel(1, 1))
        with pytest.raises(ValueError):
            simulate(tm, np.zeros(10), 0, NoiseModel(1, 1))
        with pytest.raises(ValueError):
            simulate(tm, np.full(10, np.inf), 5, NoiseModel(1, 1))
        with pytest.raises(ValueError):
            simulate(tm, np.zeros(10), 5, NoiseModel(1, 1), ExcitationPlan(0, 5, 1.0))
        with pytest.raises(ValueError):
            simulate(tm, np.zeros(10), 5, NoiseModel(1, 1), ExcitationPlan(99, 2, 1.0))


class TestDeviationBound:
    def test_marginal_is_spread(self):
        assert deviation_bound([3.0, 1.0, 2.0], StabilityClass.MARGINALLY_STABLE) == 2.0

    def test_asymptotic_is_max_abs(self):
        assert deviation_bound([3.0, 1.0, 2.0], StabilityClass.ASYMPTOTICALLY_STABLE) == 3.0
        assert deviation_bound([-4.0, 1.0], StabilityClass.ASYMPTOTICALLY_STABLE) == 4.0

    def test_consensus_vector(self):
        assert deviation_bound(np.full(6, 1.7), StabilityClass.MARGINALLY_STABLE) == 0.0

    def test_unstable_rejected(self):
        with pytest.raises(ValueError):
            deviation_bound([1.0, 2.0], StabilityClass.UNSTABLE)


class TestObservationDeviation:
    def test_noiseless_one_step(self, tm):
        x0 = np.random.default_rng(3).uniform(-10, 10, 10)
        traj = simulate(tm, x0, 4, NoiseModel.noiseless(), seed=0)
        y0 = traj.observations[0]
        for i in range(10):
            expected = (tm.matrix @ y0)[i] - y0[i]
            assert observation_deviation(traj, i, 0, 1) == pytest.approx(expected, abs=1e-12)

    def test_consensus_excitation_reads_weight(self, tm):
        x0 = np.full(10, 3.0)
        e, j = 7.0, 1
        traj = simulate(tm, x0, 2, NoiseModel.noiseless(), ExcitationPlan(j, 0, e), seed=0)
        for i in range(10):
            assert observation_deviation(traj, i, 0, 1) == pytest.approx(e * tm.matrix[i, j], abs=1e-12)

    def test_noise_variance_matches_closed_form(self):
        # deviation minus the propagated-snapshot drift is the h-step noise
        tm_small = laplacian_weights(generate_random_digraph(6, 0.4, 11), 1.0)
        i, h = 0, 3
        noise = NoiseModel(1.0, 1.0)
        target = deviation_noise_std(tm_small, i, h, noise) ** 2
        gh = np.linalg.matrix_power(tm_small.matrix, h)
        x0 = np.full(6, 2.0)
        samples = np.empty(10**5)
        for s in range(10**5):
            traj = simulate(tm_small, x0, h, noise, seed=s)
            y0 = traj.observations[0]
            samples[s] = observation_deviation(traj, i, 0, h) - ((gh @ y0)[i] - y0[i])
        assert abs(samples.var(ddof=1) - target) / target <= 0.05

    def test_index_errors(self, tm):
        traj = simulate(tm, np.zeros(10), 3, NoiseModel.noiseless(), seed=0)
        with pytest.raises(IndexError):
            observation_deviation(traj, 0, 2, 2)
        with pytest.raises(IndexError):
            observation_deviation(traj, 11, 0, 1)
        with pytest.raises(ValueError):
            observation_deviation(traj, 0, 0, 0)


class TestTypesAndExport:
    def test_plan_validation(self):
        with pytest.raises(ValueError):
            ExcitationPlan(0, -1, 1.0)
        with pytest.raises(ValueError):
            ExcitationPlan(0, 0, 1.0, repetitions=0)

    def test_noise_validation(self):
        with pytest.raises(ValueError):
            NoiseModel(-0.1, 1.0)

    def test_trajectory_shape_mismatch(self):
        with pytest.raises(ValueError):
            Trajectory(np.zeros((3, 2)), np.zeros((4, 2)))

    def test_trajectory_immutable(self, tm):
        traj = simulate(tm, np.zeros(10), 2, NoiseModel(1, 1), seed=0)
        with pytest.raises(ValueError):
            traj.states[0, 0] = 1.0

    def test_csv_export(self, tm, tmp_path):
        traj = simulate(tm, np.ones(10), 3, NoiseModel(1, 1), ExcitationPlan(2, 1, 4.5), seed=6)
        path = tmp_path / "traj.csv"
        write_trajectory_csv(path, traj)
        lines = path.read_text().strip().splitlines()
        assert lines[0] == "t,node,state,observation"
        assert lines[-1] == "# excite node=2 t=1 e=4.5"
        body = [row for row in csv.reader(lines[1:]) if not row[0].startswith("#")]
        assert len(body) == 4 * 10
        t, node, state, obs = body[17]
        assert (int(t), int(node)) == (1, 7)
        assert float(state) == traj.states[1, 7]
        assert float(obs) == traj.observations[1, 7]
