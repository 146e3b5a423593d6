import math

import numpy as np
import pytest

from mrac.belief_core import CellBelief, ObsModel, Observation, observation_likelihood
from mrac.errors import InputError
from mrac.estimators import (
    GaussianBelief,
    GaussianReadings,
    GridBeliefSampler,
    ObsSampleSet,
    estimate_cumulative_likelihood,
    estimate_seq_likelihood,
    gaussian_seq_likelihood,
    hoeffding_half_width,
    hoeffding_interval,
    sample_states,
)
from mrac.planning import joint_actions

ACTS = joint_actions(1, 2)


class TestSampling:
    def test_deterministic_belief(self, rng):
        s = sample_states(GridBeliefSampler(np.array([1.0, 0.0])), [0, 1, 0], 50, rng)
        assert np.all(s.samples == [1, 0, 1])

    def test_marginal(self):
        s = sample_states(GridBeliefSampler(np.array([0.5])), [0], 10_000, np.random.default_rng(1))
        assert abs(s.samples.mean() - 0.5) < 0.02

    def test_independent_cells(self):
        s = sample_states(GridBeliefSampler(np.array([0.5, 0.5])), [0, 1], 10_000, np.random.default_rng(2))
        assert abs(np.corrcoef(s.samples.T)[0, 1]) < 0.05

    def test_zero_samples(self, rng):
        with pytest.raises(InputError):
            sample_states(GridBeliefSampler(np.array([0.5])), [0], 0, rng)


class TestSeqLikelihood:
    def test_empty(self, rng):
        s = sample_states(GridBeliefSampler(np.array([0.3])), [0], 10, rng)
        assert estimate_seq_likelihood(s, [], ObsModel()) == 1.0

    def test_deterministic_state(self, rng):
        s = sample_states(GridBeliefSampler(np.array([1.0, 0.0])), [0, 1], 5, rng)
        assert estimate_seq_likelihood(s, [1, 0], ObsModel()) == pytest.approx(0.9 * 0.8, abs=1e-15)

    def test_converges_on_grid(self):
        probs = np.array([0.3, 0.7])
        cells = [0, 1, 0]
        seq = [1, 0, 1]
        exact = observation_likelihood(
            CellBelief(probs), [Observation(t + 1, 0, c, z) for t, (c, z) in enumerate(zip(cells, seq))], ObsModel()
        )
        s = sample_states(GridBeliefSampler(probs), cells, 100_000, np.random.default_rng(3))
        assert abs(estimate_seq_likelihood(s, seq, ObsModel()) - exact) < 0.01

    def test_unbiased(self):
        probs = np.array([0.4])
        exact = observation_likelihood(CellBelief(probs), [Observation(1, 0, 0, 1)], ObsModel())
        ests = [
            estimate_seq_likelihood(sample_states(GridBeliefSampler(probs), [0], 20, np.random.default_rng(s)), [1], ObsModel())
            for s in range(1000)
        ]
        se = np.std(ests) / math.sqrt(len(ests))
        assert abs(np.mean(ests) - exact) < 3 * se

    def test_gaussian_toy(self):
        belief, readings = GaussianBelief(0.5, 1.0), GaussianReadings(0.7)
        seq = [0.2, 0.9]
        s = sample_states(belief, [1, 2], 100_000, np.random.default_rng(4))
        assert abs(estimate_seq_likelihood(s, seq, readings) - gaussian_seq_likelihood(belief, readings, seq)) < 0.01

    def test_gaussian_oracle_single_reading(self):
        # one reading: N(mean, std^2 + noise^2)
        var = 1.0 + 0.49
        want = math.exp(-0.5 * 0.3**2 / var) / math.sqrt(2 * math.pi * var)
        assert gaussian_seq_likelihood(GaussianBelief(0.5, 1.0), GaussianReadings(0.7), [0.8]) == pytest.approx(want)


class TestCumulative:
    def test_all_favor_one(self):
        obs = ObsSampleSet(np.zeros((10, 2, 1)))
        t = estimate_cumulative_likelihood(obs, lambda z: np.full(len(z), 3), ACTS)
        assert t[ACTS[3]] == 1.0 and t.values.sum() == 1.0

    def test_ratio(self):
        obs = ObsSampleSet(np.arange(200).reshape(200, 1, 1))
        t = estimate_cumulative_likelihood(obs, lambda z: np.where(z[:, 0] < 50, 0, 1), ACTS)
        assert t[ACTS[0]] == 0.25 and t[ACTS[1]] == 0.75


class TestHoeffding:
    def test_half_width(self):
        # sqrt(ln 40 / 400) = 0.0960323; the rounded reference figure 0.09609 agrees to 1e-4
        assert hoeffding_half_width(200, 0.05) == pytest.approx(math.sqrt(math.log(40.0) / 400.0), abs=1e-15)
        assert hoeffding_half_width(200, 0.05) == pytest.approx(0.09609, abs=1e-4)

    def test_shrinks(self):
        assert hoeffding_half_width(10**8, 0.05) < 2e-4

    def test_clipped(self):
        n = math.ceil(math.log(2 / 0.05) / (2 * 0.05**2))
        lo, hi = hoeffding_interval(0.98, n, 0.05)
        assert hi == 1.0 and lo == pytest.approx(0.98 - hoeffding_half_width(n, 0.05))

    @pytest.mark.parametrize("delta", [0.0, 1.0, -0.5])
    def test_invalid_delta(self, delta):
        with pytest.raises(InputError):
            hoeffding_half_width(10, delta)
