"""Sampled stand-ins for exact marginalization over hidden states.

State samples at the missing-observation times replace the sum over states in
a sequence likelihood; observation samples drawn through those states replace
the sum over realizations in a cumulative likelihood.  Every sampler takes an
explicit ``numpy.random.Generator``.

Two worlds are supported: the static occupancy grid (where exact answers exist
for checking) and a scalar Gaussian toy with Gaussian readings.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Protocol, Sequence

import numpy as np

from .belief_core import CellBelief, Evidence, ObsModel
from .errors import InputError
from .planning import JointAction
from .relaxed_ac import CumulativeLikelihoodTable


class BeliefSampler(Protocol):
    def sample(self, times: Sequence, n: int, rng: np.random.Generator) -> np.ndarray:
        """``(n, len(times))`` joint state samples."""


class ReadingModel(Protocol):
    def likelihood(self, z: np.ndarray, x: np.ndarray) -> np.ndarray: ...

    def sample(self, x: np.ndarray, rng: np.random.Generator) -> np.ndarray: ...


@dataclass(frozen=True)
class GridBeliefSampler:
    """Occupancy of the cell read at each slot; repeated cells share one draw.

    ``times`` are the cell ids of the slots, since the grid state is static and
    only the observed cell matters.
    """

    probs: np.ndarray

    @classmethod
    def of(cls, b, m: ObsModel | None = None) -> "GridBeliefSampler":
        if isinstance(b, Evidence):
            return cls(b.probs(m or ObsModel()))
        return cls(np.asarray(b.probs if isinstance(b, CellBelief) else b, dtype=np.float64))

    def sample(self, times, n, rng):
        cells = np.asarray(times, dtype=np.int64)
        uniq, inv = np.unique(cells, return_inverse=True)
        occ = rng.random((n, uniq.size)) < self.probs[uniq]
        return occ[:, inv].astype(np.int64)


@dataclass(frozen=True)
class BinaryReadings:
    """The grid detector viewed as a reading model."""

    model: ObsModel

    def likelihood(self, z, x):
        p1 = np.where(np.asarray(x) > 0, self.model.p_detect, self.model.p_false_alarm)
        return np.where(np.asarray(z) > 0, p1, 1.0 - p1)

    def sample(self, x, rng):
        p1 = np.where(np.asarray(x) > 0, self.model.p_detect, self.model.p_false_alarm)
        return (rng.random(p1.shape) < p1).astype(np.int64)


@dataclass(frozen=True)
class GaussianBelief:
    """Static scalar state ``x ~ N(mean, std**2)``; the same ``x`` at every time."""

    mean: float = 0.0
    std: float = 1.0

    def sample(self, times, n, rng):
        x = rng.normal(self.mean, self.std, size=(n, 1))
        return np.repeat(x, len(times), axis=1)


@dataclass(frozen=True)
class GaussianReadings:
    """``z = x + v`` with ``v ~ N(0, noise**2)``."""

    noise: float = 1.0

    def likelihood(self, z, x):
        d = (np.asarray(z, dtype=np.float64) - x) / self.noise
        return np.exp(-0.5 * d * d) / (self.noise * math.sqrt(2.0 * math.pi))

    def sample(self, x, rng):
        return x + rng.normal(0.0, self.noise, size=np.shape(x))


def gaussian_seq_likelihood(belief: GaussianBelief, readings: GaussianReadings, seq) -> float:
    """Exact joint density of ``seq`` with the shared state integrated out."""
    z = np.asarray(seq, dtype=np.float64)
    c = z.size
    if c == 0:
        return 1.0
    cov = belief.std**2 * np.ones((c, c)) + readings.noise**2 * np.eye(c)
    d = z - belief.mean
    sign, logdet = np.linalg.slogdet(cov)
    quad = d @ np.linalg.solve(cov, d)
    return float(np.exp(-0.5 * (quad + logdet + c * math.log(2.0 * math.pi))))


@dataclass(frozen=True, eq=False)
class StateSampleSet:
    samples: np.ndarray
    times: tuple = ()
    source: str = ""

    def __post_init__(self):
        arr = np.asarray(self.samples)
        if arr.ndim != 2 or arr.shape[0] < 1:
            raise InputError("need at least one state sample")
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)

    @property
    def n(self) -> int:
        return self.samples.shape[0]


@dataclass(frozen=True, eq=False)
class ObsSampleSet:
    """``per_state[s, m]`` is the ``m``-th reading sequence drawn through state sample ``s``."""

    per_state: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.per_state)
        if arr.ndim != 3 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise InputError("need at least one observation sample per state sample")
        arr.setflags(write=False)
        object.__setattr__(self, "per_state", arr)

    @property
    def n(self) -> int:
        return self.per_state.shape[0] * self.per_state.shape[1]

    def flat(self) -> np.ndarray:
        return self.per_state.reshape(self.n, self.per_state.shape[2])


def sample_states(belief: BeliefSampler, times: Sequence, n: int, rng: np.random.Generator) -> StateSampleSet:
    if n < 1:
        raise InputError("n must be at least 1")
    return StateSampleSet(belief.sample(times, n, rng), tuple(times), type(belief).__name__)


def sample_observations(states: StateSampleSet, readings: ReadingModel, n_z: int, rng: np.random.Generator) -> ObsSampleSet:
    if n_z < 1:
        raise InputError("n_z must be at least 1")
    x = np.repeat(states.samples[:, None, :], n_z, axis=1)
    return ObsSampleSet(readings.sample(x, rng))


def estimate_seq_likelihood(samples: StateSampleSet, seq, readings: ReadingModel | ObsModel) -> float:
    """Mean over state samples of the product of per-time reading likelihoods."""
    if isinstance(readings, ObsModel):
        readings = BinaryReadings(readings)
    z = np.asarray(seq)
    if z.size == 0:
        return 1.0
    if z.shape[-1] != samples.samples.shape[1]:
        raise InputError("sequence length does not match the sampled times")
    return float(np.mean(np.prod(readings.likelihood(z[None, :], samples.samples), axis=1)))


def estimate_cumulative_likelihood(
    obs_samples: ObsSampleSet, favored: Callable[[np.ndarray], np.ndarray], actions: Sequence[JointAction]
) -> CumulativeLikelihoodTable:
    """Share of sampled reading sequences favoring each action.

    ``favored`` maps a batch of sequences (one per row) to positions in ``actions``.
    """
    actions = tuple(actions)
    pos = np.asarray(favored(obs_samples.flat()), dtype=np.int64)
    counts = np.bincount(pos, minlength=len(actions))
    return CumulativeLikelihoodTable(actions, counts / obs_samples.n, evaluated=obs_samples.n)


def hoeffding_half_width(n: int, delta: float) -> float:
    if n < 1:
        raise InputError("n must be at least 1")
    if not 0.0 < delta < 1.0:
        raise InputError(f"delta={delta} outside (0, 1)")
    return math.sqrt(math.log(2.0 / delta) / (2.0 * n))


def hoeffding_interval(estimate: float, n: int, delta: float) -> tuple[float, float]:
    h = hoeffding_half_width(n, delta)
    return max(0.0, estimate - h), min(1.0, estimate + h)


def grid_favored(partition) -> Callable[[np.ndarray], np.ndarray]:
    """Favored-action lookup for sampled realizations of a grid slot space."""

    def favored(z):
        return partition.evaluate(z)[0]

    return favored


def estimate_grid_cumulative(partition, n_x: int, n_z: int, rng: np.random.Generator) -> CumulativeLikelihoodTable:
    """Sampled counterpart of the exact cumulative likelihood over a grid slot space."""
    sampler = GridBeliefSampler(partition.common.probs(partition.problem.model))
    states = sample_states(sampler, partition.space.cells(), n_x, rng)
    obs = sample_observations(states, BinaryReadings(partition.problem.model), n_z, rng)
    return estimate_cumulative_likelihood(obs, grid_favored(partition), partition.problem.actions)
