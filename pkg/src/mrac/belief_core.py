"""Factored Bernoulli occupancy beliefs.

A belief stores one occupancy marginal per grid cell; cells never carry
cross terms, so every operation touches only the cells an observation names.

Two numerically different but mathematically identical update paths exist:

* :func:`bayes_update` / :func:`bayes_downdate` work on probabilities, one
  observation at a time (the textbook ratio form).
* :class:`Evidence` keeps per-cell detection counts on top of a prior and
  produces the posterior in log-odds.  The result depends only on the counts,
  never on the order observations arrived in, which is what lets two agents
  reproduce each other's beliefs bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import DegenerateEvidenceError, InconsistentLedgerError, InputError

CLAMP = 1e-12


@dataclass(frozen=True)
class ObsModel:
    """Binary detector: ``P(z=1 | occupied)`` and ``P(z=1 | free)``."""

    p_detect: float = 0.9
    p_false_alarm: float = 0.2
    require_informative: bool = True

    def __post_init__(self):
        for name in ("p_detect", "p_false_alarm"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise InputError(f"{name}={v} outside [0, 1]")
        if self.require_informative and self.p_detect < self.p_false_alarm:
            raise InputError("p_detect < p_false_alarm; pass require_informative=False to allow it")

    def likelihood(self, z: int, occupied: int) -> float:
        p1 = self.p_detect if occupied else self.p_false_alarm
        return p1 if z else 1.0 - p1

    def prob_one(self, q):
        """Predictive ``P(z=1)`` for a cell with occupancy marginal ``q``."""
        return self.p_detect * q + self.p_false_alarm * (1.0 - q)

    @property
    def log_ratios(self) -> tuple[float, float]:
        """Log-odds increments for a ``z=1`` and a ``z=0`` reading."""
        with np.errstate(divide="ignore"):
            one = np.log(self.p_detect) - np.log(self.p_false_alarm)
            zero = np.log1p(-self.p_detect) - np.log1p(-self.p_false_alarm)
        return float(one), float(zero)


@dataclass(frozen=True)
class Observation:
    time: int
    robot: int
    cell: int
    value: int

    def __post_init__(self):
        if self.time < 1:
            raise InputError(f"observation time {self.time} < 1")
        if self.value not in (0, 1):
            raise InputError(f"observation value {self.value!r} is not binary")
        if self.cell < 0:
            raise InputError(f"negative cell id {self.cell}")


def _readonly(a) -> np.ndarray:
    arr = np.array(a, dtype=np.float64)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class CellBelief:
    """Per-cell occupancy marginals, indexed ``0..X-1`` (row-major cell ids)."""

    probs: np.ndarray

    def __post_init__(self):
        arr = _readonly(self.probs)
        if arr.ndim != 1:
            raise InputError("belief must be one-dimensional")
        if np.any(~np.isfinite(arr)) or np.any(arr < 0.0) or np.any(arr > 1.0):
            raise InputError("belief entries must lie in [0, 1]")
        object.__setattr__(self, "probs", arr)

    @classmethod
    def uniform(cls, n_cells: int, p: float = 0.5) -> "CellBelief":
        return cls(np.full(n_cells, p))

    def __len__(self) -> int:
        return self.probs.shape[0]

    def __getitem__(self, cell: int) -> float:
        return float(self.probs[cell])

    def __eq__(self, other) -> bool:
        return isinstance(other, CellBelief) and np.array_equal(self.probs, other.probs)

    __hash__ = None

    def replace(self, cell: int, p: float) -> "CellBelief":
        arr = self.probs.copy()
        arr[cell] = p
        return CellBelief(arr)

    def allclose(self, other: "CellBelief", atol: float = 1e-12) -> bool:
        return len(self) == len(other) and bool(np.max(np.abs(self.probs - other.probs), initial=0.0) <= atol)


def _check_cell(b: CellBelief, o: Observation):
    if not 0 <= o.cell < len(b):
        raise InputError(f"cell {o.cell} outside belief of {len(b)} cells")


def _clamp(p: float) -> float:
    return min(max(p, CLAMP), 1.0 - CLAMP)


def bayes_update(b: CellBelief, o: Observation, m: ObsModel) -> CellBelief:
    _check_cell(b, o)
    q = b[o.cell]
    num = m.likelihood(o.value, 1) * q
    den = num + m.likelihood(o.value, 0) * (1.0 - q)
    if den <= 0.0:
        raise DegenerateEvidenceError(f"z={o.value} on cell {o.cell} has zero probability")
    post = num / den
    # a deterministic prior absorbs every reading; only interior marginals are clamped
    return b.replace(o.cell, _clamp(post) if 0.0 < q < 1.0 else post)


def bayes_downdate(b: CellBelief, o: Observation, m: ObsModel) -> CellBelief:
    """Remove a previously incorporated observation (odds divided by the likelihood ratio)."""
    _check_cell(b, o)
    post = b[o.cell]
    l1 = m.likelihood(o.value, 1)
    l0 = m.likelihood(o.value, 0)
    num = post * l0
    den = num + (1.0 - post) * l1
    if den <= 0.0 or not math.isfinite(num / den):
        raise InconsistentLedgerError(f"cannot remove z={o.value} from cell {o.cell} with marginal {post}")
    prior = num / den
    if not 0.0 <= prior <= 1.0:
        raise InconsistentLedgerError(f"down-date of cell {o.cell} left [0, 1]: {prior}")
    if l1 * prior + l0 * (1.0 - prior) <= 0.0:
        raise InconsistentLedgerError(f"z={o.value} on cell {o.cell} is impossible under the recovered prior")
    return b.replace(o.cell, prior)


def entropy_terms(p):
    """``p ln p + (1-p) ln(1-p)`` elementwise, with ``0 ln 0 = 0``."""
    p = np.asarray(p, dtype=np.float64)
    q = 1.0 - p
    with np.errstate(divide="ignore", invalid="ignore"):
        a = np.where(p > 0.0, p * np.log(np.where(p > 0.0, p, 1.0)), 0.0)
        c = np.where(q > 0.0, q * np.log(np.where(q > 0.0, q, 1.0)), 0.0)
    return a + c


def entropy_reward(b: CellBelief) -> float:
    """Minus the total Shannon entropy (nats) of the factored belief."""
    return float(np.sum(entropy_terms(b.probs)))


def observation_likelihood(b: CellBelief, seq: Sequence[Observation], m: ObsModel) -> float:
    """Exact ``P(seq | b)``; repeated cells are handled by updating between factors."""
    like = 1.0
    cur = b
    for o in seq:
        _check_cell(cur, o)
        p1 = m.prob_one(cur[o.cell])
        f = p1 if o.value else 1.0 - p1
        if f <= 0.0:
            return 0.0
        like *= f
        cur = bayes_update(cur, o, m)
    return like


def belief_from_history(prior: CellBelief, observations: Iterable[Observation], m: ObsModel) -> CellBelief:
    b = prior
    for o in observations:
        b = bayes_update(b, o, m)
    return b


def count_observations(observations: Iterable[Observation], n_cells: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-cell tallies of ``z=1`` and ``z=0`` readings."""
    ones = np.zeros(n_cells, dtype=np.int64)
    zeros = np.zeros(n_cells, dtype=np.int64)
    for o in observations:
        if not 0 <= o.cell < n_cells:
            raise InputError(f"cell {o.cell} outside belief of {n_cells} cells")
        if o.value:
            ones[o.cell] += 1
        else:
            zeros[o.cell] += 1
    return ones, zeros


def posterior_from_counts(prior_probs, ones, zeros, m: ObsModel) -> np.ndarray:
    """Vectorised log-odds posterior; broadcasts over leading axes of the counts."""
    inc1, inc0 = m.log_ratios
    prior_probs = np.asarray(prior_probs, dtype=np.float64)
    ones = np.asarray(ones)
    zeros = np.asarray(zeros)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        logit = np.log(prior_probs) - np.log1p(-prior_probs)
        logit = logit + np.where(ones > 0, ones * inc1, 0.0) + np.where(zeros > 0, zeros * inc0, 0.0)
        if np.any(np.isnan(logit)):
            raise DegenerateEvidenceError("observation counts contradict a deterministic prior")
        post = np.where(logit >= 0, 1.0 / (1.0 + np.exp(-logit)), np.exp(logit) / (1.0 + np.exp(logit)))
    # untouched cells and deterministic priors keep the prior verbatim
    touched = ((ones + zeros) > 0) & (prior_probs > 0.0) & (prior_probs < 1.0)
    return np.where(touched, np.clip(post, CLAMP, 1.0 - CLAMP), prior_probs)


@dataclass(frozen=True, eq=False)
class Evidence:
    """A prior plus per-cell reading counts; the order-free belief representation."""

    prior: CellBelief
    ones: np.ndarray = field(default=None)
    zeros: np.ndarray = field(default=None)

    def __post_init__(self):
        n = len(self.prior)
        for name in ("ones", "zeros"):
            v = getattr(self, name)
            arr = np.zeros(n, dtype=np.int64) if v is None else np.array(v, dtype=np.int64)
            if arr.shape != (n,):
                raise InputError(f"{name} counts must have shape ({n},)")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @classmethod
    def of(cls, prior: CellBelief, observations: Iterable[Observation] = ()) -> "Evidence":
        ones, zeros = count_observations(observations, len(prior))
        return cls(prior, ones, zeros)

    def __len__(self) -> int:
        return len(self.prior)

    def plus(self, observations: Iterable[Observation]) -> "Evidence":
        ones, zeros = count_observations(observations, len(self.prior))
        return Evidence(self.prior, self.ones + ones, self.zeros + zeros)

    def probs(self, m: ObsModel, cells=None) -> np.ndarray:
        if cells is None:
            return posterior_from_counts(self.prior.probs, self.ones, self.zeros, m)
        cells = np.asarray(cells, dtype=np.int64)
        return posterior_from_counts(self.prior.probs[cells], self.ones[cells], self.zeros[cells], m)

    def belief(self, m: ObsModel) -> CellBelief:
        return CellBelief(self.probs(m))


def as_evidence(b) -> Evidence:
    if isinstance(b, Evidence):
        return b
    if isinstance(b, CellBelief):
        return Evidence(b)
    raise InputError(f"expected CellBelief or Evidence, got {type(b).__name__}")
