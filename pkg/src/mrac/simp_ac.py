"""Bound-based verification from a growing subset of realizations.

Summing likelihoods over a subset gives a lower bound on each action's
cumulative likelihood; since the full sums add up to one, the lower bounds of
the other actions give an upper bound.  Subsets grow in canonical realization
order, so both agents examine exactly the same realizations without talking.

The verifier stops growing as soon as the bounds settle the epsilon-MRAC
predicate for the step-1 action.  Comparisons close to a threshold (within
``MARGIN``) are never settled from bounds; those fall through to the full
space, where the exact cumulative likelihood decides, exactly as the relaxed
verifier would.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from . import _kernels
from .errors import InputError
from .partition import SpacePartition
from .planning import JointAction, ObsSeqSpace, Problem, check_cap
from .relaxed_ac import check_epsilon
from .verify_ac import HistoryLedger, step1

MARGIN = 1e-12
DEFAULT_M_BATCH = 4
DEFAULT_INITIAL_FRACTION = 0.25


@dataclass(frozen=True, eq=False)
class BoundsTable:
    """Lower bounds per action plus the realizations they came from."""

    actions: tuple[JointAction, ...]
    lb: np.ndarray
    evaluated: frozenset = frozenset()
    n_evaluated: int | None = None

    def __post_init__(self):
        lb = np.clip(np.array(self.lb, dtype=np.float64), 0.0, 1.0)
        if lb.shape != (len(self.actions),):
            raise InputError("one lower bound per action required")
        lb.setflags(write=False)
        object.__setattr__(self, "lb", lb)
        if self.n_evaluated is None:
            object.__setattr__(self, "n_evaluated", len(self.evaluated))

    @property
    def ub(self) -> np.ndarray:
        ub = 1.0 - (self.lb.sum() - self.lb)
        return np.clip(np.maximum(ub, self.lb), 0.0, 1.0)

    @property
    def per_action(self) -> dict[JointAction, tuple[float, float]]:
        ub = self.ub
        return {a: (float(l), float(u)) for a, l, u in zip(self.actions, self.lb, ub)}

    def bounds(self, a: JointAction) -> tuple[float, float]:
        i = self.actions.index(a)
        return float(self.lb[i]), float(self.ub[i])

    def separated(self, margin: float = 0.0) -> JointAction | None:
        """The action whose lower bound beats every other upper bound, if any."""
        pos = _separated(self.lb, margin)
        return None if pos is None else self.actions[pos]


def _separated(lb: np.ndarray, margin: float) -> int | None:
    ub = 1.0 - (lb.sum() - lb)
    i = int(np.argmax(lb))
    others = np.delete(ub, i)
    if others.size == 0 or lb[i] > others.max() + margin:
        return i
    return None


def bounds_from_subset(b_common, full: ObsSeqSpace, subset: Iterable, problem: Problem) -> BoundsTable:
    subset = frozenset(tuple(int(v) for v in z) for z in subset)
    for z in subset:
        if len(z) != len(full) or any(v not in (0, 1) for v in z):
            raise InputError(f"{z} is not a realization of the space")
    lb = np.zeros(len(problem.actions))
    if subset:
        part = SpacePartition(b_common, full, problem)
        fav, like = part.evaluate(sorted(subset))
        lb = np.bincount(fav, weights=like, minlength=len(problem.actions))
    return BoundsTable(problem.actions, lb, subset)


def prune(bounds: BoundsTable) -> set[JointAction]:
    """Actions no other action's lower bound strictly dominates."""
    ub = bounds.ub
    keep = set()
    for i, a in enumerate(bounds.actions):
        rivals = np.delete(bounds.lb, i)
        if not (rivals.size and rivals.max() > ub[i]):
            keep.add(a)
    return keep


def adaptive_bounds_detail(
    b_common, full: ObsSeqSpace, initial_subset: Iterable, m_batch: int, problem: Problem
) -> tuple[JointAction, BoundsTable]:
    """Grow the subset by ``m_batch`` canonical realizations until one action separates.

    With an exact tie at the full space nothing ever separates; the loop then
    returns the lowest-index action among the tied leaders.
    """
    if m_batch < 1:
        raise InputError("m_batch must be at least 1")
    check_cap(full, problem.slot_cap)
    subset = set(tuple(int(v) for v in z) for z in initial_subset)
    nxt = 0
    while True:
        table = bounds_from_subset(b_common, full, subset, problem)
        a = table.separated(MARGIN)
        if a is not None:
            return a, table
        if len(subset) == full.size:
            pos = int(_kernels.argmax_lowest(table.lb[None, :])[0])
            return problem.actions[pos], table
        added = 0
        while added < m_batch and nxt < full.size:
            z = full.realization(nxt)
            nxt += 1
            if z not in subset:
                subset.add(z)
                added += 1


def adaptive_bounds(b_common, full: ObsSeqSpace, initial_subset: Iterable, m_batch: int, problem: Problem) -> JointAction:
    return adaptive_bounds_detail(b_common, full, initial_subset, m_batch, problem)[0]


@dataclass
class StepBounds:
    """Outcome of bounding one step for a fixed step-1 action."""

    passes: bool
    lb: float
    ub: float
    separated: bool
    others_below: bool
    evaluated: int
    exact: bool


class _Walker:
    """Canonical-order prefix walk over realizations (or count classes past the slot cap)."""

    def __init__(self, part: SpacePartition, slot_cap: int):
        self.part = part
        self.n_actions = len(part.problem.actions)
        self.by_class = len(part.space) > slot_cap
        if self.by_class:
            self._fav, self._mass = part.classes()
            self._mult = part.class_multiplicity()
            self.n_items = part.n_classes
        else:
            self.n_items = part.size
        self.done = 0
        self.covered = 0
        self.lb = np.zeros(self.n_actions)

    def grow(self, upto: int):
        upto = min(upto, self.n_items)
        if upto <= self.done:
            return
        if self.by_class:
            sl = slice(self.done, upto)
            fav, mass = self._fav[sl], self._mass[sl]
            self.covered += int(round(self._mult[sl].sum()))
        else:
            fav, mass = self.part.realizations(self.done, upto)
            self.covered += upto - self.done
        self.lb = self.lb + np.bincount(fav, weights=mass, minlength=self.n_actions)
        self.done = upto

    @property
    def complete(self) -> bool:
        return self.done >= self.n_items


def bound_step(
    part: SpacePartition, a_bar: int, epsilon: float, m_batch: int, initial_fraction: float, slot_cap: int
) -> StepBounds:
    """Settle "``a_bar`` is rank-1 or its cumulative likelihood exceeds ``1-epsilon``" from bounds."""
    w = _Walker(part, slot_cap)
    w.grow(max(1, math.ceil(initial_fraction * w.n_items)))
    thr = 1.0 - epsilon
    while True:
        lb = w.lb
        ub = np.clip(np.maximum(1.0 - (lb.sum() - lb), lb), 0.0, 1.0)
        if w.complete:
            cl = part.cumulative()
            best = int(_kernels.argmax_lowest(cl[None, :])[0])
            ok = best == a_bar or cl[a_bar] > thr
            others = np.delete(cl, a_bar)
            return StepBounds(ok, float(cl[a_bar]), float(cl[a_bar]), best == a_bar,
                              bool(np.all(others < thr)), w.covered, True)
        sep = _separated(lb, MARGIN)
        others_ub = np.delete(ub, a_bar)
        below = bool(np.all(others_ub < thr))
        if sep == a_bar:
            return StepBounds(True, float(lb[a_bar]), float(ub[a_bar]), True, below, w.covered, False)
        if lb[a_bar] > thr + MARGIN:
            return StepBounds(True, float(lb[a_bar]), float(ub[a_bar]), False, below, w.covered, False)
        dominated = bool(np.max(np.delete(lb, a_bar), initial=0.0) > ub[a_bar] + MARGIN)
        if dominated and ub[a_bar] < thr - MARGIN:
            return StepBounds(False, float(lb[a_bar]), float(ub[a_bar]), False, below, w.covered, False)
        w.grow(w.done + m_batch)


@dataclass(frozen=True, eq=False)
class SimpOutcome:
    action: JointAction
    declared: bool
    step2: StepBounds = field(repr=False)
    step3: StepBounds | None = field(default=None, repr=False)

    @property
    def trigger_comm(self) -> bool:
        return not self.declared

    @property
    def bracket(self) -> tuple[float, float]:
        """Bounds on the agreement probability (step-2 bounds of the step-1 action)."""
        return self.step2.lb, self.step2.ub

    @property
    def deterministic(self) -> bool:
        """Separation in both steps with every rival's upper bound under the threshold."""
        s3 = self.step3
        return (
            self.declared
            and s3 is not None
            and self.step2.separated
            and s3.separated
            and self.step2.others_below
            and s3.others_below
        )

    @property
    def evaluated(self) -> int:
        return self.step2.evaluated + (self.step3.evaluated if self.step3 is not None else 0)


def r_verify_simp(
    ledger: HistoryLedger,
    prior,
    problem: Problem,
    epsilon: float,
    m_batch: int = DEFAULT_M_BATCH,
    initial_fraction: float = DEFAULT_INITIAL_FRACTION,
) -> SimpOutcome:
    check_epsilon(epsilon)
    if m_batch < 1:
        raise InputError("m_batch must be at least 1")
    if not 0.0 < initial_fraction <= 1.0:
        raise InputError("initial_fraction must lie in (0, 1]")
    common = ledger.common_evidence(prior)
    a_bar = step1(ledger, prior, problem)
    pos = problem.position(a_bar)
    s2 = bound_step(SpacePartition(common, ledger.peer_missing_slots, problem), pos, epsilon, m_batch,
                    initial_fraction, problem.slot_cap)
    if not s2.passes:
        return SimpOutcome(a_bar, False, s2)
    s3 = bound_step(SpacePartition(common, ledger.own_slots_as_seen_by_peer, problem), pos, epsilon, m_batch,
                    initial_fraction, problem.slot_cap)
    return SimpOutcome(a_bar, s3.passes, s2, s3)
