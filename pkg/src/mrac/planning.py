"""Joint actions, the open-loop entropy objective, and observation-space partitions.

The objective of a joint action is the expected sum, over the next ``L``
steps, of the (minus) entropy of the belief after each step's readings.  With
binary readings the expectation is an exact ``2**(robots*L)`` term sum, so no
sampling noise ever reaches the consistency logic.

Argmax ties (within ``TIE_TOL``) resolve to the smallest canonical action
index on every agent.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterable, Iterator, Sequence

import numpy as np

from . import _kernels
from .belief_core import (
    CellBelief,
    Evidence,
    ObsModel,
    Observation,
    as_evidence,
    bayes_update,
    entropy_reward,
    posterior_from_counts,
)
from .errors import EnumerationLimitError, InputError
from .scenario_sar import Grid, MotionPrimitive, Pose, move

TIE_TOL = _kernels.TIE_TOL
DEFAULT_SLOT_CAP = 12
N_PRIMITIVES = len(MotionPrimitive)


@dataclass(frozen=True, order=True)
class JointAction:
    """One primitive sequence of length ``L`` per robot."""

    per_robot: tuple[tuple[MotionPrimitive, ...], ...]

    def __post_init__(self):
        seqs = tuple(tuple(MotionPrimitive(p) for p in seq) for seq in self.per_robot)
        if not seqs:
            raise InputError("joint action needs at least one robot")
        lengths = {len(s) for s in seqs}
        if len(lengths) != 1 or 0 in lengths:
            raise InputError("every robot needs a primitive sequence of the same length >= 1")
        object.__setattr__(self, "per_robot", seqs)

    @classmethod
    def parse(cls, text: str) -> "JointAction":
        """``"N|E"`` for L=1, ``"NS|EE"`` for L=2."""
        return cls(tuple(tuple(MotionPrimitive[ch] for ch in part) for part in text.split("|")))

    @property
    def horizon(self) -> int:
        return len(self.per_robot[0])

    @property
    def n_robots(self) -> int:
        return len(self.per_robot)

    @property
    def index(self) -> int:
        """Ordinal in the canonical enumeration (step-major, robot 0 before robot 1)."""
        idx = 0
        for step in range(self.horizon):
            for seq in self.per_robot:
                idx = idx * N_PRIMITIVES + int(seq[step])
        return idx

    def component(self, robot: int) -> tuple[MotionPrimitive, ...]:
        return self.per_robot[robot]

    def __str__(self) -> str:
        return "|".join("".join(p.name for p in seq) for seq in self.per_robot)


def joint_actions(horizon: int = 1, n_robots: int = 2) -> tuple[JointAction, ...]:
    """All ``(4**n_robots)**horizon`` joint actions in canonical order."""
    if horizon < 1 or n_robots < 1:
        raise InputError("horizon and robot count must be positive")
    steps = list(itertools.product(MotionPrimitive, repeat=n_robots))
    out = []
    for seq in itertools.product(steps, repeat=horizon):
        out.append(JointAction(tuple(tuple(step[r] for step in seq) for r in range(n_robots))))
    return tuple(out)


@dataclass(frozen=True, order=True)
class Slot:
    """A reading whose value the reasoning agent does not know."""

    time: int
    robot: int
    cell: int

    def observe(self, value: int) -> Observation:
        return Observation(self.time, self.robot, self.cell, value)

    @classmethod
    def of(cls, o: Observation) -> "Slot":
        return cls(o.time, o.robot, o.cell)


@dataclass(frozen=True)
class ObsSeqSpace:
    """Cartesian product of ``{0, 1}`` over time-ordered slots.

    Realizations are enumerated slot-major with 0 before 1, i.e. realization
    ``i`` is the binary expansion of ``i`` with the first slot as the most
    significant bit.
    """

    slots: tuple[Slot, ...] = ()

    def __post_init__(self):
        slots = tuple(sorted(self.slots))
        if len(set(slots)) != len(slots):
            raise InputError("duplicate slot in observation space")
        object.__setattr__(self, "slots", slots)

    def __len__(self) -> int:
        return len(self.slots)

    @property
    def size(self) -> int:
        return 1 << len(self.slots)

    def realization(self, i: int) -> tuple[int, ...]:
        p = len(self.slots)
        return tuple((i >> (p - 1 - j)) & 1 for j in range(p))

    def realizations(self) -> Iterator[tuple[int, ...]]:
        return itertools.product((0, 1), repeat=len(self.slots))

    def ordinal(self, z: Sequence[int]) -> int:
        idx = 0
        for v in z:
            idx = (idx << 1) | int(v)
        return idx

    def observations(self, z: Sequence[int]) -> tuple[Observation, ...]:
        if len(z) != len(self.slots):
            raise InputError(f"realization of length {len(z)} for {len(self.slots)} slots")
        return tuple(s.observe(int(v)) for s, v in zip(self.slots, z))

    def bits(self) -> np.ndarray:
        p = len(self.slots)
        idx = np.arange(1 << p, dtype=np.int64)[:, None]
        return ((idx >> np.arange(p - 1, -1, -1, dtype=np.int64)) & 1).astype(np.int64)

    def without(self, slots: Iterable[Slot]) -> "ObsSeqSpace":
        drop = set(slots)
        missing = drop - set(self.slots)
        if missing:
            raise InputError(f"slots not in space: {sorted(missing)}")
        return ObsSeqSpace(tuple(s for s in self.slots if s not in drop))

    def cells(self) -> np.ndarray:
        return np.array([s.cell for s in self.slots], dtype=np.int64)


def rollout_cells(a: JointAction, poses: Sequence[Pose], grid: Grid) -> list[list[int]]:
    """``cells[l][r]``: the cell robot ``r`` observes after step ``l`` of ``a``."""
    if len(poses) != a.n_robots:
        raise InputError(f"{len(poses)} poses for a {a.n_robots}-robot action")
    cur = list(poses)
    out = []
    for step in range(a.horizon):
        cur = [move(cur[r], a.per_robot[r][step], grid) for r in range(a.n_robots)]
        out.append([grid.cell(p) for p in cur])
    return out


def evaluate_objective(b: CellBelief, a: JointAction, m: ObsModel, poses: Sequence[Pose], grid: Grid) -> float:
    """Exact ``E[sum_{l=1..L} rho(b_{k+l})]`` by brute-force outcome enumeration.

    Slow reference path; :class:`Problem` evaluates the same quantity through the
    compiled kernel.
    """
    if isinstance(b, Evidence):
        b = b.belief(m)
    cells = rollout_cells(a, poses, grid)
    reads = [(step, c) for step, row in enumerate(cells) for c in row]
    total = 0.0
    for outcome in itertools.product((0, 1), repeat=len(reads)):
        prob = 1.0
        cur = b
        value = 0.0
        for j, ((step, c), z) in enumerate(zip(reads, outcome)):
            p1 = m.prob_one(cur[c])
            f = p1 if z else 1.0 - p1
            prob *= f
            if prob <= 0.0:
                break
            cur = bayes_update(cur, Observation(step + 1, j % a.n_robots, c, z), m)
            if (j + 1) % a.n_robots == 0:
                value += entropy_reward(cur)
        if prob > 0.0:
            total += prob * value
    return total


@dataclass(frozen=True, eq=False)
class Problem:
    """Everything fixed during one planning session: geometry, poses, sensor, candidates."""

    grid: Grid
    poses: tuple[Pose, ...]
    model: ObsModel = field(default_factory=ObsModel)
    actions: tuple[JointAction, ...] = None
    slot_cap: int = DEFAULT_SLOT_CAP

    def __post_init__(self):
        poses = tuple(tuple(int(v) for v in p) for p in self.poses)
        for p in poses:
            if not self.grid.contains(p):
                raise InputError(f"pose {p} outside grid")
        object.__setattr__(self, "poses", poses)
        actions = joint_actions(1, len(poses)) if self.actions is None else tuple(self.actions)
        if not actions:
            raise InputError("empty action set")
        for a in actions:
            if a.n_robots != len(poses):
                raise InputError(f"action {a} does not match {len(poses)} robots")
        if len({a.horizon for a in actions}) != 1:
            raise InputError("candidate actions differ in horizon")
        object.__setattr__(self, "actions", tuple(sorted(set(actions), key=lambda a: a.index)))

    @property
    def n_robots(self) -> int:
        return len(self.poses)

    def position(self, a: JointAction) -> int:
        return self._positions[a]

    @cached_property
    def _positions(self) -> dict:
        return {a: i for i, a in enumerate(self.actions)}

    @cached_property
    def _rollouts(self) -> list[list[int]]:
        # flat read order: step-major, robot-minor
        return [[c for row in rollout_cells(a, self.poses, self.grid) for c in row] for a in self.actions]

    @cached_property
    def relevant_cells(self) -> np.ndarray:
        """Cells whose marginals can influence the argmax."""
        return np.array(sorted({c for reads in self._rollouts for c in reads}), dtype=np.int64)

    @cached_property
    def visits(self) -> np.ndarray:
        col = {int(c): i for i, c in enumerate(self.relevant_cells)}
        return np.array([[col[c] for c in reads] for reads in self._rollouts], dtype=np.int64)

    def gains(self, cond: np.ndarray) -> np.ndarray:
        """Objective minus the action-independent ``L * rho(b)`` for rows of relevant-cell marginals."""
        return _kernels.objective_deltas(cond, self.visits, self.n_robots, self.model.p_detect, self.model.p_false_alarm)

    def relevant_probs(self, ev: Evidence, extra_ones=0, extra_zeros=0) -> np.ndarray:
        cells = self.relevant_cells
        return posterior_from_counts(
            ev.prior.probs[cells], ev.ones[cells] + extra_ones, ev.zeros[cells] + extra_zeros, self.model
        )

    def objective_values(self, b) -> np.ndarray:
        """``J`` for every candidate, in :attr:`actions` order."""
        ev = as_evidence(b)
        base = self.actions[0].horizon * entropy_reward(ev.belief(self.model))
        return base + self.gains(self.relevant_probs(ev)[None, :])[0]

    def favored_positions(self, cond: np.ndarray) -> np.ndarray:
        return _kernels.argmax_lowest(self.gains(cond))


def _problem(problem_or_actions, m=None, poses=None, grid=None) -> Problem:
    if isinstance(problem_or_actions, Problem):
        return problem_or_actions
    if m is None or poses is None or grid is None:
        raise InputError("need a Problem or (actions, model, poses, grid)")
    actions = tuple(problem_or_actions)
    if not actions:
        raise InputError("empty action set")
    return Problem(grid, tuple(poses), m, actions)


def best_action(b, problem: Problem | Sequence[JointAction], m=None, poses=None, grid=None) -> JointAction:
    """Argmax of the objective, lowest canonical index among ties."""
    pb = _problem(problem, m, poses, grid)
    ev = as_evidence(b)
    pos = pb.favored_positions(pb.relevant_probs(ev)[None, :])[0]
    return pb.actions[int(pos)]


def _space_counts(space: ObsSeqSpace, problem: Problem, bits: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    col = {int(c): i for i, c in enumerate(problem.relevant_cells)}
    inc = np.zeros((len(space), len(col)), dtype=np.int64)
    for j, s in enumerate(space.slots):
        if s.cell in col:
            inc[j, col[s.cell]] = 1
    ones = bits @ inc
    zeros = (1 - bits) @ inc
    return ones, zeros


def favored_action(b_common, z: Sequence[int], space: ObsSeqSpace, problem: Problem) -> JointAction:
    """Best action of the belief conditioned on the common history plus realization ``z``."""
    ev = as_evidence(b_common).plus(space.observations(z))
    return best_action(ev, problem)


def check_cap(space: ObsSeqSpace, cap: int):
    if len(space) > cap:
        raise EnumerationLimitError(len(space), cap)


def favored_realizations(b_common, space: ObsSeqSpace, problem: Problem) -> np.ndarray:
    """Action position favored by every realization, in canonical realization order."""
    check_cap(space, problem.slot_cap)
    ev = as_evidence(b_common)
    bits = space.bits()
    ones, zeros = _space_counts(space, problem, bits)
    return problem.favored_positions(problem.relevant_probs(ev, ones, zeros))


def consistent_obs_sets(b_common, space: ObsSeqSpace, problem: Problem) -> dict[JointAction, frozenset]:
    """Partition of all realizations by the action each one favors.

    Actions that no realization favors are omitted.
    """
    fav = favored_realizations(b_common, space, problem)
    groups: dict[JointAction, list] = {}
    for i, pos in enumerate(fav):
        groups.setdefault(problem.actions[int(pos)], []).append(space.realization(i))
    return {a: frozenset(zs) for a, zs in sorted(groups.items(), key=lambda kv: kv[0].index)}


def consistent_for(partition: dict[JointAction, frozenset]) -> JointAction | None:
    """The action owning the whole partition, if there is one."""
    return next(iter(partition)) if len(partition) == 1 else None


def is_consistent(partition: dict[JointAction, frozenset], a: JointAction) -> bool:
    return consistent_for(partition) == a
