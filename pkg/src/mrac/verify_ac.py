"""Three-step verification of action consistency from one agent's point of view.

Step 1 picks the agent's own best action.  Step 2 replays the peer's choice
for every possible value of the peer's readings this agent lacks.  Step 3
replays the peer's replay of this agent, over this agent's own unshared
readings.  Both replays condition on the common history plus one hypothetical
sequence and nothing else.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from functools import cached_property
from typing import Iterable

from .belief_core import CellBelief, Evidence, Observation
from .errors import InputError
from .partition import SpacePartition
from .planning import JointAction, ObsSeqSpace, Problem, Slot, best_action, check_cap


@dataclass(frozen=True)
class HistoryLedger:
    """What one agent knows about the split between its history and its peer's.

    ``own_slots_as_seen_by_peer`` is derived from ``own_unshared`` so the two
    can never drift apart.
    """

    robot: int = 0
    common: tuple[Observation, ...] = ()
    own_unshared: tuple[Observation, ...] = ()
    peer_missing_slots: ObsSeqSpace = field(default_factory=ObsSeqSpace)
    last_consistent_time: int = 0

    def __post_init__(self):
        object.__setattr__(self, "common", tuple(self.common))
        object.__setattr__(self, "own_unshared", tuple(sorted(self.own_unshared, key=lambda o: (o.time, o.robot))))
        if not isinstance(self.peer_missing_slots, ObsSeqSpace):
            object.__setattr__(self, "peer_missing_slots", ObsSeqSpace(tuple(self.peer_missing_slots)))
        shared = {Slot.of(o) for o in self.common}
        own = [Slot.of(o) for o in self.own_unshared]
        if len(set(own)) != len(own):
            raise InputError("duplicate unshared observation")
        if shared & set(own):
            raise InputError("unshared observation already in the common history")
        if shared & set(self.peer_missing_slots.slots):
            raise InputError("missing slot already in the common history")
        for o in self.own_unshared:
            if o.time <= self.last_consistent_time:
                raise InputError(f"unshared observation at t={o.time} predates last consistency {self.last_consistent_time}")
            if o.robot != self.robot:
                raise InputError("unshared observation belongs to another robot")

    @property
    def own_slots_as_seen_by_peer(self) -> ObsSeqSpace:
        return ObsSeqSpace(tuple(Slot.of(o) for o in self.own_unshared))

    @property
    def consistent(self) -> bool:
        return not self.own_unshared and not len(self.peer_missing_slots)

    def record(self, own: Observation | None = None, peer_slot: Slot | None = None) -> "HistoryLedger":
        """Add a fresh own reading and/or the slot of the peer's fresh reading."""
        unshared = self.own_unshared + ((own,) if own is not None else ())
        slots = self.peer_missing_slots.slots + ((peer_slot,) if peer_slot is not None else ())
        return replace(self, own_unshared=unshared, peer_missing_slots=ObsSeqSpace(slots))

    def common_evidence(self, prior) -> Evidence:
        ev = prior if isinstance(prior, Evidence) else Evidence(prior)
        return ev.plus(self.common)

    def own_evidence(self, prior) -> Evidence:
        return self.common_evidence(prior).plus(self.own_unshared)


def mirror(ledger: HistoryLedger, peer_unshared: Iterable[Observation]) -> HistoryLedger:
    """The peer's ledger, given the actual values of the peer's unshared readings."""
    peer_unshared = tuple(peer_unshared)
    got = ObsSeqSpace(tuple(Slot.of(o) for o in peer_unshared))
    if got.slots != ledger.peer_missing_slots.slots:
        raise InputError("peer observations do not match the missing slots")
    return HistoryLedger(
        robot=1 - ledger.robot,
        common=ledger.common,
        own_unshared=peer_unshared,
        peer_missing_slots=ledger.own_slots_as_seen_by_peer,
        last_consistent_time=ledger.last_consistent_time,
    )


@dataclass(frozen=True, eq=False)
class StepReport:
    """Partition of one hypothetical space by favored action."""

    space: ObsSeqSpace
    partition: SpacePartition = field(repr=False)

    @cached_property
    def consistent_for(self) -> JointAction | None:
        pos = self.partition.owner()
        return None if pos is None else self.partition.problem.actions[pos]

    @cached_property
    def per_action_favor(self) -> dict[JointAction, frozenset]:
        """Realizations grouped by favored action; needs the space within the slot cap."""
        check_cap(self.space, self.partition.problem.slot_cap)
        fav, _ = self.partition.realizations(0, self.space.size)
        groups: dict[JointAction, list] = {}
        actions = self.partition.problem.actions
        for i, pos in enumerate(fav):
            groups.setdefault(actions[int(pos)], []).append(self.space.realization(i))
        return {a: frozenset(v) for a, v in sorted(groups.items(), key=lambda kv: kv[0].index)}

    def con(self, a: JointAction) -> bool:
        return self.consistent_for == a


@dataclass(frozen=True, eq=False)
class VerifyOutcome:
    step1_action: JointAction
    step2: StepReport
    step3: StepReport

    @property
    def mrac(self) -> bool:
        return self.step2.con(self.step1_action) and self.step3.con(self.step1_action)


def _report(ledger: HistoryLedger, prior, problem: Problem, space: ObsSeqSpace, capped: bool) -> StepReport:
    if capped:
        check_cap(space, problem.slot_cap)
    return StepReport(space, SpacePartition(ledger.common_evidence(prior), space, problem))


def step1(ledger: HistoryLedger, prior: CellBelief, problem: Problem) -> JointAction:
    return best_action(ledger.own_evidence(prior), problem)


def step2(ledger: HistoryLedger, prior: CellBelief, problem: Problem, *, capped: bool = True) -> StepReport:
    """Peer's choice over every realization of the readings this agent lacks."""
    return _report(ledger, prior, problem, ledger.peer_missing_slots, capped)


def step3(ledger: HistoryLedger, prior: CellBelief, problem: Problem, *, capped: bool = True) -> StepReport:
    """Peer's replay of this agent, over this agent's unshared readings."""
    return _report(ledger, prior, problem, ledger.own_slots_as_seen_by_peer, capped)


def verify(ledger: HistoryLedger, prior: CellBelief, problem: Problem, *, capped: bool = True) -> VerifyOutcome:
    """All three steps.  ``capped=False`` lifts the slot cap; consistency is
    then decided per count class without listing realizations."""
    return VerifyOutcome(
        step1(ledger, prior, problem),
        step2(ledger, prior, problem, capped=capped),
        step3(ledger, prior, problem, capped=capped),
    )
