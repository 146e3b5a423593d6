"""Self-triggered communication until both agents provably pick the same action.

A planning session runs in synchronous rounds.  Each round both agents decide
from their own ledgers whether to send; every message carries the sender's
whole unshared backlog and counts as one comm.  A round in which nobody sends
ends the session and each agent executes its own step-1 action.

That last rule is safe: an agent stays silent only when its step-3 partition
is consistent for its own step-1 action, and the peer's actual belief is one
of the realizations in that partition.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .belief_core import Observation
from .errors import ProtocolError
from .planning import JointAction, Problem, Slot
from .verify_ac import HistoryLedger, VerifyOutcome, verify


class TriggerReason(str, enum.Enum):
    STEP3_INCONSISTENT = "Step3Inconsistent"
    STEP2_FAVORS_OTHER = "Step2FavorsOther"
    # reserved: a silent round already implies agreement, so no rule needs it
    PEER_WILL_SEND = "PeerWillSend"
    # bound- and likelihood-based verifiers
    EPSILON_MRAC_FAILED = "EpsilonMracFailed"


class Direction(str, enum.Enum):
    INCOMING = "incoming"
    OUTGOING = "outgoing"


@dataclass(frozen=True)
class CommMessage:
    sender: int
    payload: tuple[Observation, ...]
    trigger_reason: TriggerReason

    def __post_init__(self):
        object.__setattr__(self, "payload", tuple(self.payload))
        if not self.payload:
            raise ProtocolError("empty message")
        if any(o.robot != self.sender for o in self.payload):
            raise ProtocolError("payload contains another robot's observations")


@dataclass(frozen=True)
class CommDecision:
    send: bool = False
    expect_receive: bool = False
    reasons: frozenset = frozenset()


def comm_decision(outcome: VerifyOutcome) -> CommDecision:
    if outcome.mrac:
        return CommDecision()
    a_bar = outcome.step1_action
    reasons = set()
    if not outcome.step3.con(a_bar):
        reasons.add(TriggerReason.STEP3_INCONSISTENT)
    other = outcome.step2.consistent_for
    if other is not None and other != a_bar:
        reasons.add(TriggerReason.STEP2_FAVORS_OTHER)
    return CommDecision(send=bool(reasons), expect_receive=not outcome.step2.con(a_bar), reasons=frozenset(reasons))


def apply_comm(ledger: HistoryLedger, msg: CommMessage, direction: Direction | str) -> HistoryLedger:
    direction = Direction(direction)
    if direction is Direction.OUTGOING:
        if msg.sender != ledger.robot:
            raise ProtocolError("outgoing message from another sender")
        own = set(ledger.own_unshared)
        if not set(msg.payload) <= own:
            raise ProtocolError("payload is not part of the unshared backlog")
        unshared = tuple(o for o in ledger.own_unshared if o not in set(msg.payload))
        slots = ledger.peer_missing_slots
    else:
        if msg.sender == ledger.robot:
            raise ProtocolError("incoming message from self")
        missing = set(ledger.peer_missing_slots.slots)
        got = [Slot.of(o) for o in msg.payload]
        if not set(got) <= missing or len(set(got)) != len(got):
            raise ProtocolError("payload references unknown slots")
        unshared = ledger.own_unshared
        slots = ledger.peer_missing_slots.without(got)
    common = ledger.common + tuple(msg.payload)
    last = ledger.last_consistent_time
    if not unshared and not len(slots):
        last = max([last] + [o.time for o in common])
    return replace(ledger, common=common, own_unshared=unshared, peer_missing_slots=slots, last_consistent_time=last)


@dataclass
class Channel:
    """Two-agent link that drops everything at scheduled timesteps."""

    restrictions: frozenset = frozenset()
    log: list = field(default_factory=list)

    def blocked(self, time: int) -> bool:
        return time in self.restrictions

    def deliver(self, time: int, msg: CommMessage) -> bool:
        if self.blocked(time):
            return False
        self.log.append((time, msg.sender, len(msg.payload)))
        return True


@dataclass(frozen=True)
class AgentRound:
    """One agent's view at the start of a round."""

    action: JointAction
    send: bool
    reason: TriggerReason | None = None
    detail: object = None


@dataclass
class SessionResult:
    actions: tuple[JointAction, JointAction]
    ledgers: tuple[HistoryLedger, HistoryLedger]
    comms: int = 0
    rounds: int = 0
    forced: bool = False
    history: list = field(default_factory=list)

    @property
    def agreed(self) -> bool:
        return self.actions[0] == self.actions[1]


Decide = Callable[[HistoryLedger], AgentRound]


def run_session(ledgers: Sequence[HistoryLedger], decide: Decide, channel: Channel | None, time: int) -> SessionResult:
    """Generic synchronous round loop shared by all self-triggered verifiers."""
    ledgers = list(ledgers)
    res = SessionResult(actions=(None, None), ledgers=tuple(ledgers))
    while True:
        views = [decide(ledgers[0]), decide(ledgers[1])]
        res.rounds += 1
        res.history.append(views)
        msgs = [
            CommMessage(r, ledgers[r].own_unshared, views[r].reason or TriggerReason.STEP3_INCONSISTENT)
            for r in (0, 1)
            if views[r].send and ledgers[r].own_unshared
        ]
        if not msgs:
            break
        if channel is not None and channel.blocked(time):
            res.forced = True
            break
        for msg in msgs:
            if channel is not None:
                channel.deliver(time, msg)
            res.comms += 1
            ledgers[msg.sender] = apply_comm(ledgers[msg.sender], msg, Direction.OUTGOING)
            ledgers[1 - msg.sender] = apply_comm(ledgers[1 - msg.sender], msg, Direction.INCOMING)
    res.actions = (views[0].action, views[1].action)
    res.ledgers = tuple(ledgers)
    return res


def verify_decider(prior, problem: Problem) -> Decide:
    def decide(ledger: HistoryLedger) -> AgentRound:
        out = verify(ledger, prior, problem, capped=False)
        d = comm_decision(out)
        reason = min(d.reasons, key=lambda r: r.value) if d.reasons else None
        return AgentRound(out.step1_action, d.send, reason, out)

    return decide


def enforce(
    ledgers: Sequence[HistoryLedger], prior, problem: Problem, channel: Channel | None = None, time: int = 1
) -> SessionResult:
    """Verify, exchange, repeat until a silent round (or a blocked channel)."""
    return run_session(ledgers, verify_decider(prior, problem), channel, time)
