"""Likelihood-weighted verification: cumulative likelihoods, epsilon-MRAC, guarantees.

Instead of demanding that every hypothetical realization favor the step-1
action, each action is scored by the total predictive probability of the
realizations favoring it.  An action passes a step when it is the top scorer
or its score exceeds ``1 - epsilon``; passing both steps lets the agent act
without communicating, with a computable probability of agreement.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from . import _kernels
from .errors import ContractError, InputError
from .partition import SpacePartition
from .planning import JointAction, ObsSeqSpace, Problem
from .verify_ac import HistoryLedger, step1

SUM_TOL = 1e-9


@dataclass(frozen=True, eq=False)
class CumulativeLikelihoodTable:
    """Per-action cumulative likelihood over one space; ``evaluated`` counts realizations visited."""

    actions: tuple[JointAction, ...]
    values: np.ndarray
    evaluated: int = 0

    def __post_init__(self):
        vals = np.array(self.values, dtype=np.float64)
        if vals.shape != (len(self.actions),):
            raise InputError("one value per action required")
        if np.any(vals < -SUM_TOL) or np.any(vals > 1.0 + SUM_TOL):
            raise InputError("cumulative likelihoods must lie in [0, 1]")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "actions", tuple(self.actions))

    @classmethod
    def from_mapping(cls, mapping: Mapping[JointAction, float], actions=None) -> "CumulativeLikelihoodTable":
        actions = tuple(sorted(actions if actions is not None else mapping, key=lambda a: a.index))
        return cls(actions, np.array([mapping.get(a, 0.0) for a in actions]))

    @property
    def per_action(self) -> dict[JointAction, float]:
        return {a: float(v) for a, v in zip(self.actions, self.values)}

    @property
    def best(self) -> JointAction:
        return self.actions[int(_kernels.argmax_lowest(self.values[None, :])[0])]

    def __getitem__(self, a: JointAction) -> float:
        try:
            return float(self.values[self.actions.index(a)])
        except ValueError:
            return 0.0

    def is_rank1(self, a: JointAction) -> bool:
        return self.best == a


@dataclass(frozen=True)
class GuaranteeTriple:
    p_ac: float
    p_not_ac: float
    p_comm_from_peer: float

    def __post_init__(self):
        for v in (self.p_ac, self.p_not_ac, self.p_comm_from_peer):
            if not -SUM_TOL <= v <= 1.0 + SUM_TOL:
                raise ContractError(f"probability {v} outside [0, 1]")

    @property
    def total(self) -> float:
        return self.p_ac + self.p_not_ac + self.p_comm_from_peer


def table_from_partition(part: SpacePartition) -> CumulativeLikelihoodTable:
    return CumulativeLikelihoodTable(part.problem.actions, part.cumulative(), evaluated=part.size)


def cumulative_likelihood(b_common, space: ObsSeqSpace, problem: Problem) -> CumulativeLikelihoodTable:
    """Exact ``Cl_a`` for every candidate; every realization counts as evaluated."""
    return table_from_partition(SpacePartition(b_common, space, problem))


def check_epsilon(epsilon: float):
    if not 0.0 <= epsilon < 1.0:
        raise InputError(f"epsilon={epsilon} outside [0, 1)")


def passes(table: CumulativeLikelihoodTable, a: JointAction, epsilon: float) -> bool:
    """One step's half of epsilon-MRAC; the threshold comparison is strict."""
    return table.is_rank1(a) or table[a] > 1.0 - epsilon


def epsilon_mrac(step2, step3, a: JointAction, epsilon: float) -> bool:
    check_epsilon(epsilon)
    return passes(step2, a, epsilon) and passes(step3, a, epsilon)


def guarantees(step2, step3, a_bar: JointAction, epsilon: float) -> GuaranteeTriple:
    """Agreement / silent-disagreement / peer-comm probabilities for a declared ``a_bar``."""
    if not epsilon_mrac(step2, step3, a_bar, epsilon):
        raise ContractError(f"{a_bar} does not satisfy epsilon-MRAC")
    p_not = p_comm = 0.0
    for a, cl in step2.per_action.items():
        if a == a_bar:
            continue
        if epsilon_mrac(step2, step3, a, epsilon):
            p_not += cl
        else:
            p_comm += cl
    return GuaranteeTriple(step2[a_bar], p_not, p_comm)


@dataclass(frozen=True, eq=False)
class RVerifyOutcome:
    action: JointAction
    declared: bool
    step2: CumulativeLikelihoodTable = field(repr=False)
    step3: CumulativeLikelihoodTable = field(repr=False)
    triple: GuaranteeTriple | None = None

    @property
    def trigger_comm(self) -> bool:
        return not self.declared

    @property
    def evaluated(self) -> int:
        return self.step2.evaluated + self.step3.evaluated


def r_verify(ledger: HistoryLedger, prior, problem: Problem, epsilon: float) -> RVerifyOutcome:
    check_epsilon(epsilon)
    common = ledger.common_evidence(prior)
    a_bar = step1(ledger, prior, problem)
    t2 = cumulative_likelihood(common, ledger.peer_missing_slots, problem)
    t3 = cumulative_likelihood(common, ledger.own_slots_as_seen_by_peer, problem)
    if epsilon_mrac(t2, t3, a_bar, epsilon):
        return RVerifyOutcome(a_bar, True, t2, t3, guarantees(t2, t3, a_bar, epsilon))
    return RVerifyOutcome(a_bar, False, t2, t3)
