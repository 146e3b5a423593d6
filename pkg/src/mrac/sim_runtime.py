"""Two-agent episode driver for the grid search scenario.

Each timestep: both robots sense the cell under them, each agent plans on its
own ledger (verifying and communicating as its algorithm prescribes), and each
robot executes its own component of the joint action its agent chose.  Both
agents always know both poses, so disagreement shows up only as the robots
following different joint plans.

Sensing uses one random stream per robot with one draw per timestep, so two
algorithms that drive the robots along the same path see the same readings.
"""

from __future__ import annotations

import enum
import time as _time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .belief_core import Observation
from .enforce_ac import AgentRound, Channel, TriggerReason, run_session, verify_decider
from .partition import SpacePartition
from .planning import DEFAULT_SLOT_CAP, JointAction, Problem, Slot, joint_actions
from .relaxed_ac import r_verify
from .scenario_sar import Scenario, ScenarioConfig, build_scenario, move
from .simp_ac import DEFAULT_INITIAL_FRACTION, DEFAULT_M_BATCH, r_verify_simp
from .verify_ac import HistoryLedger, step1

SENSE_STREAM = 0x5E5E


class Algorithm(str, enum.Enum):
    BASELINE_I = "BaselineI"
    BASELINE_II = "BaselineII"
    ENFORCE_AC = "EnforceAC"
    R_ENFORCE_AC = "REnforceAC"
    R_ENFORCE_AC_SIMP = "REnforceACSimp"


@dataclass(frozen=True)
class AlgorithmSpec:
    name: Algorithm = Algorithm.ENFORCE_AC
    epsilon: float = 0.0
    m_batch: int = DEFAULT_M_BATCH
    initial_fraction: float = DEFAULT_INITIAL_FRACTION
    slot_cap: int = DEFAULT_SLOT_CAP
    horizon_L: int = 1

    def __post_init__(self):
        object.__setattr__(self, "name", Algorithm(self.name))

    @property
    def label(self) -> str:
        if self.name in (Algorithm.R_ENFORCE_AC, Algorithm.R_ENFORCE_AC_SIMP):
            return f"{self.name.value}(eps={self.epsilon:g})"
        return self.name.value


@dataclass
class StepRecord:
    t: int
    action_r: JointAction
    action_rp: JointAction
    comms: int
    J_r: float
    J_rp: float
    p_r: int
    p_rp: int
    rounds: int = 1
    forced: bool = False
    evaluated: int = 0
    p_ac: float | None = None
    p_not_ac: float | None = None
    p_comm: float | None = None
    lb: float | None = None
    ub: float | None = None
    deterministic: bool | None = None
    wall_time: float = 0.0

    @property
    def not_ac(self) -> bool:
        return self.action_r != self.action_rp


@dataclass
class EpisodeMetrics:
    seed: int
    algorithm: AlgorithmSpec
    horizon: int
    steps: list[StepRecord] = field(default_factory=list)

    @property
    def not_ac_count(self) -> int:
        return sum(s.not_ac for s in self.steps)

    @property
    def comm_count(self) -> int:
        return sum(s.comms for s in self.steps)

    @property
    def evaluated_total(self) -> int:
        return sum(s.evaluated for s in self.steps)

    @property
    def mean_J(self) -> float:
        return float(np.mean([s.J_r for s in self.steps])) if self.steps else float("nan")

    @property
    def wall_time(self) -> float:
        return sum(s.wall_time for s in self.steps)

    def summary(self) -> dict:
        return {
            "seed": self.seed,
            "algo": self.algorithm.label,
            "not_ac": self.not_ac_count,
            "comms": self.comm_count,
            "not_ac_pct": 100.0 * self.not_ac_count / self.horizon,
            "comms_pct": 100.0 * self.comm_count / (2 * self.horizon),
            "mean_J": self.mean_J,
        }


def _decider(algo: AlgorithmSpec, prior, problem: Problem):
    name = algo.name
    if name is Algorithm.BASELINE_I:
        return lambda led: AgentRound(step1(led, prior, problem), True, TriggerReason.STEP3_INCONSISTENT)
    if name is Algorithm.BASELINE_II:
        return lambda led: AgentRound(step1(led, prior, problem), False)
    if name is Algorithm.ENFORCE_AC:
        return verify_decider(prior, problem)
    if name is Algorithm.R_ENFORCE_AC:

        def decide(led):
            out = r_verify(led, prior, problem, algo.epsilon)
            return AgentRound(out.action, out.trigger_comm, TriggerReason.EPSILON_MRAC_FAILED, out)

        return decide

    def decide_simp(led):
        out = r_verify_simp(led, prior, problem, algo.epsilon, algo.m_batch, algo.initial_fraction)
        return AgentRound(out.action, out.trigger_comm, TriggerReason.EPSILON_MRAC_FAILED, out)

    return decide_simp


def _guarantee_fields(rec: StepRecord, algo: AlgorithmSpec, result, ledger0: HistoryLedger, prior, problem):
    """Agent r's view of the final round, for the per-step trace."""
    if result.forced:
        # nothing crossed the channel: agreement holds with the peer's step-2 likelihood
        part = SpacePartition(ledger0.common_evidence(prior), ledger0.peer_missing_slots, problem)
        cl = part.cumulative()[problem.position(result.actions[0])]
        rec.p_ac, rec.p_not_ac, rec.p_comm = float(cl), float(1.0 - cl), 0.0
        return
    detail = result.history[-1][0].detail
    if algo.name is Algorithm.R_ENFORCE_AC and detail is not None and detail.triple is not None:
        rec.p_ac, rec.p_not_ac, rec.p_comm = detail.triple.p_ac, detail.triple.p_not_ac, detail.triple.p_comm_from_peer
    elif algo.name is Algorithm.R_ENFORCE_AC_SIMP and detail is not None and detail.declared:
        rec.lb, rec.ub = detail.bracket
        rec.deterministic = detail.deterministic
    elif algo.name in (Algorithm.BASELINE_I, Algorithm.ENFORCE_AC):
        rec.p_ac, rec.p_not_ac, rec.p_comm = 1.0, 0.0, 0.0
    if ledger0.consistent and rec.p_ac is None and algo.name is not Algorithm.R_ENFORCE_AC_SIMP:
        rec.p_ac, rec.p_not_ac, rec.p_comm = 1.0, 0.0, 0.0


def sense_streams(seed: int) -> list[np.random.Generator]:
    return [np.random.default_rng([int(seed), r, SENSE_STREAM]) for r in (0, 1)]


def run_episode(scenario: Scenario, algorithm: AlgorithmSpec, *, channel: Channel | None = None) -> EpisodeMetrics:
    algo = algorithm
    grid, model = scenario.grid, scenario.model
    actions = joint_actions(algo.horizon_L, 2)
    channel = channel if channel is not None else Channel(scenario.restrictions)
    rngs = sense_streams(scenario.seed)
    prior = scenario.prior
    poses = list(scenario.start_poses)
    ledgers = [HistoryLedger(robot=0), HistoryLedger(robot=1)]
    last_consistent = 0
    metrics = EpisodeMetrics(scenario.seed, algo, scenario.horizon)

    for t in range(1, scenario.horizon + 1):
        t0 = _time.perf_counter()
        cells = [grid.cell(p) for p in poses]
        for r in (0, 1):
            occupied = bool(scenario.ground_truth[cells[r]])
            p1 = model.p_detect if occupied else model.p_false_alarm
            obs = Observation(t, r, cells[r], int(rngs[r].random() < p1))
            ledgers[r] = ledgers[r].record(obs, Slot(t, 1 - r, cells[1 - r]))
        p_val = t - last_consistent
        problem = Problem(grid, tuple(poses), model, actions, algo.slot_cap)

        result = run_session(ledgers, _decider(algo, prior, problem), channel, t)
        ledgers = list(result.ledgers)
        a_r, a_rp = result.actions

        j = [problem.objective_values(ledgers[r].own_evidence(prior))[problem.position(a)] for r, a in ((0, a_r), (1, a_rp))]
        evaluated = 0
        for views in result.history:
            for v in views:
                evaluated += getattr(v.detail, "evaluated", 0) if v.detail is not None else 0
        rec = StepRecord(t, a_r, a_rp, result.comms, float(j[0]), float(j[1]), p_val, p_val,
                         rounds=result.rounds, forced=result.forced, evaluated=int(evaluated))
        _guarantee_fields(rec, algo, result, ledgers[0], prior, problem)

        poses = [move(poses[r], result.actions[r].per_robot[r][0], grid) for r in (0, 1)]
        if ledgers[0].consistent:
            last_consistent = t
        rec.wall_time = _time.perf_counter() - t0
        metrics.steps.append(rec)
    return metrics


def run_config(config: ScenarioConfig, algorithm: AlgorithmSpec, seed: int) -> EpisodeMetrics:
    return run_episode(build_scenario(config, seed), algorithm)


@dataclass
class BatchResult:
    episodes: list[EpisodeMetrics]

    def rows(self) -> list[dict]:
        return [e.summary() for e in self.episodes]

    def aggregate(self) -> list[dict]:
        """Mean and standard deviation per algorithm label, in first-seen order."""
        groups: dict[str, list[EpisodeMetrics]] = {}
        for e in self.episodes:
            groups.setdefault(e.algorithm.label, []).append(e)
        out = []
        for label, eps in groups.items():
            na = np.array([e.not_ac_count for e in eps], dtype=float)
            cm = np.array([e.comm_count for e in eps], dtype=float)
            horizon = eps[0].horizon
            out.append({
                "algo": label,
                "runs": len(eps),
                "not_ac_mean": float(na.mean()),
                "not_ac_std": float(na.std()),
                "comms_mean": float(cm.mean()),
                "comms_std": float(cm.std()),
                "not_ac_pct": 100.0 * float(na.mean()) / horizon,
                "comms_pct": 100.0 * float(cm.mean()) / (2 * horizon),
                "mean_J": float(np.mean([e.mean_J for e in eps])),
            })
        return out


def _run_job(job):
    return run_config(*job)


def run_batch(
    configs: Iterable[tuple[ScenarioConfig, AlgorithmSpec]], seeds: Sequence[int], workers: int = 1
) -> BatchResult:
    """One episode per (config, seed), returned in (config, seed) order."""
    seeds = list(seeds)
    if not seeds:
        raise ValueError("empty seed list")
    jobs = [(cfg, algo, int(s)) for cfg, algo in configs for s in seeds]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            episodes = list(pool.map(_run_job, jobs))
    else:
        episodes = [_run_job(j) for j in jobs]
    return BatchResult(episodes)
