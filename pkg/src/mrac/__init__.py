"""Action-consistent decentralized planning for two robots with partially shared histories."""

from .belief_core import CellBelief, Evidence, ObsModel, Observation
from .planning import JointAction, ObsSeqSpace, Problem, Slot, joint_actions
from .scenario_sar import Grid, MotionPrimitive, PriorKind, ScenarioConfig, build_scenario
from .sim_runtime import Algorithm, AlgorithmSpec, run_batch, run_episode

__version__ = "0.1.0"

__all__ = [
    "Algorithm",
    "AlgorithmSpec",
    "CellBelief",
    "Evidence",
    "Grid",
    "JointAction",
    "MotionPrimitive",
    "ObsModel",
    "ObsSeqSpace",
    "Observation",
    "PriorKind",
    "Problem",
    "ScenarioConfig",
    "Slot",
    "build_scenario",
    "joint_actions",
    "run_batch",
    "run_episode",
]
