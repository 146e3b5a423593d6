"""Search-and-rescue grid world: hidden targets, known poses, unit moves.

Poses are ``(row, col)`` tuples.  ``N`` decreases the row index, ``E``
increases the column index.  A move that would leave the grid keeps the robot
where it is, so every joint action stays available in every state.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass, field

import numpy as np

from .belief_core import CellBelief, ObsModel, Observation
from .errors import InputError

Pose = tuple[int, int]


class MotionPrimitive(enum.IntEnum):
    N = 0
    S = 1
    E = 2
    W = 3

    @property
    def delta(self) -> Pose:
        return _DELTAS[self]


_DELTAS = {
    MotionPrimitive.N: (-1, 0),
    MotionPrimitive.S: (1, 0),
    MotionPrimitive.E: (0, 1),
    MotionPrimitive.W: (0, -1),
}


@dataclass(frozen=True)
class Grid:
    width: int
    height: int

    def __post_init__(self):
        if self.width < 1 or self.height < 1:
            raise InputError(f"grid {self.width}x{self.height} has no cells")

    @property
    def n_cells(self) -> int:
        return self.width * self.height

    def contains(self, pose: Pose) -> bool:
        r, c = pose
        return 0 <= r < self.height and 0 <= c < self.width

    def cell(self, pose: Pose) -> int:
        if not self.contains(pose):
            raise InputError(f"pose {pose} outside {self.height}x{self.width} grid")
        return pose[0] * self.width + pose[1]

    def pose(self, cell: int) -> Pose:
        if not 0 <= cell < self.n_cells:
            raise InputError(f"cell {cell} outside grid")
        return divmod(cell, self.width)


def move(pose: Pose, primitive: MotionPrimitive, grid: Grid) -> Pose:
    if not grid.contains(pose):
        raise InputError(f"pose {pose} outside grid")
    dr, dc = MotionPrimitive(primitive).delta
    nxt = (pose[0] + dr, pose[1] + dc)
    return nxt if grid.contains(nxt) else pose


class PriorKind(str, enum.Enum):
    MAX_ENTROPY = "MaxEntropy"
    PRIOR_KNOWLEDGE = "PriorKnowledge"
    RANDOM = "Random"


@dataclass(frozen=True)
class ScenarioConfig:
    width: int = 10
    height: int = 10
    target_density: float = 0.2
    horizon: int = 200
    comm_restr: int = 0
    init: PriorKind = PriorKind.MAX_ENTROPY
    p_detect: float = 0.9
    p_false_alarm: float = 0.2

    @property
    def model(self) -> ObsModel:
        return ObsModel(self.p_detect, self.p_false_alarm)


@dataclass(frozen=True, eq=False)
class Scenario:
    grid: Grid
    ground_truth: np.ndarray
    start_poses: tuple[Pose, Pose]
    horizon: int
    restrictions: frozenset
    seed: int
    prior: CellBelief
    model: ObsModel = field(default_factory=ObsModel)

    @property
    def width(self) -> int:
        return self.grid.width

    @property
    def height(self) -> int:
        return self.grid.height

    def blocked(self, t: int) -> bool:
        return t in self.restrictions

    def truth_grid(self) -> list[list[int]]:
        return self.ground_truth.reshape(self.height, self.width).astype(int).tolist()

    def __eq__(self, other) -> bool:
        if not isinstance(other, Scenario):
            return NotImplemented
        return (
            self.grid == other.grid
            and np.array_equal(self.ground_truth, other.ground_truth)
            and self.start_poses == other.start_poses
            and self.horizon == other.horizon
            and self.restrictions == other.restrictions
            and self.seed == other.seed
            and self.prior == other.prior
            and self.model == other.model
        )

    __hash__ = None


def init_prior(kind, ground_truth, rng: np.random.Generator) -> CellBelief:
    kind = PriorKind(kind)
    truth = np.asarray(ground_truth, dtype=bool)
    if kind is PriorKind.MAX_ENTROPY:
        return CellBelief(np.full(truth.shape[0], 0.5))
    if kind is PriorKind.PRIOR_KNOWLEDGE:
        return CellBelief(np.where(truth, 0.7, 0.3))
    return CellBelief(rng.uniform(0.05, 0.95, size=truth.shape[0]))


def build_scenario(config: ScenarioConfig, seed: int) -> Scenario:
    if config.width < 1 or config.height < 1:
        raise InputError("grid dimensions must be positive")
    if config.width * config.height < 2:
        raise InputError("grid needs at least two cells for two robots")
    if config.horizon < 1:
        raise InputError("horizon must be at least 1")
    if not 0 <= config.comm_restr <= config.horizon:
        raise InputError(f"comm_restr={config.comm_restr} outside [0, {config.horizon}]")
    if not 0.0 <= config.target_density <= 1.0:
        raise InputError("target_density outside [0, 1]")

    grid = Grid(config.width, config.height)
    truth_rng, pose_rng, restr_rng, prior_rng = (
        np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(4)
    )
    truth = truth_rng.random(grid.n_cells) < config.target_density
    truth.setflags(write=False)
    starts = pose_rng.choice(grid.n_cells, size=2, replace=False)
    restrictions = restr_rng.choice(np.arange(1, config.horizon + 1), size=config.comm_restr, replace=False)
    return Scenario(
        grid=grid,
        ground_truth=truth,
        start_poses=(grid.pose(int(starts[0])), grid.pose(int(starts[1]))),
        horizon=config.horizon,
        restrictions=frozenset(int(t) for t in restrictions),
        seed=seed,
        prior=init_prior(config.init, truth, prior_rng),
        model=config.model,
    )


def sense(scenario: Scenario, pose: Pose, rng: np.random.Generator, *, time: int = 1, robot: int = 0) -> Observation:
    """Draw the binary reading of the cell under ``pose``."""
    cell = scenario.grid.cell(pose)
    p1 = scenario.model.p_detect if scenario.ground_truth[cell] else scenario.model.p_false_alarm
    return Observation(time=time, robot=robot, cell=cell, value=int(rng.random() < p1))
