import itertools

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from mrac.belief_core import CellBelief, ObsModel, Observation
from mrac.planning import Problem, Slot, evaluate_objective, joint_actions
from mrac.scenario_sar import Grid
from mrac.verify_ac import HistoryLedger

settings.register_profile("default", max_examples=60, deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


def oracle_best(b, problem: Problem, tol: float = 1e-12):
    """Brute-force argmax through the sequential-update reference objective."""
    js = [evaluate_objective(b, a, problem.model, problem.poses, problem.grid) for a in problem.actions]
    top = max(js)
    return next(a for a, j in zip(problem.actions, js) if j >= top - tol)


def random_instance(rng, width=3, height=3, p_r=2, p_rp=2, n_common=3, model=None):
    """Prior, poses and a pair of ledgers with ``p_r``/``p_rp`` unshared readings each.

    Returns the problem, the prior, agent-r's slots, agent-r''s slots, and a
    builder turning value tuples into the two ledgers.
    """
    model = model or ObsModel()
    grid = Grid(width, height)
    prior = CellBelief(rng.uniform(0.05, 0.95, grid.n_cells))
    starts = rng.choice(grid.n_cells, size=2, replace=False)
    poses = (grid.pose(int(starts[0])), grid.pose(int(starts[1])))
    problem = Problem(grid, poses, model, joint_actions(1, 2))
    near = list(problem.relevant_cells)
    pick = lambda: int(rng.choice(near)) if rng.random() < 0.8 else int(rng.integers(grid.n_cells))  # noqa: E731
    common = tuple(Observation(t + 1, int(rng.integers(2)), pick(), int(rng.integers(2))) for t in range(n_common))
    t0 = n_common
    slots_r = tuple(Slot(t0 + 1 + j, 0, pick()) for j in range(p_r))
    slots_rp = tuple(Slot(t0 + 1 + j, 1, pick()) for j in range(p_rp))

    def ledgers(z_r, z_rp):
        own_r = tuple(s.observe(v) for s, v in zip(slots_r, z_r))
        own_rp = tuple(s.observe(v) for s, v in zip(slots_rp, z_rp))
        a = HistoryLedger(0, common, own_r, slots_rp, last_consistent_time=t0)
        b = HistoryLedger(1, common, own_rp, slots_r, last_consistent_time=t0)
        return a, b

    return problem, prior, slots_r, slots_rp, ledgers


def all_values(p):
    return list(itertools.product((0, 1), repeat=p))


@pytest.fixture
def model():
    return ObsModel(0.9, 0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
