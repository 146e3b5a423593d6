import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from mrac import _kernels
from mrac.belief_core import CellBelief, Evidence, ObsModel, Observation, bayes_update, belief_from_history, entropy_reward
from mrac.errors import EnumerationLimitError, InputError
from mrac.planning import (
    JointAction,
    ObsSeqSpace,
    Problem,
    Slot,
    best_action,
    consistent_obs_sets,
    evaluate_objective,
    favored_action,
    is_consistent,
    joint_actions,
)
from mrac.scenario_sar import Grid, MotionPrimitive

from conftest import oracle_best


class TestJointActions:
    def test_counts(self):
        assert len(joint_actions(1, 2)) == 16
        assert len(joint_actions(2, 2)) == 256

    @pytest.mark.parametrize("horizon", [1, 2])
    def test_index_is_enumeration_position(self, horizon):
        acts = joint_actions(horizon, 2)
        assert [a.index for a in acts] == list(range(len(acts)))

    def test_canonical_order_robot_r_major(self):
        acts = joint_actions(1, 2)
        assert str(acts[0]) == "N|N" and str(acts[1]) == "N|S" and str(acts[4]) == "S|N"
        assert str(acts[3]) == "N|W" and str(acts[7]) == "S|W"

    def test_parse_roundtrip(self):
        for a in joint_actions(2, 2)[:40]:
            assert JointAction.parse(str(a)) == a

    def test_rejects_ragged(self):
        with pytest.raises(InputError):
            JointAction(((MotionPrimitive.N,), (MotionPrimitive.N, MotionPrimitive.S)))


class TestSpace:
    def test_canonical_realizations(self):
        sp = ObsSeqSpace((Slot(2, 0, 4), Slot(1, 1, 3)))
        assert sp.slots[0].time == 1  # time-ordered
        assert list(sp.realizations()) == [(0, 0), (0, 1), (1, 0), (1, 1)]
        assert [sp.realization(i) for i in range(4)] == list(sp.realizations())
        assert sp.bits().tolist() == [[0, 0], [0, 1], [1, 0], [1, 1]]
        assert sp.ordinal((1, 0)) == 2

    def test_duplicate_slot(self):
        with pytest.raises(InputError):
            ObsSeqSpace((Slot(1, 0, 0), Slot(1, 0, 0)))


def _single_robot(q=0.5):
    grid = Grid(3, 1)
    probs = np.array([0.3, 0.6, q])
    problem = Problem(grid, ((0, 1),), ObsModel(), joint_actions(1, 1))
    return grid, CellBelief(probs), problem


class TestObjective:
    def test_deterministic_cells(self):
        grid = Grid(3, 3)
        b = CellBelief(np.where(np.arange(9) % 2, 1.0, 0.0))
        for a in joint_actions(1, 2):
            assert evaluate_objective(b, a, ObsModel(), ((1, 1), (0, 0)), grid) == entropy_reward(b)

    def test_single_robot_two_branch(self):
        grid, b, problem = _single_robot(0.5)
        m = problem.model
        east = JointAction.parse("E")
        z1 = bayes_update(b, Observation(1, 0, 2, 1), m)
        z0 = bayes_update(b, Observation(1, 0, 2, 0), m)
        expect = 0.55 * entropy_reward(z1) + 0.45 * entropy_reward(z0)
        assert evaluate_objective(b, east, m, problem.poses, grid) == pytest.approx(expect, abs=1e-12)
        assert problem.objective_values(b)[problem.position(east)] == pytest.approx(expect, abs=1e-12)

    def test_symmetric_geometry(self):
        grid = Grid(5, 5)
        b = CellBelief.uniform(25)
        poses = ((2, 2), (0, 0))
        js = {str(a): evaluate_objective(b, a, ObsModel(), poses, grid) for a in joint_actions(1, 2)}
        assert js["N|S"] == pytest.approx(js["S|S"], abs=1e-15)
        assert js["E|E"] == pytest.approx(js["W|E"], abs=1e-15)


class TestBestAction:
    def test_single_candidate(self):
        grid = Grid(4, 4)
        a = JointAction.parse("W|E")
        assert best_action(CellBelief.uniform(16), [a], ObsModel(), ((1, 1), (2, 2)), grid) == a

    def test_empty_candidates(self):
        with pytest.raises(InputError):
            best_action(CellBelief.uniform(4), [], ObsModel(), ((0, 0), (1, 1)), Grid(2, 2))

    def test_tie_goes_to_lowest_index(self):
        grid = Grid(5, 5)
        acts = joint_actions(1, 2)
        a3, a7 = acts[3], acts[7]
        b = CellBelief.uniform(25)
        poses = ((2, 2), (2, 2))
        assert best_action(b, [a7, a3], ObsModel(), poses, grid) == a3

    def test_deterministic_belief_picks_index_zero(self):
        grid = Grid(4, 4)
        b = CellBelief(np.tile([0.0, 1.0], 8))
        problem = Problem(grid, ((1, 1), (2, 3)))
        assert best_action(b, problem).index == 0

    @pytest.mark.parametrize("seed", range(8))
    def test_matches_exhaustive(self, seed):
        rng = np.random.default_rng(seed)
        grid = Grid(5, 5)
        b = CellBelief(rng.uniform(0.05, 0.95, 25))
        cells = rng.choice(25, 2, replace=False)
        problem = Problem(grid, (grid.pose(int(cells[0])), grid.pose(int(cells[1]))))
        assert best_action(b, problem) == oracle_best(b, problem)

    @given(st.lists(st.floats(-50, 50), min_size=2, max_size=16, unique=True), st.floats(0.1, 10), st.floats(-5, 5))
    def test_argmax_affine_invariance(self, js, scale, shift):
        j = np.array(js)
        if np.sort(j)[-1] - np.sort(j)[-2] < 1e-6:
            return
        assert _kernels.argmax_lowest(j[None, :])[0] == _kernels.argmax_lowest((scale * j + shift)[None, :])[0]

    def test_index_reproducible_across_processes(self):
        code = (
            "import numpy as np\n"
            "from mrac.belief_core import CellBelief\n"
            "from mrac.planning import Problem, best_action\n"
            "from mrac.scenario_sar import Grid\n"
            "b = CellBelief(np.random.default_rng(7).uniform(0.05, 0.95, 25))\n"
            "print(best_action(b, Problem(Grid(5, 5), ((1, 2), (3, 3)))).index)\n"
        )
        runs = {subprocess.run([sys.executable, "-c", code], capture_output=True, text=True, check=True).stdout for _ in range(2)}
        b = CellBelief(np.random.default_rng(7).uniform(0.05, 0.95, 25))
        assert runs == {f"{best_action(b, Problem(Grid(5, 5), ((1, 2), (3, 3)))).index}\n"}


def _small(seed, p=2):
    rng = np.random.default_rng(seed)
    grid = Grid(3, 3)
    b = CellBelief(rng.uniform(0.05, 0.95, 9))
    problem = Problem(grid, ((1, 1), (0, 2)))
    cells = rng.choice(problem.relevant_cells, p)
    space = ObsSeqSpace(tuple(Slot(j + 1, 1, int(c)) for j, c in enumerate(cells)))
    return b, problem, space


class TestFavored:
    def test_uninformative_model(self):
        grid = Grid(3, 3)
        m = ObsModel(0.5, 0.5)
        b = CellBelief(np.linspace(0.1, 0.9, 9))
        problem = Problem(grid, ((1, 1), (0, 0)), m)
        space = ObsSeqSpace((Slot(1, 1, 1), Slot(2, 1, 3)))
        for z in space.realizations():
            assert favored_action(b, z, space, problem) == best_action(b, problem)
        parts = consistent_obs_sets(b, space, problem)
        assert is_consistent(parts, best_action(b, problem))

    def test_empty_space(self):
        b, problem, _ = _small(0)
        space = ObsSeqSpace()
        assert favored_action(b, (), space, problem) == best_action(b, problem)
        assert consistent_obs_sets(b, space, problem) == {best_action(b, problem): frozenset({()})}

    @pytest.mark.parametrize("seed", range(12))
    def test_partition_matches_brute_force(self, seed):
        b, problem, space = _small(seed)
        parts = consistent_obs_sets(b, space, problem)
        for z in space.realizations():
            cond = belief_from_history(b, space.observations(z), problem.model)
            want = oracle_best(cond, problem)
            assert z in parts[want]

    @pytest.mark.parametrize("seed", range(6))
    def test_partition_property(self, seed):
        b, problem, space = _small(seed, p=4)
        parts = consistent_obs_sets(b, space, problem)
        cells = list(parts.values())
        assert sum(len(c) for c in cells) == space.size
        assert set().union(*cells) == set(space.realizations())

    def test_cap(self):
        b, problem, _ = _small(0)
        big = ObsSeqSpace(tuple(Slot(t, 1, 0) for t in range(1, 14)))
        with pytest.raises(EnumerationLimitError):
            consistent_obs_sets(b, big, problem)

    def test_evidence_and_belief_inputs_agree(self):
        b, problem, space = _small(3)
        assert consistent_obs_sets(b, space, problem) == consistent_obs_sets(Evidence(b), space, problem)
