import numpy as np
import pytest

from mrac.belief_core import CellBelief, ObsModel, Observation, belief_from_history
from mrac.errors import EnumerationLimitError, InputError
from mrac.planning import ObsSeqSpace, Problem, Slot, best_action
from mrac.scenario_sar import Grid
from mrac.verify_ac import HistoryLedger, mirror, step1, step2, step3, verify

from conftest import all_values, oracle_best, random_instance


class TestLedger:
    def test_slots_derived_from_own(self):
        led = HistoryLedger(0, (), (Observation(2, 0, 3, 1),), ())
        assert led.own_slots_as_seen_by_peer.slots == (Slot(2, 0, 3),)
        assert not led.consistent
        assert HistoryLedger().consistent

    def test_rejects_overlap_with_common(self):
        o = Observation(1, 0, 0, 1)
        with pytest.raises(InputError):
            HistoryLedger(0, (o,), (o,), ())

    def test_rejects_stale_unshared(self):
        with pytest.raises(InputError):
            HistoryLedger(0, (), (Observation(1, 0, 0, 1),), (), last_consistent_time=1)

    def test_rejects_foreign_unshared(self):
        with pytest.raises(InputError):
            HistoryLedger(0, (), (Observation(1, 1, 0, 1),), ())

    def test_record(self):
        led = HistoryLedger().record(Observation(1, 0, 2, 0), Slot(1, 1, 4))
        assert len(led.own_unshared) == 1 and led.peer_missing_slots.slots == (Slot(1, 1, 4),)

    def test_mirror_roundtrip(self, rng):
        *_, ledgers = random_instance(rng)
        a, b = ledgers((1, 0), (0, 1))
        assert mirror(a, b.own_unshared) == b
        assert mirror(b, a.own_unshared) == a
        with pytest.raises(InputError):
            mirror(a, a.own_unshared)


class TestSteps:
    def test_consistent_ledger_always_mrac(self, rng):
        grid = Grid(3, 3)
        problem = Problem(grid, ((0, 0), (2, 2)))
        prior = CellBelief(rng.uniform(0.1, 0.9, 9))
        out = verify(HistoryLedger(0, (Observation(1, 0, 1, 1),)), prior, problem)
        assert out.mrac
        assert out.step1_action == out.step2.consistent_for == out.step3.consistent_for

    @pytest.mark.parametrize("seed", range(10))
    def test_step_partitions_match_brute_force(self, seed):
        rng = np.random.default_rng(seed)
        problem, prior, slots_r, slots_rp, ledgers = random_instance(rng)
        led, _ = ledgers((1, 0), (0, 0))
        common = belief_from_history(prior, led.common, problem.model)
        for report, slots in ((step2(led, prior, problem), slots_rp), (step3(led, prior, problem), slots_r)):
            for z in all_values(len(slots)):
                seq = [s.observe(v) for s, v in zip(slots, z)]
                want = oracle_best(belief_from_history(common, seq, problem.model), problem)
                assert z in report.per_action_favor[want]

    @pytest.mark.parametrize("seed", range(10))
    def test_self_inclusion(self, seed):
        # the agent's own realization lies in step 3's space, so con there implies step 1 agrees
        rng = np.random.default_rng(100 + seed)
        problem, prior, slots_r, _, ledgers = random_instance(rng)
        for z in all_values(len(slots_r)):
            led, _ = ledgers(z, (0, 0))
            out = verify(led, prior, problem)
            a1 = step1(led, prior, problem)
            assert z in out.step3.per_action_favor[a1]
            if out.step3.consistent_for is not None:
                assert out.step3.consistent_for == a1

    @pytest.mark.parametrize("seed", range(10))
    def test_mirror_symmetry(self, seed):
        # agent r's step 2 space equals agent r''s step 3 space and the partitions coincide
        rng = np.random.default_rng(200 + seed)
        problem, prior, _, _, ledgers = random_instance(rng)
        a, b = ledgers((0, 1), (1, 1))
        assert step2(a, prior, problem).per_action_favor == step3(b, prior, problem).per_action_favor
        assert step3(a, prior, problem).per_action_favor == step2(b, prior, problem).per_action_favor

    def test_step1_uses_own_readings(self, rng):
        problem, prior, *_ , ledgers = random_instance(rng)
        led, _ = ledgers((1, 1), (0, 0))
        own = belief_from_history(prior, led.common + led.own_unshared, problem.model)
        assert step1(led, prior, problem) == best_action(own, problem)

    def test_cap(self):
        problem = Problem(Grid(3, 3), ((0, 0), (2, 2)), ObsModel(), slot_cap=2)
        led = HistoryLedger(0, (), (), ObsSeqSpace(tuple(Slot(t, 1, 0) for t in range(1, 4))))
        with pytest.raises(EnumerationLimitError):
            verify(led, CellBelief.uniform(9), problem)
        roomy = Problem(Grid(3, 3), ((0, 0), (2, 2)), ObsModel())
        uncapped = verify(led, CellBelief.uniform(9), problem, capped=False)
        assert uncapped.step2.consistent_for == verify(led, CellBelief.uniform(9), roomy).step2.consistent_for
