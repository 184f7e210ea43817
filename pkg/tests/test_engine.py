"""Simulation engine: exact gating, polling invariance, integrals, ensembles."""

import numpy as np
import pytest

from crnrx.crn import (
    ConfigError,
    EventBudgetExceeded,
    ExternalSignalSchedule,
    InvariantViolation,
    Reaction,
    ReactionNetwork,
    Species,
)
from crnrx.engine import SimState, advance, run_ensemble, sample_counts


def two_state(k_f=1.0, k_b=1.0):
    return ReactionNetwork(
        (Species("OFF", 1), Species("ON", 0)),
        (
            Reaction({"OFF": 1}, {"ON": 1}, k_f, name="fwd"),
            Reaction({"ON": 1}, {"OFF": 1}, k_b, name="bwd"),
        ),
    )


def gated_birth():
    return ReactionNetwork(
        (Species("A", 0),),
        (Reaction({}, {"A": 1}, 50.0, gate="ST", name="birth"),),
        (ExternalSignalSchedule("ST", ((1.0, 2.0), (4.0, 5.0))),),
    )


class TestAdvance:
    def test_two_state_occupancy(self):
        state = SimState(two_state(), seed=3)
        frag = advance(state, 2000.0, species=["ON"])
        assert frag.integrals["ON"] / 2000.0 == pytest.approx(0.5, abs=0.02)
        assert frag.n_events > 100

    def test_gated_fires_only_inside_windows(self):
        state = SimState(gated_birth(), seed=1, log_events=True)
        frag = advance(state, 6.0)
        assert frag.n_events > 0
        for t in frag.event_times:
            assert (1.0 <= t < 2.0) or (4.0 <= t < 5.0)
        # expected ~100 events over the two unit windows
        assert frag.integrals["A"] > 0.0

    def test_polling_does_not_change_trajectory(self):
        # advancing through intermediate times is exact: same seed, same path
        a = SimState(two_state(), seed=7)
        a.advance_raw(10.0)
        b = SimState(two_state(), seed=7)
        for t in np.arange(0.5, 10.5, 0.5):
            b.advance_raw(float(t))
        assert a.event_count == b.event_count
        assert a.counts() == b.counts()
        assert a.integrals() == pytest.approx(b.integrals())

    def test_integrals_piecewise_exact(self):
        # pure death from 3: integral of count is sum of count*holding segments
        net = ReactionNetwork(
            (Species("A", 3),), (Reaction({"A": 1}, {}, 1.0),)
        )
        state = SimState(net, seed=0, log_events=True)
        frag = advance(state, 100.0, species=["A"])
        ev_t = list(frag.event_times) + [100.0]
        expect, prev, n = 0.0, 0.0, 3
        for t in ev_t:
            expect += n * (t - prev)
            prev, n = t, n - 1
        assert frag.integrals["A"] == pytest.approx(expect, rel=1e-12)

    def test_time_moves_even_without_events(self):
        net = ReactionNetwork((Species("A", 0),))
        state = SimState(net, seed=0)
        n = state.advance_raw(5.0)
        assert n == 0 and state.t == 5.0

    def test_backwards_target_rejected(self):
        state = SimState(two_state(), seed=0)
        state.advance_raw(1.0)
        with pytest.raises(InvariantViolation):
            state.advance_raw(0.5)


class TestFirstPositive:
    def test_tracks_zero_to_positive(self):
        state = SimState(gated_birth(), seed=2)
        state.advance_raw(0.5)
        assert state.first_positive_times()["A"] == -1.0
        state.advance_raw(3.0)
        t_first = state.first_positive_times()["A"]
        assert 1.0 <= t_first < 2.0

    def test_reset_rearms(self):
        state = SimState(gated_birth(), seed=2)
        state.advance_raw(3.0)
        state.reset_first_positive()
        assert state.first_positive_times()["A"] == -1.0
        state.set_count("A", 0)
        state.advance_raw(6.0)
        t_first = state.first_positive_times()["A"]
        assert 4.0 <= t_first < 5.0

    def test_nonzero_start_not_flagged(self):
        state = SimState(two_state(), seed=0)
        state.advance_raw(0.0)
        assert state.first_positive_times()["OFF"] == -1.0


class TestStateManipulation:
    def test_set_count_and_readback(self):
        state = SimState(two_state(), seed=0)
        state.set_count("ON", 5)
        assert state.count("ON") == 5

    def test_set_count_rejects_negative(self):
        state = SimState(two_state(), seed=0)
        with pytest.raises(InvariantViolation):
            state.set_count("ON", -1)

    def test_unknown_species_rejected(self):
        state = SimState(two_state(), seed=0)
        with pytest.raises(KeyError):
            state.count("NOPE")


class TestGuards:
    def test_event_budget(self):
        net = ReactionNetwork(
            (Species("A", 1),),
            (
                Reaction({"A": 1}, {"A": 2}, 1000.0),
                Reaction({"A": 2}, {"A": 1}, 1000.0),
            ),
        )
        state = SimState(net, seed=0)
        with pytest.raises(EventBudgetExceeded):
            state.advance_raw(1e6, max_events=100)

    def test_conservation_group_violation_detected(self):
        # declared invariant OFF+ON == 2 is false for this network, caught
        # at the very first state check
        with pytest.raises(InvariantViolation):
            SimState(
                two_state(),
                seed=0,
                conservation_groups=((("OFF", "ON"), 2),),
            ).advance_raw(10.0)

    def test_conservation_group_holds(self):
        state = SimState(
            two_state(),
            seed=0,
            conservation_groups=((("OFF", "ON"), 1),),
        )
        state.advance_raw(50.0)
        assert state.count("OFF") + state.count("ON") == 1


class TestSampleCounts:
    def test_snapshot_grid(self):
        state = SimState(gated_birth(), seed=4)
        rows, names = sample_counts(state, [0.5, 2.5, 6.0], species=["A"])
        assert names == ["A"]
        assert rows.shape == (3, 1)
        assert rows[0, 0] == 0
        assert rows[1, 0] >= rows[0, 0]
        assert state.t == 6.0


def _ensemble_worker(index, seed_seq):
    state = SimState(two_state(), seed=seed_seq)
    state.advance_raw(5.0)
    return (index, state.count("ON"), state.event_count)


def _failing_worker(index, seed_seq):
    if index == 2:
        raise ValueError("boom")
    return index


class TestRunEnsemble:
    def test_deterministic_and_ordered(self):
        r1 = run_ensemble(_ensemble_worker, 6, master_seed=42)
        r2 = run_ensemble(_ensemble_worker, 6, master_seed=42)
        assert r1 == r2
        assert [r[0] for r in r1] == list(range(6))
        r3 = run_ensemble(_ensemble_worker, 6, master_seed=43)
        assert r3 != r1

    def test_parallel_matches_serial(self):
        serial = run_ensemble(_ensemble_worker, 4, master_seed=9, workers=1)
        parallel = run_ensemble(_ensemble_worker, 4, master_seed=9, workers=2)
        assert serial == parallel

    def test_worker_failure_propagates(self):
        with pytest.raises(ValueError, match="boom"):
            run_ensemble(_failing_worker, 4, master_seed=0)
