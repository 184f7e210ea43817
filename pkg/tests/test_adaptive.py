"""Adaptive threshold detector: stationary law, update rule, reference track."""

import numpy as np
import pytest

from crnrx.adaptive import (
    AdaptiveDetectorConfig,
    build_detector_crn,
    build_learning_crn,
    build_single_molecule_crn,
    simulate_threshold_track,
    stationary_on_probability,
    update_threshold,
)
from crnrx.channel import get_scenario, make_frame_plan
from crnrx.crn import ConfigError, merge
from crnrx.engine import SimState, advance


class TestConfig:
    def test_defaults(self):
        c = AdaptiveDetectorConfig()
        assert c.k_on == 5.0 and c.k_off == 5.0 and c.n_W_init == 0

    def test_with_rates(self):
        c = AdaptiveDetectorConfig().with_rates(2.0, 3.0)
        assert (c.k_on, c.k_off) == (2.0, 3.0)
        assert c.k_deg == AdaptiveDetectorConfig().k_deg

    def test_validation(self):
        with pytest.raises(ConfigError):
            AdaptiveDetectorConfig(k_on=0.0)
        with pytest.raises(ConfigError):
            AdaptiveDetectorConfig(n_W_init=-1)


class TestStationaryFormula:
    def test_closed_form(self):
        assert stationary_on_probability(6, 3) == pytest.approx(6 / 9)
        assert stationary_on_probability(6, 3, k_on=1.0, k_off=2.0) == pytest.approx(0.5)
        assert stationary_on_probability(0, 4) == 0.0
        assert stationary_on_probability(4, 0) == 1.0

    def test_no_evidence_defined_as_zero(self):
        assert stationary_on_probability(0, 0) == 0.0

    def test_validation(self):
        with pytest.raises(ConfigError):
            stationary_on_probability(-1, 0)
        with pytest.raises(ConfigError):
            stationary_on_probability(1, 1, k_on=0.0)

    def test_single_molecule_network_agrees(self):
        # simulated Pr[ON] of the one-molecule flipper vs the closed form
        config = AdaptiveDetectorConfig()
        for n_rb, n_w in ((1, 1), (3, 7), (8, 2), (0, 5), (5, 0)):
            net = build_single_molecule_crn(config)
            state = SimState(net, seed=n_rb * 31 + n_w)
            state.set_count("Y", n_rb)
            state.set_count("W", n_w)
            t_end = 3000.0
            frag = advance(state, t_end, species=["Xhat_ON"])
            assert frag.integrals["Xhat_ON"] / t_end == pytest.approx(
                stationary_on_probability(n_rb, n_w), abs=0.02
            )


class TestUpdateRule:
    def test_false_positive_adds(self):
        assert update_threshold(4, 1, 0) == 5

    def test_false_negative_removes(self):
        assert update_threshold(4, 0, 1) == 3

    def test_correct_decisions_hold(self):
        assert update_threshold(4, 0, 0) == 4
        assert update_threshold(4, 1, 1) == 4

    def test_floor_at_zero(self):
        assert update_threshold(0, 0, 1) == 0

    def test_validation(self):
        with pytest.raises(ConfigError):
            update_threshold(-1, 0, 0)
        with pytest.raises(ConfigError):
            update_threshold(0, 2, 0)


class TestDetectorNetworks:
    def test_detector_race_is_winner_take_all(self):
        # fast annihilation leaves only the majority production source standing
        config = AdaptiveDetectorConfig()
        for y, w, on_wins in ((12, 6, True), (3, 9, False)):
            net = build_detector_crn(config)
            state = SimState(net, seed=9)
            state.set_count("Y", y)
            state.set_count("W", w)
            frag = advance(state, 200.0)
            share_on = frag.integrals["XC_ON"] / (
                frag.integrals["XC_ON"] + frag.integrals["XC_OFF"]
            )
            assert (share_on > 0.95) == on_wins
            loser = "XC_OFF" if on_wins else "XC_ON"
            assert state.count(loser) <= 2

    def test_learning_updates_move_one_step(self):
        # with one helper the false-positive pathway adds exactly one weight
        config = AdaptiveDetectorConfig()
        net = merge([build_detector_crn(config), build_learning_crn(config)])
        state = SimState(net, seed=1)
        state.set_count("Y", 12)
        state.set_count("H", 1)
        state.set_count("Xtrue_OFF", 1)
        state.advance_raw(5000.0)
        assert state.count("W") == 1
        assert state.count("H") == 0

    def test_learning_needs_helper(self):
        config = AdaptiveDetectorConfig()
        net = merge([build_detector_crn(config), build_learning_crn(config)])
        state = SimState(net, seed=1)
        state.set_count("Y", 12)
        state.set_count("Xtrue_OFF", 1)
        state.advance_raw(5000.0)
        assert state.count("W") == 0


class TestThresholdTrack:
    def test_matches_manual_replay(self):
        s = get_scenario("S1")
        plan = make_frame_plan(4, 5, 5, np.random.default_rng(1))
        config = AdaptiveDetectorConfig()
        track = simulate_threshold_track(
            s, np.array(plan.symbols), plan.kinds, config, np.random.default_rng(2)
        )
        # replay the update rule from the recorded draws
        w = 0
        ratio = config.k_off / config.k_on
        for i in range(len(plan)):
            assert track.n_W[i] == w
            d = 1 if track.n_rb[i] >= ratio * w else 0
            assert track.decisions[i] == d
            assert track.errors[i] == (d != plan.symbols[i])
            if plan.kinds[i] == "pilot":
                w = update_threshold(w, d, int(plan.symbols[i]))

    def test_updates_only_on_pilots(self):
        s = get_scenario("S1")
        symbols = np.zeros(50, dtype=np.int8)
        track = simulate_threshold_track(
            s, symbols, ["data"] * 50, AdaptiveDetectorConfig(),
            np.random.default_rng(3),
        )
        np.testing.assert_array_equal(track.n_W, 0)

    def test_long_run_reaches_dtmc_stationary_mean(self):
        from crnrx.markov import build_transition_matrix, expected_weight_count, steady_state

        s = get_scenario("S1")
        n = 30_000
        symbols = (np.random.default_rng(4).random(n) < 0.5).astype(np.int8)
        track = simulate_threshold_track(
            s, symbols, ["pilot"] * n, AdaptiveDetectorConfig(),
            np.random.default_rng(5),
        )
        m = build_transition_matrix(s, n_W_total=25)
        target = expected_weight_count(m, steady_state(m))
        assert track.n_W[5000:].mean() == pytest.approx(target, abs=0.25)

    def test_length_mismatch_rejected(self):
        with pytest.raises(ConfigError):
            simulate_threshold_track(
                get_scenario("S1"), np.zeros(3, dtype=np.int8), ["data"] * 2,
                AdaptiveDetectorConfig(), np.random.default_rng(0),
            )
