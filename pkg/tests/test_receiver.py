"""Assembled chemical receiver: blocks, signal plans, interval readouts."""

import numpy as np
import pytest

from crnrx.adaptive import AdaptiveDetectorConfig
from crnrx.crn import ConfigError, ExternalSignalSchedule
from crnrx.engine import SimState
from crnrx.receiver import (
    SIG_DATA_MODE,
    SIG_PILOT_MODE,
    SIG_TIMING,
    ReceiverRates,
    assemble_full_rx,
    build_flipflop,
    build_stopwatch,
    build_switch,
    p_rel_on,
    run_intervals,
    signal_windows_for_plan,
)

RATES = ReceiverRates()
DETECTOR = AdaptiveDetectorConfig()


def make_assembly(kinds, realign_every=None):
    windows = signal_windows_for_plan(kinds, RATES, realign_every=realign_every)
    return assemble_full_rx(DETECTOR, RATES, windows)


class TestReceiverRates:
    def test_defaults_sane(self):
        assert RATES.symbol_period == 15.0
        assert RATES.signal_window == 0.5
        assert RATES.n_timer == 250

    def test_with_updates(self):
        r = RATES.with_updates(k_act=20.0)
        assert r.k_act == 20.0 and r.k_deact == RATES.k_deact

    def test_validation(self):
        with pytest.raises(ConfigError):
            ReceiverRates(k_act=-1.0)
        with pytest.raises(ConfigError):
            ReceiverRates(n_det=0)
        with pytest.raises(ConfigError):
            ReceiverRates(signal_window=20.0, symbol_period=15.0)


class TestPRelOn:
    def test_ratio(self):
        assert p_rel_on(3.0, 1.0) == 0.75

    def test_no_evidence_is_half(self):
        assert p_rel_on(0.0, 0.0) == 0.5

    def test_one_sided(self):
        assert p_rel_on(0.0, 2.0) == 0.0
        assert p_rel_on(2.0, 0.0) == 1.0

    def test_negative_rejected(self):
        with pytest.raises(ConfigError):
            p_rel_on(-1.0, 0.0)


class TestSignalWindows:
    def test_mixed_plan_layout(self):
        kinds = ["pilot", "pilot", "data", "data", "pilot", "data"]
        w = signal_windows_for_plan(kinds, RATES)
        period, win = RATES.symbol_period, RATES.signal_window
        assert w[SIG_TIMING] == tuple(
            (i * period, i * period + win) for i in range(6)
        )
        assert w[SIG_PILOT_MODE] == ((0.0, win), (4 * period, 4 * period + win))
        assert w[SIG_DATA_MODE] == ((2 * period, 2 * period + win),
                                    (5 * period, 5 * period + win))

    def test_realignment_pulses(self):
        kinds = ["pilot"] * 6
        w = signal_windows_for_plan(kinds, RATES, realign_every=2)
        starts = [iv[0] for iv in w[SIG_PILOT_MODE]]
        assert starts == [0.0, 2 * 15.0, 4 * 15.0]

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            signal_windows_for_plan(["pilot", "noise"], RATES)


class TestAssembly:
    def test_initial_counts(self):
        counts = make_assembly(["pilot"]).initial_counts()
        expected = {
            "A_ON": 0, "A_OFF": 10, "T_ON": 0, "T_OFF": 250,
            "P_pilot": 10, "P_data": 0, "D_ON": 0, "D_OFF": 50, "D_B": 0,
            "R_ON": 50, "R_OFF": 0, "R_B": 0, "L_ON": 1, "L_OFF": 0,
            "I_ON": 1, "I_OFF": 0, "Xtrue_ON": 1, "Xtrue_OFF": 0,
            "W": 0, "XC_ON": 0, "XC_OFF": 0, "H": 0, "Y": 0,
        }
        assert counts == expected

    def test_conservation_groups_match_pools(self):
        asm = make_assembly(["pilot"])
        counts = asm.initial_counts()
        for names, total in asm.conservation_groups():
            assert sum(counts[n] for n in names) == total

    def test_empty_plan_keeps_signals_empty(self):
        asm = assemble_full_rx(DETECTOR, RATES)
        assert all(sig.intervals == () for sig in asm.network.signals)


class TestStopwatch:
    def test_timer_rises_only_after_pulse(self):
        from crnrx.receiver import _with_signals

        # with the reset switch off the pulse-activated pool drives T up
        net = _with_signals(build_stopwatch(RATES), {SIG_TIMING: ((0.0, 0.5),)})
        state = SimState(net, seed=0)
        state.set_count("R_ON", 0)
        state.advance_raw(10.0)
        assert state.count("T_ON") > 50

    def test_reset_switch_drains_timer(self):
        from crnrx.receiver import _with_signals

        net = _with_signals(build_stopwatch(RATES), {SIG_TIMING: ()})
        state = SimState(net, seed=1)
        state.set_count("A_ON", 10)
        state.set_count("A_OFF", 0)
        state.set_count("T_ON", 200)
        state.set_count("T_OFF", 50)
        state.advance_raw(20.0)
        # R_ON deactivates the activators and pulls the timer back down
        assert state.count("A_ON") == 0
        assert state.count("T_ON") < 20

    def test_no_pulse_no_rise(self):
        from crnrx.receiver import _with_signals

        net = _with_signals(build_stopwatch(RATES), {SIG_TIMING: ()})
        state = SimState(net, seed=2)
        state.advance_raw(10.0)
        assert state.count("T_ON") == 0


class TestSwitches:
    def test_detection_switch_bistable_without_drive(self):
        net = build_switch("detection", RATES)
        state = SimState(net, seed=1)
        state.advance_raw(15.0)
        assert state.count("D_ON") == 0
        net2 = build_switch("detection", RATES)
        state2 = SimState(net2, seed=2)
        state2.set_count("D_ON", RATES.n_det)
        state2.set_count("D_OFF", 0)
        state2.set_count("R_ON", 0)
        state2.advance_raw(15.0)
        assert state2.count("D_ON") == RATES.n_det

    def test_detection_switch_flips_under_timer_drive(self):
        net = build_switch("detection", RATES)
        state = SimState(net, seed=3)
        state.set_count("T_ON", 40)
        state.set_count("R_ON", 0)
        state.advance_raw(6.0)
        assert state.count("D_ON") > RATES.n_det // 2

    def test_unknown_kind_rejected(self):
        with pytest.raises(ConfigError):
            build_switch("sideways")


class TestFlipflop:
    def test_toggles_once_per_pulse(self):
        pulses = tuple((15.0 * i, 15.0 * i + 0.5) for i in range(4))
        net = build_flipflop(RATES)
        net = net.__class__(
            net.species, net.reactions,
            (ExternalSignalSchedule(SIG_TIMING, pulses),
             ExternalSignalSchedule(SIG_PILOT_MODE, ())),
        )
        state = SimState(net, seed=4)
        expected = 1
        for i in range(4):
            state.advance_raw(15.0 * i + 14.0)
            expected = 1 - expected
            assert state.count("Xtrue_ON") == expected

    def test_pilot_pulse_realigns_to_zero(self):
        net = build_flipflop(RATES)
        net = net.__class__(
            net.species, net.reactions,
            (ExternalSignalSchedule(SIG_TIMING, ()),
             ExternalSignalSchedule(SIG_PILOT_MODE, ((0.0, 0.5),))),
        )
        state = SimState(net, seed=5)
        assert state.counts()["Xtrue_ON"] == 1
        state.advance_raw(2.0)
        assert state.count("Xtrue_ON") == 0


def run_plan(kinds, xs, rbs, seed=0, realign_every=None):
    asm = make_assembly(kinds, realign_every=realign_every)
    state = asm.new_state(seed)
    return run_intervals(state, list(zip(kinds, xs, rbs)), RATES), state


class TestRunIntervals:
    def test_record_fields_sane(self):
        kinds = ["pilot", "pilot"]
        records, _ = run_plan(kinds, [0, 1], [4, 20])
        assert [r.index for r in records] == [0, 1]
        for r in records:
            assert 0.0 <= r.p_rel_on <= 1.0
            assert r.soft_error == abs(r.x - r.p_rel_on)
            assert r.int_on >= 0.0 and r.int_off >= 0.0
            assert 0.0 < r.t_detect_flip < 6.0
            assert r.t_detect_flip < r.t_reset_flip <= 15.0

    def test_seed_determinism(self):
        kinds = ["pilot", "pilot", "data"]
        r1, _ = run_plan(kinds, [0, 1, 1], [4, 20, 20], seed=6)
        r2, _ = run_plan(kinds, [0, 1, 1], [4, 20, 20], seed=6)
        assert r1 == r2
        r3, _ = run_plan(kinds, [0, 1, 1], [4, 20, 20], seed=7)
        assert r1 != r3

    def test_clear_symbols_decided_correctly(self):
        # with a pre-trained weight pool, receptor counts far on either side
        # of the threshold give saturated readouts
        kinds = ["pilot"] * 4
        detector = AdaptiveDetectorConfig(n_W_init=10)
        windows = signal_windows_for_plan(kinds, RATES)
        asm = assemble_full_rx(detector, RATES, windows)
        state = asm.new_state(0)
        records = run_intervals(
            state, list(zip(kinds, [0, 1, 0, 1], [2, 28, 1, 25])), RATES
        )
        for r in records:
            assert r.soft_error < 0.2, (r.index, r.p_rel_on)

    def test_weight_moves_at_most_one_per_interval(self):
        # obvious false positives on x=0 pilots push the weight up
        kinds = ["pilot"] * 6
        records, _ = run_plan(kinds, [0, 1] * 3, [25] * 6, seed=8)
        w_prev = 0
        for r in records:
            assert abs(r.n_w_end - w_prev) <= 1
            w_prev = r.n_w_end
        assert records[-1].n_w_end >= 1

    def test_no_learning_during_data_intervals(self):
        kinds = ["data"] * 5
        records, _ = run_plan(kinds, [0] * 5, [25] * 5, seed=9)
        assert all(r.n_w_end == 0 for r in records)

    def test_reset_completeness_and_phase_order(self):
        kinds = ["pilot"] * 8
        records, _ = run_plan(kinds, [0, 1] * 4, [10, 18] * 4, seed=10)
        for r in records[1:]:
            assert r.n_timer_on_start < 5
        d = np.median([r.first_detect_on for r in records])
        rr = np.median([r.first_reset_on for r in records])
        assert 0.0 < d < rr

    def test_bad_inputs_rejected(self):
        asm = make_assembly(["pilot"])
        state = asm.new_state(0)
        with pytest.raises(ConfigError):
            run_intervals(state, [("pilot", 2, 0)], RATES)
        state2 = asm.new_state(0)
        with pytest.raises(ConfigError):
            run_intervals(state2, [("pilot", 0, -1)], RATES)

    def test_off_boundary_state_rejected(self):
        asm = make_assembly(["pilot", "pilot"])
        state = asm.new_state(0)
        state.advance_raw(3.0)
        with pytest.raises(ConfigError):
            run_intervals(state, [("pilot", 0, 0)], RATES)
