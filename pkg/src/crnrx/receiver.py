"""Fully chemical receiver assembly: timing, phase switches, flip-flop,
helper supply, mode tracking, and the gated detector with pilot learning.

Every block is a small reaction network; `assemble_full_rx` merges them and
attaches the external-signal plan (symbol-timing pulses and mode pulses).
The symbol-interval driver clamps the bound-receptor species at each
interval start and reads the counting-species integrals back out.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

from .adaptive import AdaptiveDetectorConfig
from .crn import (
    ConfigError,
    ExternalSignalSchedule,
    Reaction,
    ReactionNetwork,
    Species,
    merge,
)
from .engine import SimState

__all__ = [
    "ReceiverRates",
    "RxAssembly",
    "IntervalRecord",
    "SIG_TIMING",
    "SIG_PILOT_MODE",
    "SIG_DATA_MODE",
    "build_stopwatch",
    "build_switch",
    "build_flipflop",
    "build_mode_tracker_and_helper",
    "build_gated_detector",
    "build_pilot_learning",
    "conservation_groups",
    "signal_windows_for_plan",
    "assemble_full_rx",
    "run_intervals",
    "p_rel_on",
]

# External signal ids: one timing pulse per symbol interval plus the two
# mode-boundary pulses.
SIG_TIMING = "ST"
SIG_PILOT_MODE = "PM"
SIG_DATA_MODE = "DM"


@dataclass(frozen=True)
class ReceiverRates:
    """Rate constants and pool sizes of the receiver's timing machinery.

    All rates are per normalized time unit; the symbol interval is
    `symbol_period` long and every external pulse lasts `signal_window`.
    """

    # stopwatch: gated activator, activator-driven timer, reset decay
    k_act: float = 10.0
    k_deact: float = 0.1
    k_timer_on: float = 1e-2
    k_timer_off: float = 2e-2
    # bistable phase switches (shared internal rate, per-switch excitation);
    # the recruit feedback loops run below the demote rate so the blank pool
    # built up by the excitation tips the switch promptly (keeps the pre-flip
    # ON minority near zero, which protects the activator pool)
    k_switch_internal: float = 1.0
    k_switch_recruit: float = 0.6
    k_det_excite: float = 0.8
    k_det_reset: float = 0.5
    k_reset_excite: float = 0.1
    k_reset_off: float = 10.0
    # mode tracking
    k_pilot_mode: float = 100.0
    k_data_mode: float = 100.0
    # helper supply (at most one helper molecule survives)
    k_helper: float = 0.1
    k_helper_decay: float = 500.0
    # pilot learning
    k_learn_add: float = 1e-4
    k_learn_remove: float = 1e-4
    # flip-flop tracking the alternating pilot symbol
    k_ff_toggle: float = 50.0
    k_ff_relax: float = 10.0
    k_ff_inhibit_set: float = 1e5
    k_ff_inhibit_decay: float = 10.0
    k_ff_align: float = 10.0
    # counting-species cleanup during the reset phase
    k_on_clean: float = 0.1
    k_off_clean: float = 0.1
    # pool sizes
    n_act: int = 10
    n_timer: int = 250
    n_mode: int = 10
    n_det: int = 50
    n_reset: int = 50
    # interval timing
    symbol_period: float = 15.0
    signal_window: float = 0.5

    def __post_init__(self) -> None:
        for name in (
            "k_act", "k_deact", "k_timer_on", "k_timer_off",
            "k_switch_internal", "k_switch_recruit", "k_det_excite",
            "k_det_reset",
            "k_reset_excite", "k_reset_off", "k_pilot_mode", "k_data_mode",
            "k_helper", "k_helper_decay", "k_learn_add", "k_learn_remove",
            "k_ff_toggle", "k_ff_relax", "k_ff_inhibit_set",
            "k_ff_inhibit_decay", "k_ff_align", "k_on_clean", "k_off_clean",
        ):
            v = getattr(self, name)
            if not (math.isfinite(v) and v >= 0):
                raise ConfigError(f"{name} must be finite and >= 0, got {v}")
        for name in ("n_act", "n_timer", "n_mode", "n_det", "n_reset"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if not (self.symbol_period > 0 and self.signal_window > 0):
            raise ConfigError("symbol_period and signal_window must be > 0")
        if self.signal_window >= self.symbol_period:
            raise ConfigError("signal_window must be shorter than symbol_period")

    def with_updates(self, **kwargs) -> "ReceiverRates":
        return replace(self, **kwargs)


def _empty_signals(ids: Iterable[str]) -> tuple[ExternalSignalSchedule, ...]:
    return tuple(ExternalSignalSchedule(sid) for sid in ids)


def build_stopwatch(rates: ReceiverRates = ReceiverRates()) -> ReactionNetwork:
    """Timer block: a gated activator pool drives timer molecules ON.

    Each timing pulse converts the activator pool A_OFF -> A_ON; active
    activators produce T_ON from the timer pool, so n_T_ON grows roughly
    linearly within an interval.  The reset switch later deactivates the
    activators and drains the timer.
    """
    species = (
        Species("A_ON", 0),
        Species("A_OFF", rates.n_act),
        Species("T_ON", 0),
        Species("T_OFF", rates.n_timer),
        Species("R_ON", rates.n_reset),
    )
    reactions = (
        Reaction({"A_OFF": 1}, {"A_ON": 1}, rates.k_act,
                 gate=SIG_TIMING, name="activate"),
        Reaction({"A_ON": 1}, {"A_OFF": 1}, rates.k_deact,
                 catalysts={"R_ON": 1}, name="deactivate"),
        Reaction({"T_OFF": 1}, {"T_ON": 1}, rates.k_timer_on,
                 catalysts={"A_ON": 1}, name="timer_up"),
        Reaction({"T_ON": 1}, {"T_OFF": 1}, rates.k_timer_off,
                 catalysts={"R_ON": 1}, name="timer_down"),
    )
    return ReactionNetwork(species, reactions, _empty_signals([SIG_TIMING]))


def _majority_core(prefix: str, k_demote: float,
                   k_recruit: float) -> tuple[Reaction, ...]:
    """Bistable majority vote on a three-state pool (ON, OFF, blank).

    Opposite states demote each other to blank; each state recruits blanks
    to itself.  Either consensus state is stable; a minority is consumed
    quickly.  The blank two-step keeps the pool size conserved.  Recruiting
    slower than demoting lets an external excitation accumulate blanks, so
    a driven flip tips decisively instead of stalling at the threshold.
    """
    on, off, blank = f"{prefix}_ON", f"{prefix}_OFF", f"{prefix}_B"
    return (
        Reaction({off: 1}, {blank: 1}, k_demote, catalysts={on: 1},
                 name=f"{prefix.lower()}_demote_off"),
        Reaction({on: 1}, {blank: 1}, k_demote, catalysts={off: 1},
                 name=f"{prefix.lower()}_demote_on"),
        Reaction({blank: 1}, {on: 1}, k_recruit, catalysts={on: 1},
                 name=f"{prefix.lower()}_recruit_on"),
        Reaction({blank: 1}, {off: 1}, k_recruit, catalysts={off: 1},
                 name=f"{prefix.lower()}_recruit_off"),
    )


def build_switch(kind: str, rates: ReceiverRates = ReceiverRates()) -> ReactionNetwork:
    """Bistable phase switch flipped by the timer level.

    `kind="detection"` starts all-OFF and is excited at the higher rate, so
    it flips first and opens the detection window; `kind="reset"` starts
    all-ON (the receiver boots mid-reset), is drained by each timing pulse,
    and re-flips later in the interval to start cleanup.
    """
    if kind == "detection":
        prefix, pool = "D", rates.n_det
        species = (
            Species("D_ON", 0),
            Species("D_OFF", pool),
            Species("D_B", 0),
            Species("T_ON", 0),
            Species("R_ON", rates.n_reset),
        )
        # excitation runs through the blank state: the driven pool gathers
        # in D_B without feeding the opposing feedback loop, then converts
        extra = (
            Reaction({"D_OFF": 1}, {"D_B": 1}, rates.k_det_excite,
                     catalysts={"T_ON": 1}, name="d_excite"),
            Reaction({"D_B": 1}, {"D_ON": 1}, rates.k_det_excite,
                     catalysts={"T_ON": 1}, name="d_excite2"),
            Reaction({"D_ON": 1}, {"D_OFF": 1}, rates.k_det_reset,
                     catalysts={"R_ON": 1}, name="d_reset"),
        )
        signals: tuple[str, ...] = ()
    elif kind == "reset":
        prefix, pool = "R", rates.n_reset
        species = (
            Species("R_ON", pool),
            Species("R_OFF", 0),
            Species("R_B", 0),
            Species("T_ON", 0),
        )
        extra = (
            Reaction({"R_OFF": 1}, {"R_B": 1}, rates.k_reset_excite,
                     catalysts={"T_ON": 1}, name="r_excite"),
            Reaction({"R_B": 1}, {"R_ON": 1}, rates.k_reset_excite,
                     catalysts={"T_ON": 1}, name="r_excite2"),
            Reaction({"R_ON": 1}, {"R_OFF": 1}, rates.k_reset_off,
                     gate=SIG_TIMING, name="r_drain"),
        )
        signals = (SIG_TIMING,)
    else:
        raise ConfigError(f"unknown switch kind {kind!r}")
    reactions = _majority_core(prefix, rates.k_switch_internal,
                               rates.k_switch_recruit) + extra
    return ReactionNetwork(species, reactions, _empty_signals(signals))


def build_flipflop(rates: ReceiverRates = ReceiverRates()) -> ReactionNetwork:
    """Tracks the alternating pilot bit: toggles once per timing pulse.

    The single latch molecule L_ON is consumed by a toggle, which bounds
    toggles at one per pulse structurally.  The inhibitor I blocks latch
    recovery until the pulse has passed, and the pilot-mode pulse forces the
    tracked bit to 0 to re-align with the start of a pilot block.
    """
    species = (
        Species("Xtrue_ON", 1),
        Species("Xtrue_OFF", 0),
        Species("L_ON", 1),
        Species("L_OFF", 0),
        Species("I_ON", 1),
        Species("I_OFF", 0),
    )
    reactions = (
        Reaction({"Xtrue_ON": 1, "L_ON": 1}, {"Xtrue_OFF": 1, "L_OFF": 1},
                 rates.k_ff_toggle, gate=SIG_TIMING, name="toggle_down"),
        Reaction({"Xtrue_OFF": 1, "L_ON": 1}, {"Xtrue_ON": 1, "L_OFF": 1},
                 rates.k_ff_toggle, gate=SIG_TIMING, name="toggle_up"),
        Reaction({"L_OFF": 1}, {"L_ON": 1}, rates.k_ff_relax,
                 catalysts={"I_OFF": 1}, name="latch_recover"),
        Reaction({"I_OFF": 1}, {"I_ON": 1}, rates.k_ff_inhibit_set,
                 gate=SIG_TIMING, name="inhibit_set"),
        Reaction({"I_ON": 1}, {"I_OFF": 1}, rates.k_ff_inhibit_decay,
                 name="inhibit_decay"),
        Reaction({"Xtrue_ON": 1}, {"Xtrue_OFF": 1}, rates.k_ff_align,
                 gate=SIG_PILOT_MODE, name="pilot_align"),
    )
    return ReactionNetwork(
        species, reactions, _empty_signals([SIG_TIMING, SIG_PILOT_MODE])
    )


def build_mode_tracker_and_helper(
    rates: ReceiverRates = ReceiverRates(),
) -> ReactionNetwork:
    """Mode pool P plus the per-interval helper molecule H.

    Mode pulses convert the whole pool between pilot and data form.  In
    pilot mode each timing pulse produces helpers at a low rate while fast
    pair annihilation keeps at most one alive, so a weight update consuming
    H can happen at most once per interval.
    """
    species = (
        Species("P_pilot", rates.n_mode),
        Species("P_data", 0),
        Species("H", 0),
    )
    reactions = (
        Reaction({"P_data": 1}, {"P_pilot": 1}, rates.k_pilot_mode,
                 gate=SIG_PILOT_MODE, name="to_pilot_mode"),
        Reaction({"P_pilot": 1}, {"P_data": 1}, rates.k_data_mode,
                 gate=SIG_DATA_MODE, name="to_data_mode"),
        Reaction({}, {"H": 1}, rates.k_helper, catalysts={"P_pilot": 1},
                 gate=SIG_TIMING, name="helper_make"),
        Reaction({"H": 2}, {"H": 1}, rates.k_helper_decay,
                 name="helper_decay"),
    )
    return ReactionNetwork(
        species,
        reactions,
        _empty_signals([SIG_TIMING, SIG_PILOT_MODE, SIG_DATA_MODE]),
    )


def build_gated_detector(
    detector: AdaptiveDetectorConfig,
    rates: ReceiverRates = ReceiverRates(),
) -> ReactionNetwork:
    """Counting detector gated by the detection switch, plus cleanup.

    Identical to the standalone counting detector except both production
    reactions additionally require D_ON, so counting only runs during the
    detection phase, and the reset switch catalyzes counting-species
    removal afterwards.
    """
    species = (
        Species("Y", 0),
        Species("W", detector.n_W_init),
        Species("XC_ON", 0),
        Species("XC_OFF", 0),
        Species("D_ON", 0),
        Species("R_ON", rates.n_reset),
    )
    reactions = (
        Reaction({}, {"XC_ON": 1}, detector.k_on,
                 catalysts={"Y": 1, "D_ON": 1}, name="produce_on"),
        Reaction({}, {"XC_OFF": 1}, detector.k_off,
                 catalysts={"W": 1, "D_ON": 1}, name="produce_off"),
        Reaction({"XC_ON": 1, "XC_OFF": 1}, {}, detector.k_deg,
                 name="annihilate"),
        Reaction({"XC_ON": 1}, {}, rates.k_on_clean,
                 catalysts={"R_ON": 1}, name="clean_on"),
        Reaction({"XC_OFF": 1}, {}, rates.k_off_clean,
                 catalysts={"R_ON": 1}, name="clean_off"),
    )
    return ReactionNetwork(species, reactions)


def build_pilot_learning(
    detector: AdaptiveDetectorConfig,
    rates: ReceiverRates = ReceiverRates(),
) -> ReactionNetwork:
    """Weight updates driven by detection errors during pilot intervals.

    Same error rules as the standalone learning block, but additionally
    catalyzed by the detection switch and the pilot-mode pool, so updates
    happen only in the detection phase of pilot intervals.  The mode pool
    multiplies the propensity roughly 500-fold relative to the bare block,
    which makes an update nearly certain on a clear detection error.

    Both updates are also held off by the pulse inhibitor (catalyst I_OFF,
    absent during each timing pulse): a helper consumed while the pulse is
    still open could be replaced by the pulse's own helper production,
    allowing two updates in one interval.  Blocking updates until the
    inhibitor relaxes caps consumption at the single available helper, so
    the weight moves at most one step per interval.
    """
    species = (
        Species("W", detector.n_W_init),
        Species("XC_ON", 0),
        Species("XC_OFF", 0),
        Species("H", 0),
        Species("Xtrue_ON", 1),
        Species("Xtrue_OFF", 0),
        Species("D_ON", 0),
        Species("I_OFF", 0),
        Species("P_pilot", rates.n_mode),
    )
    reactions = (
        Reaction(
            {"H": 1}, {"W": 1}, rates.k_learn_add,
            catalysts={"XC_ON": 1, "Xtrue_OFF": 1, "D_ON": 1, "P_pilot": 1,
                       "I_OFF": 1},
            name="learn_add_W",
        ),
        Reaction(
            {"W": 1, "H": 1}, {}, rates.k_learn_remove,
            catalysts={"XC_OFF": 1, "Xtrue_ON": 1, "D_ON": 1, "P_pilot": 1,
                       "I_OFF": 1},
            name="learn_remove_W",
        ),
    )
    return ReactionNetwork(species, reactions)


def conservation_groups(
    rates: ReceiverRates = ReceiverRates(),
) -> tuple[tuple[tuple[str, ...], int], ...]:
    """Conserved pools of the assembled receiver, checked every event."""
    return (
        (("A_ON", "A_OFF"), rates.n_act),
        (("T_ON", "T_OFF"), rates.n_timer),
        (("P_pilot", "P_data"), rates.n_mode),
        (("D_ON", "D_OFF", "D_B"), rates.n_det),
        (("R_ON", "R_OFF", "R_B"), rates.n_reset),
        (("L_ON", "L_OFF"), 1),
        (("I_ON", "I_OFF"), 1),
        (("Xtrue_ON", "Xtrue_OFF"), 1),
    )


def signal_windows_for_plan(
    kinds: Sequence[str],
    rates: ReceiverRates = ReceiverRates(),
    realign_every: int | None = None,
) -> dict[str, tuple[tuple[float, float], ...]]:
    """Signal windows for a per-symbol plan of "pilot"/"data" kinds.

    A timing pulse opens at every interval start.  A pilot-mode pulse is
    co-applied at each data-to-pilot boundary (including a pilot start at
    symbol 0) and a data-mode pulse at each pilot-to-data boundary.  For
    long pilot-only runs, `realign_every=m` adds a pilot-mode pulse every
    m-th symbol to keep the flip-flop aligned.
    """
    period, window = rates.symbol_period, rates.signal_window
    st, pm, dm = [], [], []
    prev = None
    for i, kind in enumerate(kinds):
        if kind not in ("pilot", "data"):
            raise ConfigError(f"symbol {i}: kind must be pilot or data, got {kind!r}")
        t0 = i * period
        st.append((t0, t0 + window))
        boundary = kind != prev
        realign = (
            kind == "pilot" and realign_every is not None and i % realign_every == 0
        )
        if (boundary and kind == "pilot") or realign:
            pm.append((t0, t0 + window))
        if boundary and kind == "data":
            dm.append((t0, t0 + window))
        prev = kind
    return {
        SIG_TIMING: tuple(st),
        SIG_PILOT_MODE: tuple(pm),
        SIG_DATA_MODE: tuple(dm),
    }


@dataclass(frozen=True)
class RxAssembly:
    """The merged receiver network with its signal plan and parameters."""

    network: ReactionNetwork
    rates: ReceiverRates
    detector: AdaptiveDetectorConfig

    def initial_counts(self) -> dict[str, int]:
        return self.network.initial_counts()

    def conservation_groups(self) -> tuple[tuple[tuple[str, ...], int], ...]:
        return conservation_groups(self.rates)

    def new_state(
        self,
        seed,
        backend: str | None = None,
        check_conservation: bool = True,
        log_events: bool = False,
    ) -> SimState:
        return SimState(
            self.network,
            seed=seed,
            backend=backend,
            check_conservation=check_conservation,
            log_events=log_events,
            conservation_groups=self.conservation_groups(),
        )


def _with_signals(
    network: ReactionNetwork,
    windows: Mapping[str, Sequence[tuple[float, float]]],
) -> ReactionNetwork:
    schedules = []
    for sig in network.signals:
        schedules.append(
            ExternalSignalSchedule(
                sig.signal_id, tuple(windows.get(sig.signal_id, ()))
            )
        )
    return ReactionNetwork(network.species, network.reactions, tuple(schedules))


def assemble_full_rx(
    detector: AdaptiveDetectorConfig = AdaptiveDetectorConfig(),
    rates: ReceiverRates = ReceiverRates(),
    signal_windows: Mapping[str, Sequence[tuple[float, float]]] | None = None,
) -> RxAssembly:
    """Merge all receiver blocks and attach the external-signal plan.

    With no plan supplied the signals stay empty (useful for inspecting the
    network); drivers normally pass `signal_windows_for_plan(...)` output.
    """
    network = merge(
        [
            build_stopwatch(rates),
            build_switch("detection", rates),
            build_switch("reset", rates),
            build_flipflop(rates),
            build_mode_tracker_and_helper(rates),
            build_gated_detector(detector, rates),
            build_pilot_learning(detector, rates),
        ]
    )
    if signal_windows is not None:
        network = _with_signals(network, signal_windows)
    return RxAssembly(network=network, rates=rates, detector=detector)


def p_rel_on(int_on: float, int_off: float) -> float:
    """Fraction of counting-species exposure that was ON; 1/2 with no evidence."""
    if int_on < 0 or int_off < 0:
        raise ConfigError("integrals must be >= 0")
    total = int_on + int_off
    if total == 0.0:
        return 0.5
    return int_on / total


# Soft errors above this are flagged in per-interval logs.
ERROR_FLAG_THRESHOLD = 1e-3

# Poll grid and give-up horizon for spotting the detection switch's majority
# crossing inside an interval (the crossing sits near 1 s; the horizon only
# matters in the rare interval where the switch fails to flip).
DETECT_POLL_STEP = 0.1
DETECT_POLL_HORIZON = 6.0


@dataclass(frozen=True)
class IntervalRecord:
    """Readout of one symbol interval of the assembled receiver.

    int_on/int_off are the counting-species time integrals over the
    detection phase: from the detection switch's majority crossing
    (t_detect_flip) to the reset switch's majority crossing (t_reset_flip),
    both relative to the interval start (-1 if never crossed, in which case
    the readout falls back to the poll horizon / interval end).  The
    first_*_on times are the first 0-to-positive production events of the
    two switch outputs, also relative to the interval start (-1 = never).
    """

    index: int
    kind: str
    x: int
    n_rb: int
    int_on: float
    int_off: float
    n_w_end: int
    p_rel_on: float
    soft_error: float
    error_flag: bool
    n_timer_on_start: int
    t_detect_flip: float
    t_reset_flip: float
    n_xc_end: int
    first_detect_on: float
    first_reset_on: float


def run_intervals(
    state: SimState,
    symbols: Iterable[tuple[str, int, int]],
    rates: ReceiverRates = ReceiverRates(),
    max_events_per_interval: int = 500_000_000,
) -> list[IntervalRecord]:
    """Drive the assembled receiver through (kind, x, n_rb) symbol intervals.

    The state must sit at an interval boundary of the signal plan the
    network was assembled with.  Each interval clamps Y to the drawn
    bound-receptor count, advances one symbol period, and reads the
    counting-species integrals over the detection phase back out.  The
    phase runs from the detection switch's majority crossing to the reset
    switch's majority crossing, both found by polling on a coarse grid;
    bounding the readout there keeps both the pre-flip skirmish of the
    counting war and the slow straggler production of the reset tail out
    of p_rel.
    """
    period = rates.symbol_period
    records: list[IntervalRecord] = []
    base_t = state.t
    if abs(base_t / period - round(base_t / period)) > 1e-9 and base_t != 0.0:
        raise ConfigError(f"state time {base_t} is not an interval boundary")
    start_index = round(base_t / period)
    names = ("XC_ON", "XC_OFF")
    d_major = (rates.n_det + 1) // 2
    r_major = (rates.n_reset + 1) // 2
    for offset, (kind, x, n_rb) in enumerate(symbols):
        idx = start_index + offset
        t_start = idx * period
        t_end = t_start + period
        if x not in (0, 1):
            raise ConfigError(f"symbol {idx}: x must be 0 or 1, got {x}")
        if n_rb < 0:
            raise ConfigError(f"symbol {idx}: n_rb must be >= 0")
        n_timer_start = state.count("T_ON")
        state.set_count("Y", int(n_rb))
        state.reset_first_positive()
        t_flip_d = -1.0
        t = t_start
        while t < t_end and t - t_start < DETECT_POLL_HORIZON:
            t = min(t + DETECT_POLL_STEP, t_end)
            state.advance_raw(t, max_events=max_events_per_interval)
            if state.count("D_ON") >= d_major:
                t_flip_d = t - t_start
                break
        base = state.integrals(names)
        t_flip_r = -1.0
        while t < t_end:
            if state.count("R_ON") >= r_major:
                t_flip_r = t - t_start
                break
            t = min(t + DETECT_POLL_STEP, t_end)
            state.advance_raw(t, max_events=max_events_per_interval)
        cur = state.integrals(names)
        if t < t_end:
            state.advance_raw(t_end, max_events=max_events_per_interval)
        int_on = cur["XC_ON"] - base["XC_ON"]
        int_off = cur["XC_OFF"] - base["XC_OFF"]
        first = state.first_positive_times()
        rel = lambda t: t - t_start if t >= 0.0 else -1.0
        p = p_rel_on(int_on, int_off)
        soft = abs(x - p)
        records.append(
            IntervalRecord(
                index=idx,
                kind=kind,
                x=int(x),
                n_rb=int(n_rb),
                int_on=float(int_on),
                int_off=float(int_off),
                n_w_end=state.count("W"),
                p_rel_on=float(p),
                soft_error=float(soft),
                error_flag=bool(soft > ERROR_FLAG_THRESHOLD),
                n_timer_on_start=int(n_timer_start),
                t_detect_flip=float(t_flip_d),
                t_reset_flip=float(t_flip_r),
                n_xc_end=state.count("XC_ON") + state.count("XC_OFF"),
                first_detect_on=float(rel(first["D_ON"])),
                first_reset_on=float(rel(first["R_ON"])),
            )
        )
    return records
