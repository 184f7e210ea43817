"""Desk-scale experiment harness over the receiver, channel, and baselines.

Each experiment kind turns a configuration into one or two CSV tables with
the analytical baseline columns computed by the same code paths the tests
use.  Outputs are deterministic: the master seed fixes every draw, results
are aggregated in realization order, and floats are formatted with a fixed
format string, so identical configurations produce byte-identical files for
any worker count.
"""

from __future__ import annotations

import functools
import os
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python < 3.11
    import tomli as tomllib

from .adaptive import (
    AdaptiveDetectorConfig,
    simulate_threshold_track,
    update_threshold,
)
from .bm import (
    DEFAULT_BURN_IN,
    DEFAULT_GIBBS_LEN,
    DEFAULT_LEARNING_RATE,
    DEFAULT_TRAIN_STEPS,
    evaluate_ber,
    init_bm,
    make_training_set,
    train,
)
from .channel import (
    ChannelScenario,
    draw_bound_receptors,
    draw_received_concentration,
    draw_symbols_and_receptors,
    get_scenario,
    make_frame_plan,
    map_ber,
    map_threshold,
    pilot_sequence,
)
from .crn import ConfigError, EventBudgetExceeded, InvariantViolation, NumericalError
from .engine import run_ensemble
from .markov import (
    build_transition_matrix,
    expected_ber,
    expected_weight_count,
    piecewise_transient,
    steady_state,
    transient_curves,
)
from .receiver import (
    ReceiverRates,
    assemble_full_rx,
    p_rel_on,
    run_intervals,
    signal_windows_for_plan,
)

__all__ = [
    "EXPERIMENT_KINDS",
    "OUTPUT_FILES",
    "ExperimentConfig",
    "Table",
    "load_config",
    "build_config",
    "compute_p_rel_on",
    "hard_decision",
    "run_frames_experiment",
    "run_time_variant_experiment",
    "run_bm_study",
    "run_threshold_learning",
    "run_single_interval",
    "run_baseline",
    "run_experiment",
    "render_report",
    "write_table",
]

EXPERIMENT_KINDS = (
    "threshold-learning",
    "single-interval",
    "time-variant",
    "frames",
    "bm-study",
)

OUTPUT_FILES = {
    "frames": ("frames.csv",),
    "time-variant": ("time_variant.csv",),
    "bm-study": ("bm_study.csv",),
    "threshold-learning": ("threshold_learning.csv",),
    "single-interval": ("single_interval_records.csv", "single_interval_trace.csv"),
}

FLOAT_FORMAT = "%.12g"


def compute_p_rel_on(int_on: float, int_off: float) -> float:
    """Fraction of counting-species exposure that was ON; 1/2 with no evidence."""
    return p_rel_on(int_on, int_off)


def hard_decision(p: float) -> int:
    """Bit decided from the relative ON exposure.

    Strictly above 1/2 decides ON: the no-evidence readout (both integrals
    zero, p = 1/2 by convention) decides OFF, since with no counting
    molecules produced there is nothing to call ON.  Evidence-bearing
    intervals give a continuous ratio, so exact halves do not otherwise
    occur.
    """
    return 1 if p > 0.5 else 0


# ---------------------------------------------------------------------------
# configuration


@dataclass(frozen=True)
class ExperimentConfig:
    """Everything one experiment run depends on.

    The seed fully determines all outputs; realization sub-seeds are spawned
    from it deterministically, so reruns (with any worker count) reproduce
    the same tables byte for byte.
    """

    kind: str
    scenario: str = "s1"
    noise_scale: float = 1.0
    seed: int = 0
    n_realizations: int = 100
    workers: int = 1
    out_dir: str | None = "results"
    # frame plan (frames, threshold-learning)
    n_frames: int = 20
    pilots_per_frame: int = 10
    data_per_frame: int = 20
    # receiver machinery and detector parameters
    rates: ReceiverRates = field(default_factory=ReceiverRates)
    detector: AdaptiveDetectorConfig = field(default_factory=AdaptiveDetectorConfig)
    # time-variant run: long pilot sequence with a noise step inside
    tv_pilots: int = 750
    tv_noise_factor: float = 5.0
    tv_noise_start: int = 250
    tv_noise_stop: int = 500
    tv_realign_every: int = 2
    tv_rate_settings: tuple[tuple[float, float], ...] = ((5.0, 5.0),)
    # detector-comparison study
    bm_n_t: tuple[int, ...] = (100, 1000, 10000)
    bm_realizations: int = 25
    bm_eval_symbols: int = 100_000
    bm_train_steps: int = DEFAULT_TRAIN_STEPS
    bm_gibbs_len: int = DEFAULT_GIBBS_LEN
    bm_burn_in: int = DEFAULT_BURN_IN
    bm_learning_rate: float = DEFAULT_LEARNING_RATE
    # single-interval trace
    si_intervals: int = 1
    si_poll_step: float = 0.05
    max_events_per_interval: int = 500_000_000

    def __post_init__(self) -> None:
        if self.kind not in EXPERIMENT_KINDS:
            raise ConfigError(
                f"kind must be one of {', '.join(EXPERIMENT_KINDS)}, got {self.kind!r}"
            )
        get_scenario(self.scenario)
        if not self.noise_scale >= 0:
            raise ConfigError("noise_scale must be >= 0")
        if self.n_realizations < 1:
            raise ConfigError("n_realizations must be >= 1")
        if self.workers < 1:
            raise ConfigError("workers must be >= 1")
        if min(self.n_frames, self.pilots_per_frame, self.data_per_frame) < 1:
            raise ConfigError("frame plan counts must be >= 1")
        if self.tv_pilots < 1:
            raise ConfigError("tv_pilots must be >= 1")
        if not 0 <= self.tv_noise_start <= self.tv_noise_stop <= self.tv_pilots:
            raise ConfigError("need 0 <= tv_noise_start <= tv_noise_stop <= tv_pilots")
        if not self.tv_noise_factor > 0:
            raise ConfigError("tv_noise_factor must be > 0")
        if self.tv_realign_every < 0:
            raise ConfigError("tv_realign_every must be >= 0 (0 = never)")
        if not self.tv_rate_settings:
            raise ConfigError("tv_rate_settings must be non-empty")
        for pair in self.tv_rate_settings:
            if len(pair) != 2 or min(pair) <= 0:
                raise ConfigError("each rate setting must be a positive (k_on, k_off)")
        if not self.bm_n_t or min(self.bm_n_t) < 1:
            raise ConfigError("bm_n_t must be non-empty positive counts")
        if self.bm_realizations < 1:
            raise ConfigError("bm_realizations must be >= 1")
        if self.bm_eval_symbols < 1:
            raise ConfigError("bm_eval_symbols must be >= 1")
        if self.si_intervals < 1:
            raise ConfigError("si_intervals must be >= 1")
        if not self.si_poll_step > 0:
            raise ConfigError("si_poll_step must be > 0")
        if self.max_events_per_interval < 1:
            raise ConfigError("max_events_per_interval must be >= 1")

    def scenario_obj(self) -> ChannelScenario:
        scn = get_scenario(self.scenario)
        if self.noise_scale != 1.0:
            scn = scn.with_noise_scaled(self.noise_scale)
        return scn

    def with_updates(self, **kwargs) -> "ExperimentConfig":
        return replace(self, **kwargs)


_TOP_KEYS = {
    "kind", "scenario", "seed", "realizations", "workers", "out",
}
_SECTIONS = {
    "channel", "plan", "rates", "detector", "time_variant", "bm",
    "single_interval",
}


def _take(section: Mapping, allowed: Mapping[str, str], where: str) -> dict:
    """Map a TOML section onto config fields, rejecting unknown keys."""
    out = {}
    for key, value in section.items():
        if key not in allowed:
            raise ConfigError(f"unknown key {key!r} in [{where}]")
        out[allowed[key]] = value
    return out


def build_config(
    data: Mapping,
    seed: int | None = None,
    realizations: int | None = None,
    out_dir: str | None = None,
    workers: int | None = None,
) -> ExperimentConfig:
    """Turn a parsed configuration mapping into an ExperimentConfig.

    The keyword arguments are command-line overrides and win over the file.
    Unknown keys anywhere are configuration errors, as are values the
    dataclasses reject.
    """
    if not isinstance(data, Mapping):
        raise ConfigError("configuration root must be a table")
    unknown = set(data) - _TOP_KEYS - _SECTIONS
    if unknown:
        raise ConfigError(f"unknown top-level keys: {', '.join(sorted(unknown))}")
    if "kind" not in data:
        raise ConfigError("configuration must set 'kind'")
    kw: dict = {"kind": data["kind"]}
    if "scenario" in data:
        kw["scenario"] = data["scenario"]
    if "seed" in data:
        kw["seed"] = data["seed"]
    if "realizations" in data:
        kw["n_realizations"] = data["realizations"]
    if "workers" in data:
        kw["workers"] = data["workers"]
    if "out" in data:
        kw["out_dir"] = data["out"]
    kw.update(
        _take(data.get("channel", {}), {"noise_scale": "noise_scale"}, "channel")
    )
    kw.update(
        _take(
            data.get("plan", {}),
            {
                "frames": "n_frames",
                "pilots": "pilots_per_frame",
                "data": "data_per_frame",
            },
            "plan",
        )
    )
    kw.update(
        _take(
            data.get("time_variant", {}),
            {
                "pilots": "tv_pilots",
                "noise_factor": "tv_noise_factor",
                "noise_start": "tv_noise_start",
                "noise_stop": "tv_noise_stop",
                "realign_every": "tv_realign_every",
                "rate_settings": "tv_rate_settings",
            },
            "time_variant",
        )
    )
    kw.update(
        _take(
            data.get("bm", {}),
            {
                "n_t": "bm_n_t",
                "detector_realizations": "bm_realizations",
                "eval_symbols": "bm_eval_symbols",
                "train_steps": "bm_train_steps",
                "gibbs_len": "bm_gibbs_len",
                "burn_in": "bm_burn_in",
                "learning_rate": "bm_learning_rate",
            },
            "bm",
        )
    )
    kw.update(
        _take(
            data.get("single_interval", {}),
            {"intervals": "si_intervals", "poll_step": "si_poll_step"},
            "single_interval",
        )
    )
    try:
        if "rates" in data:
            kw["rates"] = ReceiverRates(**data["rates"])
        if "detector" in data:
            kw["detector"] = AdaptiveDetectorConfig(**data["detector"])
    except TypeError as exc:
        raise ConfigError(f"bad rates/detector key: {exc}") from exc
    if "tv_rate_settings" in kw:
        try:
            kw["tv_rate_settings"] = tuple(
                (float(a), float(b)) for a, b in kw["tv_rate_settings"]
            )
        except (TypeError, ValueError) as exc:
            raise ConfigError("rate_settings must be a list of [k_on, k_off]") from exc
    if "bm_n_t" in kw:
        kw["bm_n_t"] = tuple(int(v) for v in kw["bm_n_t"])
    if seed is not None:
        kw["seed"] = seed
    if realizations is not None:
        kw["n_realizations"] = realizations
    if out_dir is not None:
        kw["out_dir"] = out_dir
    if workers is not None:
        kw["workers"] = workers
    try:
        return ExperimentConfig(**kw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from exc


def load_config(path: str, **overrides) -> ExperimentConfig:
    """Parse a TOML experiment file; keyword overrides as in build_config."""
    try:
        with open(path, "rb") as f:
            data = tomllib.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"config {path} is not valid TOML: {exc}") from exc
    return build_config(data, **overrides)


# ---------------------------------------------------------------------------
# tables


@dataclass(frozen=True)
class Table:
    """A small column-named result table (the shape of one CSV file)."""

    header: tuple[str, ...]
    rows: tuple[tuple, ...]

    def column(self, name: str) -> list:
        idx = self.header.index(name)
        return [row[idx] for row in self.rows]


def _fmt_cell(value) -> str:
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT % float(value)
    return str(value)


def write_table(path: str, table: Table) -> str:
    """Write a table as CSV with fixed float formatting; returns the path."""
    parent = os.path.dirname(path)
    if parent:
        os.makedirs(parent, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as f:
        f.write(",".join(table.header) + "\n")
        for row in table.rows:
            if len(row) != len(table.header):
                raise ConfigError("row width does not match the header")
            f.write(",".join(_fmt_cell(v) for v in row) + "\n")
    return path


def _check_probability(name: str, value: float) -> float:
    if not 0.0 <= value <= 1.0 or not np.isfinite(value):
        raise NumericalError(f"{name} = {value} is not a probability")
    return float(value)


# ---------------------------------------------------------------------------
# realization workers (module level so process pools can pickle them)


def _wrap_failure(index: int, ss: np.random.SeedSequence, exc: Exception):
    msg = f"realization {index} (spawn key {ss.spawn_key}): {exc}"
    if isinstance(
        exc, (ConfigError, NumericalError, EventBudgetExceeded, InvariantViolation)
    ):
        exc.args = (msg,)
        raise exc
    raise RuntimeError(msg) from exc


def _draw_interval_inputs(
    scenario: ChannelScenario,
    symbols: Sequence[int],
    kinds: Sequence[str],
    rng: np.random.Generator,
) -> list[tuple[str, int, int]]:
    out = []
    for kind, x in zip(kinds, symbols):
        c = draw_received_concentration(scenario, int(x), rng)
        rb = draw_bound_receptors(scenario, c, rng)
        out.append((kind, int(x), int(rb)))
    return out


def _frames_worker(cfg: ExperimentConfig, index: int, ss: np.random.SeedSequence):
    try:
        ss_state, ss_chan = ss.spawn(2)
        rng = np.random.Generator(np.random.PCG64(ss_chan))
        plan = make_frame_plan(
            cfg.n_frames, cfg.pilots_per_frame, cfg.data_per_frame, rng
        )
        scn = cfg.scenario_obj()
        windows = signal_windows_for_plan(plan.kinds, cfg.rates)
        asm = assemble_full_rx(cfg.detector, cfg.rates, windows)
        state = asm.new_state(ss_state)
        inputs = _draw_interval_inputs(scn, plan.symbols, plan.kinds, rng)
        records = run_intervals(
            state, inputs, cfg.rates, cfg.max_events_per_interval
        )
        block = cfg.pilots_per_frame + cfg.data_per_frame
        errs = np.empty(cfg.n_frames)
        flags = np.empty(cfg.n_frames)
        for f in range(cfg.n_frames):
            data = records[f * block + cfg.pilots_per_frame : (f + 1) * block]
            errs[f] = np.mean([hard_decision(r.p_rel_on) != r.x for r in data])
            flags[f] = np.mean([r.error_flag for r in data])
        return errs, flags
    except Exception as exc:
        _wrap_failure(index, ss, exc)


def _tv_worker(
    cfg: ExperimentConfig,
    k_on: float,
    k_off: float,
    index: int,
    ss: np.random.SeedSequence,
):
    try:
        ss_state, ss_chan = ss.spawn(2)
        rng = np.random.Generator(np.random.PCG64(ss_chan))
        n = cfg.tv_pilots
        bits = pilot_sequence(n)
        kinds = ("pilot",) * n
        realign = cfg.tv_realign_every if cfg.tv_realign_every > 0 else None
        windows = signal_windows_for_plan(kinds, cfg.rates, realign_every=realign)
        det = cfg.detector.with_rates(k_on, k_off)
        asm = assemble_full_rx(det, cfg.rates, windows)
        state = asm.new_state(ss_state)
        base = cfg.scenario_obj()
        noisy = base.with_noise_scaled(cfg.tv_noise_factor)
        inputs = []
        for l in range(n):
            scn = noisy if cfg.tv_noise_start <= l < cfg.tv_noise_stop else base
            c = draw_received_concentration(scn, int(bits[l]), rng)
            rb = draw_bound_receptors(scn, c, rng)
            inputs.append(("pilot", int(bits[l]), int(rb)))
        records = run_intervals(
            state, inputs, cfg.rates, cfg.max_events_per_interval
        )
        return np.array([r.n_w_end for r in records], dtype=np.int64)
    except Exception as exc:
        _wrap_failure(index, ss, exc)


def _bm_study_worker(
    cfg: ExperimentConfig, n_t: int, index: int, ss: np.random.SeedSequence
):
    try:
        rng = np.random.Generator(np.random.PCG64(ss))
        scn = cfg.scenario_obj()
        ts = make_training_set(scn, n_t, rng)
        bm = init_bm(scn.n_r, rng)
        bm = train(
            bm,
            ts,
            steps=cfg.bm_train_steps,
            gibbs_len=cfg.bm_gibbs_len,
            burn_in=cfg.bm_burn_in,
            learning_rate=cfg.bm_learning_rate,
            rng=rng,
        )
        return evaluate_ber(bm, scn, cfg.bm_eval_symbols, rng)
    except Exception as exc:
        _wrap_failure(index, ss, exc)


def _adaptive_study_worker(
    cfg: ExperimentConfig, n_t: int, index: int, ss: np.random.SeedSequence
):
    """Train the threshold detector on n_t labeled symbols, then score it
    with its long-run acceptance probability used as a hard decision rule."""
    try:
        rng = np.random.Generator(np.random.PCG64(ss))
        scn = cfg.scenario_obj()
        bits = (rng.random(n_t) < 0.5).astype(np.int8)
        track = simulate_threshold_track(
            scn, bits, ("pilot",) * n_t, cfg.detector, rng
        )
        w = update_threshold(
            int(track.n_W[-1]), int(track.decisions[-1]), int(track.x[-1])
        )
        x, y = draw_symbols_and_receptors(scn, cfg.bm_eval_symbols, rng)
        rb = y.sum(axis=1).astype(np.float64)
        a_on = cfg.detector.k_on * rb
        a_off = cfg.detector.k_off * float(w)
        total = a_on + a_off
        with np.errstate(invalid="ignore"):
            p = np.where(total > 0, a_on / np.where(total > 0, total, 1.0), 0.0)
        decisions = p >= 0.5
        return float(np.mean(decisions != (x == 1)))
    except Exception as exc:
        _wrap_failure(index, ss, exc)


def _threshold_learning_worker(
    cfg: ExperimentConfig, index: int, ss: np.random.SeedSequence
):
    try:
        ss_state, ss_chan = ss.spawn(2)
        rng = np.random.Generator(np.random.PCG64(ss_chan))
        plan = make_frame_plan(
            cfg.n_frames, cfg.pilots_per_frame, cfg.data_per_frame, rng
        )
        scn = cfg.scenario_obj()
        windows = signal_windows_for_plan(plan.kinds, cfg.rates)
        asm = assemble_full_rx(cfg.detector, cfg.rates, windows)
        state = asm.new_state(ss_state)
        inputs = _draw_interval_inputs(scn, plan.symbols, plan.kinds, rng)
        records = run_intervals(
            state, inputs, cfg.rates, cfg.max_events_per_interval
        )
        rows = []
        for r in records:
            dec = hard_decision(r.p_rel_on)
            rows.append(
                (
                    index,
                    r.index,
                    r.kind,
                    r.x,
                    r.n_rb,
                    r.n_w_end,
                    r.p_rel_on,
                    dec,
                    int(dec != r.x),
                    int(r.error_flag),
                )
            )
        return rows
    except Exception as exc:
        _wrap_failure(index, ss, exc)


# ---------------------------------------------------------------------------
# experiments


def _out_path(cfg: ExperimentConfig, filename: str) -> str | None:
    if cfg.out_dir is None:
        return None
    return os.path.join(cfg.out_dir, filename)


def _maybe_write(cfg: ExperimentConfig, filename: str, table: Table) -> list[str]:
    path = _out_path(cfg, filename)
    if path is None:
        return []
    return [write_table(path, table)]


def _std(values: np.ndarray, axis: int = 0) -> np.ndarray:
    n = values.shape[axis]
    return values.std(axis=axis, ddof=1) if n > 1 else np.zeros(values.shape[1 - axis])


def run_frames_experiment(cfg: ExperimentConfig) -> Table:
    """Per-frame data BER of the assembled receiver with baseline columns.

    mean_BER is the hard-decision error rate (decide ON when the relative
    ON exposure exceeds 1/2), like for like with the threshold rule the
    baselines score.  flag_rate counts the per-interval soft-error flags,
    which also trip on near-tie exposures that round to the correct bit.
    Baselines: the pilot-count transient of the weight-count chain
    (baseline_det), its stationary value (baseline_asym), and the exact
    one-shot optimum (baseline_MAP).
    """
    if cfg.kind != "frames":
        raise ConfigError("config kind must be 'frames'")
    results = run_ensemble(
        functools.partial(_frames_worker, cfg),
        cfg.n_realizations,
        master_seed=np.random.SeedSequence(cfg.seed),
        workers=cfg.workers,
    )
    errs = np.stack([r[0] for r in results])
    flags = np.stack([r[1] for r in results])
    scn = cfg.scenario_obj()
    model = build_transition_matrix(scn)
    bers, _ = transient_curves(model, cfg.n_frames * cfg.pilots_per_frame)
    ber_asym = expected_ber(model, steady_state(model))
    ber_map = map_ber(scn)
    rows = []
    for f in range(cfg.n_frames):
        rows.append(
            (
                f,
                _check_probability("mean_BER", float(errs[:, f].mean())),
                float(_std(errs)[f]),
                _check_probability(
                    "baseline_det", float(bers[cfg.pilots_per_frame * (f + 1)])
                ),
                _check_probability("baseline_asym", ber_asym),
                _check_probability("baseline_MAP", ber_map),
                _check_probability("flag_rate", float(flags[:, f].mean())),
            )
        )
    table = Table(
        (
            "frame_index",
            "mean_BER",
            "std_BER",
            "baseline_det",
            "baseline_asym",
            "baseline_MAP",
            "flag_rate",
        ),
        tuple(rows),
    )
    _maybe_write(cfg, "frames.csv", table)
    return table


def _tv_models(cfg: ExperimentConfig):
    base = cfg.scenario_obj()
    noisy = base.with_noise_scaled(cfg.tv_noise_factor)
    return build_transition_matrix(base), build_transition_matrix(noisy)


def tv_baseline_curves(cfg: ExperimentConfig):
    """Deterministic overlays for the noise-step pilot run.

    Returns (weights, asym, opt) arrays over l = 0..tv_pilots where weights
    is the pilot-count transient of the weight chain, asym the stationary
    weight of the regime in force, and opt the one-shot optimal threshold.
    """
    m_clean, m_noisy = _tv_models(cfg)
    segments = [
        (m_clean, cfg.tv_noise_start),
        (m_noisy, cfg.tv_noise_stop - cfg.tv_noise_start),
        (m_clean, cfg.tv_pilots - cfg.tv_noise_stop),
    ]
    _, weights, _ = piecewise_transient(segments)
    asym_clean = expected_weight_count(m_clean, steady_state(m_clean))
    asym_noisy = expected_weight_count(m_noisy, steady_state(m_noisy))
    nu_clean = map_threshold(m_clean.scenario)
    nu_noisy = map_threshold(m_noisy.scenario)
    ls = np.arange(cfg.tv_pilots + 1)
    in_noisy = (ls > cfg.tv_noise_start) & (ls <= cfg.tv_noise_stop)
    asym = np.where(in_noisy, asym_noisy, asym_clean)
    opt = np.where(in_noisy, nu_noisy, nu_clean)
    return weights, asym, opt


def run_time_variant_experiment(cfg: ExperimentConfig) -> Table:
    """Ensemble weight-count trajectory over a long pilot run with a noise step.

    One row per (rate setting, pilot count l); mean/std are across
    realizations of the full receiver, the baseline columns are shared by
    all settings (the deterministic chain depends only on k_off/k_on, which
    the default sweep keeps fixed).
    """
    if cfg.kind != "time-variant":
        raise ConfigError("config kind must be 'time-variant'")
    weights, asym, opt = tv_baseline_curves(cfg)
    roots = np.random.SeedSequence(cfg.seed).spawn(len(cfg.tv_rate_settings))
    rows = []
    for (k_on, k_off), root in zip(cfg.tv_rate_settings, roots):
        results = run_ensemble(
            functools.partial(_tv_worker, cfg, k_on, k_off),
            cfg.n_realizations,
            master_seed=root,
            workers=cfg.workers,
        )
        tracks = np.stack(results)  # (n_realizations, tv_pilots)
        init = np.full((tracks.shape[0], 1), cfg.detector.n_W_init)
        tracks = np.concatenate([init, tracks], axis=1)
        mean = tracks.mean(axis=0)
        std = _std(tracks)
        for l in range(cfg.tv_pilots + 1):
            rows.append(
                (
                    l,
                    float(k_on),
                    float(k_off),
                    float(mean[l]),
                    float(std[l]),
                    float(weights[l]),
                    float(asym[l]),
                    int(opt[l]),
                )
            )
    table = Table(
        (
            "l",
            "k_on",
            "k_off",
            "mean_nW",
            "std_nW",
            "baseline_det",
            "baseline_asym",
            "baseline_opt",
        ),
        tuple(rows),
    )
    _maybe_write(cfg, "time_variant.csv", table)
    return table


def run_bm_study(cfg: ExperimentConfig) -> Table:
    """Detector comparison: trained machines vs the threshold detector.

    For each training-set size, bm_realizations independent detectors are
    trained and scored on fresh symbols; the threshold detector is scored
    through its closed-form long-run acceptance probability.  Rows carry
    min/mean/max BER over the detector realizations plus the exact one-shot
    optimum for reference.
    """
    if cfg.kind != "bm-study":
        raise ConfigError("config kind must be 'bm-study'")
    scn = cfg.scenario_obj()
    ber_map = map_ber(scn)
    roots = np.random.SeedSequence(cfg.seed).spawn(2 * len(cfg.bm_n_t))
    rows = []
    for i, n_t in enumerate(cfg.bm_n_t):
        for j, (name, worker) in enumerate(
            (("bm", _bm_study_worker), ("adaptive", _adaptive_study_worker))
        ):
            results = run_ensemble(
                functools.partial(worker, cfg, n_t),
                cfg.bm_realizations,
                master_seed=roots[2 * i + j],
                workers=cfg.workers,
            )
            bers = np.array(results, dtype=np.float64)
            rows.append(
                (
                    name,
                    scn.name,
                    n_t,
                    _check_probability("ber_min", float(bers.min())),
                    _check_probability("ber_mean", float(bers.mean())),
                    _check_probability("ber_max", float(bers.max())),
                    _check_probability("ber_map", ber_map),
                )
            )
    table = Table(
        ("detector", "scenario", "n_t", "ber_min", "ber_mean", "ber_max", "ber_map"),
        tuple(rows),
    )
    _maybe_write(cfg, "bm_study.csv", table)
    return table


def run_threshold_learning(cfg: ExperimentConfig) -> Table:
    """Per-symbol trace of the assembled receiver over a pilot/data plan.

    One row per (realization, symbol) with the weight count after the
    interval, the relative ON exposure, the hard decision, and the error
    and flag bits; nu_opt is the one-shot optimal threshold for reference.
    """
    if cfg.kind != "threshold-learning":
        raise ConfigError("config kind must be 'threshold-learning'")
    nu = map_threshold(cfg.scenario_obj())
    results = run_ensemble(
        functools.partial(_threshold_learning_worker, cfg),
        cfg.n_realizations,
        master_seed=np.random.SeedSequence(cfg.seed),
        workers=cfg.workers,
    )
    rows = []
    for per_realization in results:
        for row in per_realization:
            rows.append(row + (nu,))
    table = Table(
        (
            "realization",
            "symbol_index",
            "kind",
            "x",
            "n_rb",
            "n_W",
            "p_rel_on",
            "decision",
            "error",
            "error_flag",
            "nu_opt",
        ),
        tuple(rows),
    )
    _maybe_write(cfg, "threshold_learning.csv", table)
    return table


_TRACE_SPECIES = ("T_ON", "D_ON", "R_ON", "W", "XC_ON", "XC_OFF", "Y")


def run_single_interval(cfg: ExperimentConfig) -> tuple[Table, Table]:
    """Molecule-count trace across one or a few symbol intervals.

    Runs a single realization twice with the same seed: once through the
    interval readout (records table) and once polling counts on a fine grid
    (trace table).  Polling does not perturb the trajectory, so the two
    passes see the same sample path.
    """
    if cfg.kind != "single-interval":
        raise ConfigError("config kind must be 'single-interval'")
    ss = np.random.SeedSequence(cfg.seed)
    ss_state, ss_chan = ss.spawn(2)
    rng = np.random.Generator(np.random.PCG64(ss_chan))
    n = cfg.si_intervals
    bits = pilot_sequence(n)
    kinds = ("pilot",) * n
    scn = cfg.scenario_obj()
    windows = signal_windows_for_plan(kinds, cfg.rates)
    asm = assemble_full_rx(cfg.detector, cfg.rates, windows)
    inputs = _draw_interval_inputs(scn, bits, kinds, rng)

    state = asm.new_state(ss_state)
    records = run_intervals(state, inputs, cfg.rates, cfg.max_events_per_interval)
    rec_rows = tuple(
        (
            r.index,
            r.kind,
            r.x,
            r.n_rb,
            r.int_on,
            r.int_off,
            r.n_w_end,
            r.p_rel_on,
            r.soft_error,
            int(r.error_flag),
            r.t_detect_flip,
            r.t_reset_flip,
            r.first_detect_on,
            r.first_reset_on,
        )
        for r in records
    )
    rec_table = Table(
        (
            "index",
            "kind",
            "x",
            "n_rb",
            "int_on",
            "int_off",
            "n_W",
            "p_rel_on",
            "soft_error",
            "error_flag",
            "t_detect_flip",
            "t_reset_flip",
            "first_detect_on",
            "first_reset_on",
        ),
        rec_rows,
    )

    state = asm.new_state(ss_state)
    period = cfg.rates.symbol_period
    trace_rows = []
    for i, (_, _, rb) in enumerate(inputs):
        state.set_count("Y", rb)
        t_end = (i + 1) * period
        t = i * period
        trace_rows.append((t,) + tuple(state.count(s) for s in _TRACE_SPECIES))
        while t < t_end:
            t = min(t + cfg.si_poll_step, t_end)
            state.advance_raw(t, max_events=cfg.max_events_per_interval)
            trace_rows.append((t,) + tuple(state.count(s) for s in _TRACE_SPECIES))
    trace_table = Table(("t",) + _TRACE_SPECIES, tuple(trace_rows))

    _maybe_write(cfg, "single_interval_records.csv", rec_table)
    _maybe_write(cfg, "single_interval_trace.csv", trace_table)
    return trace_table, rec_table


def run_baseline(cfg: ExperimentConfig) -> Table:
    """Deterministic baseline table for the configured experiment.

    For time-variant configs this is the piecewise transient across the
    noise step; for every other kind it is the single-channel transient
    over the plan's total pilot count.  Uses the same chain code the
    simulation overlays use, so the columns agree exactly.
    """
    if cfg.kind == "time-variant":
        weights, asym, opt = tv_baseline_curves(cfg)
        m_clean, m_noisy = _tv_models(cfg)
        segments = [
            (m_clean, cfg.tv_noise_start),
            (m_noisy, cfg.tv_noise_stop - cfg.tv_noise_start),
            (m_clean, cfg.tv_pilots - cfg.tv_noise_stop),
        ]
        bers, _, _ = piecewise_transient(segments)
        rows = tuple(
            (
                l,
                float(weights[l]),
                _check_probability("ber_det", float(bers[l])),
                float(asym[l]),
                int(opt[l]),
            )
            for l in range(cfg.tv_pilots + 1)
        )
        table = Table(("l", "nW_det", "ber_det", "nW_asym", "nu_opt"), rows)
    else:
        scn = cfg.scenario_obj()
        model = build_transition_matrix(scn)
        n_pilots = cfg.n_frames * cfg.pilots_per_frame
        bers, weights = transient_curves(model, n_pilots)
        pi = steady_state(model)
        ber_asym = expected_ber(model, pi)
        w_asym = expected_weight_count(model, pi)
        ber_map = map_ber(scn)
        nu = map_threshold(scn)
        rows = tuple(
            (
                l,
                float(weights[l]),
                _check_probability("ber_det", float(bers[l])),
                float(w_asym),
                _check_probability("ber_asym", ber_asym),
                _check_probability("ber_map", ber_map),
                int(nu),
            )
            for l in range(n_pilots + 1)
        )
        table = Table(
            ("l", "nW_det", "ber_det", "nW_asym", "ber_asym", "ber_map", "nu_map"),
            rows,
        )
    _maybe_write(cfg, "baselines.csv", table)
    return table


def run_experiment(cfg: ExperimentConfig):
    """Dispatch on the experiment kind; returns the produced table(s)."""
    if cfg.kind == "frames":
        return run_frames_experiment(cfg)
    if cfg.kind == "time-variant":
        return run_time_variant_experiment(cfg)
    if cfg.kind == "bm-study":
        return run_bm_study(cfg)
    if cfg.kind == "threshold-learning":
        return run_threshold_learning(cfg)
    return run_single_interval(cfg)


# ---------------------------------------------------------------------------
# report rendering


def _read_csv_columns(path: str) -> dict[str, list[str]]:
    import csv

    if not os.path.exists(path):
        raise ConfigError(f"missing table {path}; run 'simulate' first")
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader)
        cols: dict[str, list[str]] = {name: [] for name in header}
        for row in reader:
            for name, value in zip(header, row):
                cols[name].append(value)
    return cols


def _floats(values: Iterable[str]) -> np.ndarray:
    return np.array([float(v) for v in values])


def render_report(cfg: ExperimentConfig) -> str:
    """Render the experiment's CSV output as an SVG line plot."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    if cfg.out_dir is None:
        raise ConfigError("report needs an output directory")
    out = os.path.join(cfg.out_dir, cfg.kind.replace("-", "_") + ".svg")
    fig, ax = plt.subplots(figsize=(7.0, 4.2))
    if cfg.kind == "frames":
        cols = _read_csv_columns(os.path.join(cfg.out_dir, "frames.csv"))
        f = _floats(cols["frame_index"])
        ax.errorbar(
            f, _floats(cols["mean_BER"]), yerr=_floats(cols["std_BER"]),
            marker="o", capsize=3, label="receiver",
        )
        ax.plot(f, _floats(cols["baseline_det"]), ":", label="deterministic")
        ax.plot(f, _floats(cols["baseline_asym"]), "--", label="asymptotic")
        ax.plot(f, _floats(cols["baseline_MAP"]), "k-", label="optimal")
        ax.set_yscale("log")
        ax.set_xlabel("frame")
        ax.set_ylabel("BER")
    elif cfg.kind == "time-variant":
        cols = _read_csv_columns(os.path.join(cfg.out_dir, "time_variant.csv"))
        l = _floats(cols["l"])
        ks = sorted(set(zip(cols["k_on"], cols["k_off"])))
        for k_on, k_off in ks:
            sel = np.array(
                [a == k_on and b == k_off for a, b in zip(cols["k_on"], cols["k_off"])]
            )
            mean = _floats(cols["mean_nW"])[sel]
            std = _floats(cols["std_nW"])[sel]
            ax.plot(l[sel], mean, label=f"k_on={k_on} k_off={k_off}")
            ax.fill_between(l[sel], mean - std, mean + std, alpha=0.2)
        first = np.array(
            [a == ks[0][0] and b == ks[0][1] for a, b in zip(cols["k_on"], cols["k_off"])]
        )
        ax.plot(l[first], _floats(cols["baseline_det"])[first], ":", color="gray",
                label="deterministic")
        ax.plot(l[first], _floats(cols["baseline_asym"])[first], "--", color="gray",
                label="asymptotic")
        ax.plot(l[first], _floats(cols["baseline_opt"])[first], "k-", label="optimal")
        ax.set_xlabel("pilot symbols")
        ax.set_ylabel("E[N_W]")
    elif cfg.kind == "bm-study":
        cols = _read_csv_columns(os.path.join(cfg.out_dir, "bm_study.csv"))
        for name in ("bm", "adaptive"):
            sel = [i for i, d in enumerate(cols["detector"]) if d == name]
            n_t = _floats([cols["n_t"][i] for i in sel])
            mean = _floats([cols["ber_mean"][i] for i in sel])
            lo = mean - _floats([cols["ber_min"][i] for i in sel])
            hi = _floats([cols["ber_max"][i] for i in sel]) - mean
            ax.errorbar(n_t, mean, yerr=[lo, hi], marker="o", capsize=3, label=name)
        ax.axhline(float(cols["ber_map"][0]), color="k", label="optimal")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("training symbols")
        ax.set_ylabel("BER")
    elif cfg.kind == "threshold-learning":
        cols = _read_csv_columns(os.path.join(cfg.out_dir, "threshold_learning.csv"))
        reals = sorted(set(cols["realization"]), key=int)[:5]
        for r in reals:
            sel = [i for i, v in enumerate(cols["realization"]) if v == r]
            idx = _floats([cols["symbol_index"][i] for i in sel])
            ax.plot(idx, _floats([cols["n_W"][i] for i in sel]), alpha=0.7)
            err = [i for i in sel if cols["error"][i] == "1"]
            if err:
                ax.vlines(
                    _floats([cols["symbol_index"][i] for i in err]), 0, 1,
                    color="red", alpha=0.4,
                    transform=ax.get_xaxis_transform(),
                )
        ax.axhline(float(cols["nu_opt"][0]), color="k", ls="--", label="optimal")
        ax.set_xlabel("symbol")
        ax.set_ylabel("N_W")
    else:
        cols = _read_csv_columns(
            os.path.join(cfg.out_dir, "single_interval_trace.csv")
        )
        t = _floats(cols["t"])
        for name in _TRACE_SPECIES[:-1]:
            ax.plot(t, _floats(cols[name]), label=name)
        ax.set_xlabel("t")
        ax.set_ylabel("molecule count")
    ax.legend(fontsize=8)
    fig.tight_layout()
    fig.savefig(out)
    plt.close(fig)
    return out
