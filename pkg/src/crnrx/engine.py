"""Exact stochastic simulation driver.

Wraps the event-loop kernels (compiled extension when available, pure-Python
twin otherwise) behind a stable API: SimState construction, exact advancement
through gated-rate schedules, per-species time integrals, interval runs, and a
deterministic ensemble runner.

Backend selection: the compiled kernel is used when importable unless the
environment variable CRNRX_PURE_PYTHON is set to a non-empty value; each
SimState can also be pinned explicitly via ``backend="python" | "compiled"``.
Both backends draw from the PCG64 stream in the same order, so a given seed
produces bit-identical trajectories on either.
"""

from __future__ import annotations

import multiprocessing
import os
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

from . import _kernels_py
from .crn import (
    CompiledNetwork,
    ConfigError,
    ReactionNetwork,
    compile_network,
)

try:  # compiled extension is optional
    from . import _kernels as _kernels_ext
except ImportError:  # pragma: no cover - depends on build environment
    _kernels_ext = None

__all__ = [
    "SimState",
    "TrajectoryFragment",
    "IntervalResult",
    "advance",
    "run_symbol_interval",
    "run_ensemble",
    "sample_counts",
    "backend_name",
    "get_backend",
    "gibbs_chain",
    "DEFAULT_MAX_EVENTS",
]

DEFAULT_MAX_EVENTS = 2**62


def get_backend(name: str | None = None):
    """Return the kernel module for ``name`` (None = best available)."""
    if name is None:
        if os.environ.get("CRNRX_PURE_PYTHON"):
            return _kernels_py
        return _kernels_ext if _kernels_ext is not None else _kernels_py
    if name == "python":
        return _kernels_py
    if name == "compiled":
        if _kernels_ext is None:
            raise ConfigError("compiled kernel requested but the extension is not built")
        return _kernels_ext
    raise ConfigError(f"unknown backend {name!r}")


def backend_name(name: str | None = None) -> str:
    return get_backend(name).BACKEND_NAME


def gibbs_chain(*args, backend: str | None = None, **kwargs):
    """Dispatch to the selected backend's Gibbs chain kernel."""
    return get_backend(backend).gibbs_chain(*args, **kwargs)


@dataclass
class TrajectoryFragment:
    """Summary of one advance window: exact integrals plus optional event log."""

    t0: float
    t1: float
    n_events: int
    integrals: dict[str, float] = field(default_factory=dict)
    event_times: np.ndarray | None = None
    event_reactions: np.ndarray | None = None


@dataclass
class IntervalResult:
    """Per-symbol-interval readout used by the receiver stack."""

    t0: float
    t1: float
    n_events: int
    int_on: float
    int_off: float


class SimState:
    """Owned state of one stochastic realization of a network.

    Holds integer molecule counts, per-reaction internal clocks, the signal
    schedules, and the seeded random stream.  A SimState is owned by exactly
    one simulation at a time; time never decreases, counts never go negative,
    and identical (network, schedules, seed) triples reproduce the event
    sequence bit for bit on either backend.
    """

    def __init__(
        self,
        network: ReactionNetwork | CompiledNetwork,
        seed: int | np.random.SeedSequence | np.random.BitGenerator | None = 0,
        t0: float = 0.0,
        check_conservation: bool = True,
        log_events: bool = False,
        backend: str | None = None,
        conservation_groups: Sequence[tuple[Sequence[str], int]] = (),
    ) -> None:
        if isinstance(network, CompiledNetwork):
            cnet = network
        else:
            cnet = compile_network(network, conservation_groups)
        self.cnet = cnet
        self.network = cnet.network
        if isinstance(seed, np.random.BitGenerator):
            bitgen = seed
        else:
            bitgen = np.random.PCG64(seed)
        self.bit_generator = bitgen
        self.rng = np.random.Generator(bitgen)
        self._schedules = list(self.network.signals)
        impl = get_backend(backend)
        self.backend = impl.BACKEND_NAME
        self._kernel = impl.MnrmKernel(
            cnet,
            cnet.initial_counts,
            bitgen,
            cnet.initial_gate_states(t0),
            check_conservation=check_conservation,
            log_events=log_events,
            t0=t0,
        )
        self._log_events = log_events

    # -- basic accessors ---------------------------------------------------

    @property
    def t(self) -> float:
        return self._kernel.t

    @property
    def event_count(self) -> int:
        return self._kernel.event_count

    def counts(self) -> dict[str, int]:
        values = self._kernel.get_counts()
        return {name: int(values[i]) for i, name in enumerate(self.cnet.species_names)}

    def count(self, name: str) -> int:
        return int(self._kernel.get_counts()[self.cnet.index[name]])

    def count_vector(self) -> np.ndarray:
        return self._kernel.get_counts()

    def set_count(self, name: str, value: int) -> None:
        self._kernel.set_count(self.cnet.index[name], int(value))

    def integrals(self, names: Iterable[str] | None = None) -> dict[str, float]:
        values = self._kernel.get_integrals()
        if names is None:
            names = self.cnet.species_names
        return {name: float(values[self.cnet.index[name]]) for name in names}

    def integral_vector(self) -> np.ndarray:
        return self._kernel.get_integrals()

    def fire_counts(self) -> np.ndarray:
        return self._kernel.get_fire_counts()

    def first_positive_times(self) -> dict[str, float]:
        """First time each species count became positive since the last reset (-1 = never)."""
        values = self._kernel.get_first_positive()
        return {name: float(values[i]) for i, name in enumerate(self.cnet.species_names)}

    def reset_first_positive(self) -> None:
        self._kernel.reset_first_positive()

    def event_log(self) -> tuple[np.ndarray, np.ndarray]:
        return self._kernel.get_events()

    def clear_event_log(self) -> None:
        self._kernel.clear_events()

    # -- advancement ---------------------------------------------------------

    def _flips_between(self, t0: float, t1: float):
        flips: list[tuple[float, int, int]] = []
        for gi, sched in enumerate(self._schedules):
            for tf, st in sched.flips_within(t0, t1):
                flips.append((tf, gi, 1 if st else 0))
        flips.sort(key=lambda item: item[0])
        return (
            [f[0] for f in flips],
            [f[1] for f in flips],
            [f[2] for f in flips],
        )

    def advance_raw(self, t_end: float, max_events: int = DEFAULT_MAX_EVENTS) -> int:
        """Advance to t_end executing all events exactly; returns events executed."""
        flip_t, flip_sig, flip_state = self._flips_between(self.t, t_end)
        return int(self._kernel.advance(t_end, flip_t, flip_sig, flip_state, max_events))


def advance(
    state: SimState,
    t_end: float,
    species: Iterable[str] | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> TrajectoryFragment:
    """Advance a SimState to t_end and report the window's exact time integrals.

    Integrals are accumulated from the piecewise-constant count path segment by
    segment (no quadrature).  When the state was created with
    ``log_events=True`` the fragment also carries the (time, reaction) log of
    the window.
    """
    t0 = state.t
    if species is None:
        species = state.cnet.species_names
    names = list(species)
    before = state.integral_vector()
    if state._log_events:
        state.clear_event_log()
    n_events = state.advance_raw(t_end, max_events=max_events)
    after = state.integral_vector()
    idx = state.cnet.index
    integrals = {name: float(after[idx[name]] - before[idx[name]]) for name in names}
    fragment = TrajectoryFragment(
        t0=t0, t1=state.t, n_events=n_events, integrals=integrals
    )
    if state._log_events:
        ev_t, ev_r = state.event_log()
        fragment.event_times = ev_t
        fragment.event_reactions = ev_r
    return fragment


def run_symbol_interval(
    state: SimState,
    interval: tuple[float, float],
    on_species: str = "XC_ON",
    off_species: str = "XC_OFF",
    max_events: int = DEFAULT_MAX_EVENTS,
) -> IntervalResult:
    """Advance through one symbol interval and return the decision integrals."""
    t_s, t_e = interval
    if abs(state.t - t_s) > 1e-9:
        raise ConfigError(f"state is at t={state.t}, interval starts at {t_s}")
    idx_on = state.cnet.index[on_species]
    idx_off = state.cnet.index[off_species]
    before = state.integral_vector()
    n_events = state.advance_raw(t_e, max_events=max_events)
    after = state.integral_vector()
    return IntervalResult(
        t0=t_s,
        t1=t_e,
        n_events=n_events,
        int_on=float(after[idx_on] - before[idx_on]),
        int_off=float(after[idx_off] - before[idx_off]),
    )


def sample_counts(
    state: SimState,
    times: Sequence[float],
    species: Iterable[str] | None = None,
    max_events: int = DEFAULT_MAX_EVENTS,
) -> tuple[np.ndarray, list[str]]:
    """Advance through ``times`` recording a count snapshot at each one."""
    if species is None:
        species = state.cnet.species_names
    names = list(species)
    idx = [state.cnet.index[name] for name in names]
    rows = np.empty((len(times), len(names)), dtype=np.int64)
    for k, t_snap in enumerate(times):
        state.advance_raw(float(t_snap), max_events=max_events)
        rows[k] = state.count_vector()[idx]
    return rows, names


def run_ensemble(
    worker: Callable[[int, np.random.SeedSequence], object],
    n_realizations: int,
    master_seed: int | np.random.SeedSequence = 0,
    workers: int = 1,
) -> list:
    """Run independent realizations with deterministically derived sub-seeds.

    ``worker(index, seed_sequence)`` must return a picklable summary.  Results
    are ordered by realization index regardless of completion order, so the
    aggregate is reproducible for any worker count.
    """
    if n_realizations < 1:
        raise ConfigError("n_realizations must be >= 1")
    if isinstance(master_seed, np.random.SeedSequence):
        root = master_seed
    else:
        root = np.random.SeedSequence(master_seed)
    subseeds = root.spawn(n_realizations)
    jobs = list(enumerate(subseeds))
    if workers <= 1:
        return [worker(i, ss) for i, ss in jobs]
    with multiprocessing.get_context("spawn").Pool(processes=workers) as pool:
        return pool.starmap(worker, jobs)
