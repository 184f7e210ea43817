"""Chemical reaction network data model.

Species, reactions with catalysts and external-signal gates, ON/OFF signal
schedules, mass-action propensities, network composition, and compilation of a
network into the flat arrays consumed by the simulation kernels.

Conventions
-----------
- Molecule counts are unbounded non-negative integers.
- A reaction's propensity is ``rate_constant * prod falling_factorial(n_s, m_s)``
  over its reactant and catalyst species, and 0 whenever its gate signal is OFF.
- Catalysts are syntactic sugar for species appearing in both reactants and
  products; they are normalized away when a network is compiled.
- External signals are exactly ON/OFF (rate multiplier 1/0), piecewise constant
  over sorted non-overlapping half-open intervals [start, end).
"""

from __future__ import annotations

import re
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

__all__ = [
    "ConfigError",
    "InvariantViolation",
    "EventBudgetExceeded",
    "NumericalError",
    "TrainingError",
    "Species",
    "Reaction",
    "ExternalSignalSchedule",
    "ReactionNetwork",
    "CompiledNetwork",
    "falling_factorial",
    "propensity",
    "apply_reaction",
    "merge",
    "compile_network",
    "parse_network",
    "load_network",
    "format_network",
]


class ConfigError(ValueError):
    """Invalid configuration: bad references, malformed files, conflicting merges."""


class InvariantViolation(RuntimeError):
    """An internal invariant failed (negative count, broken conservation pool)."""


class EventBudgetExceeded(RuntimeError):
    """A simulation exceeded its per-call event budget before reaching t_end."""


class NumericalError(ArithmeticError):
    """A numerical procedure failed to converge or produced non-finite values."""


class TrainingError(RuntimeError):
    """Detector training diverged; ``step`` is the failing training step."""

    def __init__(self, message: str, step: int):
        super().__init__(message)
        self.step = step


@dataclass(frozen=True)
class Species:
    """A chemical species identified by its unique name."""

    name: str
    initial_count: int = 0

    def __post_init__(self) -> None:
        if not self.name:
            raise ConfigError("species name must be non-empty")
        if self.initial_count < 0:
            raise ConfigError(f"species {self.name}: initial_count must be >= 0")


def _as_multiset(value: Mapping[str, int] | Iterable[str] | None) -> dict[str, int]:
    if value is None:
        return {}
    if isinstance(value, Mapping):
        items = dict(value)
    else:
        items = {}
        for name in value:
            items[name] = items.get(name, 0) + 1
    for name, mult in items.items():
        if mult <= 0:
            raise ConfigError(f"multiplicity of {name} must be positive, got {mult}")
    return items


@dataclass(frozen=True)
class Reaction:
    """A single reaction channel.

    ``reactants`` are consumed, ``products`` produced, ``catalysts`` required but
    untouched.  ``gate`` names an external signal; while that signal is OFF the
    reaction's propensity is exactly 0.
    """

    reactants: Mapping[str, int] = field(default_factory=dict)
    products: Mapping[str, int] = field(default_factory=dict)
    rate_constant: float = 1.0
    catalysts: Mapping[str, int] = field(default_factory=dict)
    gate: str | None = None
    name: str | None = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "reactants", _as_multiset(self.reactants))
        object.__setattr__(self, "products", _as_multiset(self.products))
        object.__setattr__(self, "catalysts", _as_multiset(self.catalysts))
        if not np.isfinite(self.rate_constant) or self.rate_constant < 0:
            raise ConfigError(f"rate_constant must be finite and >= 0, got {self.rate_constant}")

    def order(self) -> dict[str, int]:
        """Species multiset entering the propensity product (reactants + catalysts)."""
        combined = dict(self.reactants)
        for name, mult in self.catalysts.items():
            combined[name] = combined.get(name, 0) + mult
        return combined

    def delta(self) -> dict[str, int]:
        """Net count change per firing (products minus reactants); zero entries dropped."""
        change = dict(self.products)
        for name, mult in self.reactants.items():
            change[name] = change.get(name, 0) - mult
        return {name: d for name, d in change.items() if d != 0}

    def species_names(self) -> set[str]:
        return set(self.reactants) | set(self.products) | set(self.catalysts)


@dataclass(frozen=True)
class ExternalSignalSchedule:
    """ON intervals for one external signal, as sorted half-open [start, end) pairs."""

    signal_id: str
    intervals: tuple[tuple[float, float], ...] = ()

    def __post_init__(self) -> None:
        ivs = tuple((float(a), float(b)) for a, b in self.intervals)
        prev_end = -np.inf
        for a, b in ivs:
            if not (np.isfinite(a) and np.isfinite(b)) or b <= a:
                raise ConfigError(f"signal {self.signal_id}: bad interval ({a}, {b})")
            if a < prev_end:
                raise ConfigError(f"signal {self.signal_id}: intervals overlap or are unsorted")
            prev_end = b
        object.__setattr__(self, "intervals", ivs)

    def state(self, t: float) -> bool:
        """Signal state at time t (pure function of the schedule)."""
        starts = [a for a, _ in self.intervals]
        i = bisect_right(starts, t) - 1
        return i >= 0 and t < self.intervals[i][1]

    def flips_within(self, t0: float, t1: float) -> list[tuple[float, bool]]:
        """State changes strictly inside (t0, t1], as (time, new_state) pairs."""
        flips: list[tuple[float, bool]] = []
        for a, b in self.intervals:
            if t0 < a <= t1:
                flips.append((a, True))
            if t0 < b <= t1:
                flips.append((b, False))
        return flips


@dataclass(frozen=True)
class ReactionNetwork:
    """A complete simulable network: species + reactions + signal schedules."""

    species: tuple[Species, ...] = ()
    reactions: tuple[Reaction, ...] = ()
    signals: tuple[ExternalSignalSchedule, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "species", tuple(self.species))
        object.__setattr__(self, "reactions", tuple(self.reactions))
        object.__setattr__(self, "signals", tuple(self.signals))
        names = [s.name for s in self.species]
        if len(set(names)) != len(names):
            raise ConfigError("species names must be unique within a network")
        sig_names = [s.signal_id for s in self.signals]
        if len(set(sig_names)) != len(sig_names):
            raise ConfigError("signal ids must be unique within a network")
        known = set(names)
        known_sigs = set(sig_names)
        for i, rx in enumerate(self.reactions):
            missing = rx.species_names() - known
            if missing:
                raise ConfigError(f"reaction {rx.name or i}: unknown species {sorted(missing)}")
            if rx.gate is not None and rx.gate not in known_sigs:
                raise ConfigError(f"reaction {rx.name or i}: unknown signal {rx.gate!r}")

    @property
    def species_index(self) -> dict[str, int]:
        return {s.name: i for i, s in enumerate(self.species)}

    def initial_counts(self) -> dict[str, int]:
        return {s.name: s.initial_count for s in self.species}

    def signal_map(self) -> dict[str, ExternalSignalSchedule]:
        return {s.signal_id: s for s in self.signals}


def falling_factorial(n: int, m: int) -> int:
    """n * (n-1) * ... * (n-m+1); equals 0 when n < m."""
    out = 1
    for i in range(m):
        out *= n - i
        if out <= 0:
            return 0
    return out


def propensity(
    reaction: Reaction,
    state: Mapping[str, int],
    t: float = 0.0,
    signals: Mapping[str, ExternalSignalSchedule] | None = None,
) -> float:
    """Mass-action propensity of one reaction in the given count state at time t."""
    if reaction.gate is not None:
        if signals is None or reaction.gate not in signals:
            raise ConfigError(f"no schedule supplied for signal {reaction.gate!r}")
        if not signals[reaction.gate].state(t):
            return 0.0
    value = reaction.rate_constant
    for name, mult in reaction.order().items():
        if name not in state:
            raise ConfigError(f"state has no entry for species {name!r}")
        value *= falling_factorial(state[name], mult)
    return float(value)


def apply_reaction(state: Mapping[str, int], reaction: Reaction) -> dict[str, int]:
    """Fire a reaction once; aborts if any reactant (or catalyst) is missing."""
    new_state = dict(state)
    for name, mult in reaction.order().items():
        if new_state.get(name, 0) < mult:
            raise InvariantViolation(
                f"firing infeasible reaction {reaction.name or ''}: needs {mult} {name}"
            )
    for name, d in reaction.delta().items():
        new_state[name] = new_state.get(name, 0) + d
        if new_state[name] < 0:
            raise InvariantViolation(f"count of {name} would become negative")
    return new_state


def merge(networks: Sequence[ReactionNetwork]) -> ReactionNetwork:
    """Compose networks: union of species and signals, concatenation of reactions.

    Species appearing in several networks must agree on their initial counts;
    signal schedules with the same id must agree exactly.
    """
    species: dict[str, Species] = {}
    signals: dict[str, ExternalSignalSchedule] = {}
    reactions: list[Reaction] = []
    for net in networks:
        for sp in net.species:
            seen = species.get(sp.name)
            if seen is not None and seen.initial_count != sp.initial_count:
                raise ConfigError(
                    f"conflicting initial counts for species {sp.name}: "
                    f"{seen.initial_count} vs {sp.initial_count}"
                )
            species.setdefault(sp.name, sp)
        for sig in net.signals:
            seen_sig = signals.get(sig.signal_id)
            if seen_sig is not None and seen_sig.intervals != sig.intervals:
                raise ConfigError(f"conflicting schedules for signal {sig.signal_id}")
            signals.setdefault(sig.signal_id, sig)
        reactions.extend(net.reactions)
    return ReactionNetwork(
        species=tuple(species.values()),
        reactions=tuple(reactions),
        signals=tuple(signals.values()),
    )


class CompiledNetwork:
    """Flat-array form of a ReactionNetwork, shared by both simulation kernels.

    All index arrays are int32, counts and conservation totals int64, rates
    float64.  Within-reaction species lists are sorted by species index so both
    kernels evaluate propensity products in the same order (bit-identical
    floating-point results).
    """

    def __init__(
        self,
        network: ReactionNetwork,
        conservation_groups: Sequence[tuple[Sequence[str], int]] = (),
    ) -> None:
        self.network = network
        self.species_names = [s.name for s in network.species]
        self.index = {name: i for i, name in enumerate(self.species_names)}
        self.signal_names = [s.signal_id for s in network.signals]
        self.signal_index = {name: i for i, name in enumerate(self.signal_names)}
        n_s = len(self.species_names)
        n_r = len(network.reactions)
        n_g = len(self.signal_names)
        self.n_species = n_s
        self.n_reactions = n_r
        self.n_signals = n_g

        self.initial_counts = np.array(
            [s.initial_count for s in network.species], dtype=np.int64
        )
        self.rate = np.array([rx.rate_constant for rx in network.reactions], dtype=np.float64)
        self.gate = np.array(
            [self.signal_index[rx.gate] if rx.gate is not None else -1 for rx in network.reactions],
            dtype=np.int32,
        )

        def build_csr(rows: list[list[tuple[int, int]]], value_dtype):
            ptr = np.zeros(len(rows) + 1, dtype=np.int32)
            sp: list[int] = []
            val: list[int] = []
            for i, row in enumerate(rows):
                for s, v in sorted(row):
                    sp.append(s)
                    val.append(v)
                ptr[i + 1] = len(sp)
            return ptr, np.array(sp, dtype=np.int32), np.array(val, dtype=value_dtype)

        order_rows = [
            [(self.index[name], mult) for name, mult in rx.order().items()]
            for rx in network.reactions
        ]
        self.order_ptr, self.order_sp, self.order_mult = build_csr(order_rows, np.int32)

        delta_rows = [
            [(self.index[name], d) for name, d in rx.delta().items()]
            for rx in network.reactions
        ]
        self.delta_ptr, self.delta_sp, self.delta_val = build_csr(delta_rows, np.int64)

        # species -> reactions whose propensity involves that species
        uses: list[set[int]] = [set() for _ in range(n_s)]
        for r in range(n_r):
            for k in range(self.order_ptr[r], self.order_ptr[r + 1]):
                uses[self.order_sp[k]].add(r)
        self.sp_rx_ptr = np.zeros(n_s + 1, dtype=np.int32)
        sp_rx: list[int] = []
        for s in range(n_s):
            sp_rx.extend(sorted(uses[s]))
            self.sp_rx_ptr[s + 1] = len(sp_rx)
        self.sp_rx = np.array(sp_rx, dtype=np.int32)

        # reaction -> reactions whose propensity its firing may change (self excluded)
        self.dep_ptr = np.zeros(n_r + 1, dtype=np.int32)
        deps: list[int] = []
        for r in range(n_r):
            affected: set[int] = set()
            for k in range(self.delta_ptr[r], self.delta_ptr[r + 1]):
                affected |= uses[self.delta_sp[k]]
            affected.discard(r)
            deps.extend(sorted(affected))
            self.dep_ptr[r + 1] = len(deps)
        self.dep = np.array(deps, dtype=np.int32)

        # signal -> gated reactions
        self.gdep_ptr = np.zeros(n_g + 1, dtype=np.int32)
        gdeps: list[int] = []
        for g in range(n_g):
            gdeps.extend(np.nonzero(self.gate == g)[0].tolist())
            self.gdep_ptr[g + 1] = len(gdeps)
        self.gdep = np.array(gdeps, dtype=np.int32)

        # conservation groups: total molecule count over each group stays fixed
        self.group_ptr = np.zeros(len(conservation_groups) + 1, dtype=np.int32)
        group_sp: list[int] = []
        totals: list[int] = []
        for i, (names, total) in enumerate(conservation_groups):
            for name in names:
                if name not in self.index:
                    raise ConfigError(f"conservation group references unknown species {name!r}")
                group_sp.append(self.index[name])
            totals.append(int(total))
            self.group_ptr[i + 1] = len(group_sp)
        self.group_sp = np.array(group_sp, dtype=np.int32)
        self.group_total = np.array(totals, dtype=np.int64)
        # species -> groups containing it
        in_groups: list[list[int]] = [[] for _ in range(n_s)]
        for gi in range(len(conservation_groups)):
            for k in range(self.group_ptr[gi], self.group_ptr[gi + 1]):
                in_groups[self.group_sp[k]].append(gi)
        self.sp_group_ptr = np.zeros(n_s + 1, dtype=np.int32)
        sp_groups: list[int] = []
        for s in range(n_s):
            sp_groups.extend(in_groups[s])
            self.sp_group_ptr[s + 1] = len(sp_groups)
        self.sp_group = np.array(sp_groups, dtype=np.int32)

    def initial_gate_states(self, t: float) -> np.ndarray:
        return np.array(
            [1 if sig.state(t) else 0 for sig in self.network.signals], dtype=np.uint8
        )


def compile_network(
    network: ReactionNetwork,
    conservation_groups: Sequence[tuple[Sequence[str], int]] = (),
) -> CompiledNetwork:
    return CompiledNetwork(network, conservation_groups)


_TERM_RE = re.compile(r"^(?:(\d+)\s*\*?\s*)?([A-Za-z_][A-Za-z0-9_\-]*)$")


def _parse_side(text: str, where: str) -> dict[str, int]:
    text = text.strip()
    if text in ("0", "-", ""):
        return {}
    out: dict[str, int] = {}
    for term in text.split("+"):
        m = _TERM_RE.match(term.strip())
        if not m:
            raise ConfigError(f"{where}: cannot parse term {term.strip()!r}")
        mult = int(m.group(1)) if m.group(1) else 1
        name = m.group(2)
        out[name] = out.get(name, 0) + mult
    return out


def parse_network(text: str) -> ReactionNetwork:
    """Parse a network definition in the line format documented in the README.

    Lines: ``species NAME COUNT``, ``signal NAME start:end ...``, and
    ``reaction LHS -> RHS @ RATE [gate=NAME] [catalysts=NAME[:MULT],...]``
    where each side is ``0`` or terms like ``2 H + A_ON`` joined by ``+``.
    """
    species: list[Species] = []
    signals: list[ExternalSignalSchedule] = []
    reactions: list[Reaction] = []
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        where = f"line {lineno}"
        kind, _, rest = line.partition(" ")
        rest = rest.strip()
        if kind == "species":
            parts = rest.split()
            if len(parts) != 2:
                raise ConfigError(f"{where}: expected 'species NAME COUNT'")
            try:
                count = int(parts[1])
            except ValueError as exc:
                raise ConfigError(f"{where}: bad count {parts[1]!r}") from exc
            species.append(Species(parts[0], count))
        elif kind == "signal":
            parts = rest.split()
            if not parts:
                raise ConfigError(f"{where}: expected 'signal NAME [start:end ...]'")
            intervals = []
            for iv in parts[1:]:
                try:
                    a, b = iv.split(":")
                    intervals.append((float(a), float(b)))
                except ValueError as exc:
                    raise ConfigError(f"{where}: bad interval {iv!r}") from exc
            signals.append(ExternalSignalSchedule(parts[0], tuple(intervals)))
        elif kind == "reaction":
            if "->" not in rest or "@" not in rest:
                raise ConfigError(f"{where}: expected 'LHS -> RHS @ RATE [options]'")
            lhs_rhs, _, tail = rest.partition("@")
            lhs, _, rhs = lhs_rhs.partition("->")
            tail_parts = tail.split()
            if not tail_parts:
                raise ConfigError(f"{where}: missing rate constant")
            try:
                rate = float(tail_parts[0])
            except ValueError as exc:
                raise ConfigError(f"{where}: bad rate {tail_parts[0]!r}") from exc
            gate = None
            catalysts: dict[str, int] = {}
            for opt in tail_parts[1:]:
                key, _, value = opt.partition("=")
                if key == "gate":
                    gate = value
                elif key == "catalysts":
                    for item in value.split(","):
                        name, _, mult = item.partition(":")
                        catalysts[name] = catalysts.get(name, 0) + (int(mult) if mult else 1)
                else:
                    raise ConfigError(f"{where}: unknown option {opt!r}")
            reactions.append(
                Reaction(
                    reactants=_parse_side(lhs, where),
                    products=_parse_side(rhs, where),
                    rate_constant=rate,
                    catalysts=catalysts,
                    gate=gate,
                )
            )
        else:
            raise ConfigError(f"{where}: unknown directive {kind!r}")
    return ReactionNetwork(tuple(species), tuple(reactions), tuple(signals))


def load_network(path) -> ReactionNetwork:
    with open(path, "r", encoding="utf-8") as fh:
        return parse_network(fh.read())


def _format_side(multiset: Mapping[str, int]) -> str:
    if not multiset:
        return "0"
    terms = []
    for name in sorted(multiset):
        mult = multiset[name]
        terms.append(name if mult == 1 else f"{mult} {name}")
    return " + ".join(terms)


def format_network(network: ReactionNetwork) -> str:
    """Render a network in the same line format accepted by parse_network."""
    lines = []
    for sp in network.species:
        lines.append(f"species {sp.name} {sp.initial_count}")
    for sig in network.signals:
        ivs = " ".join(f"{a:g}:{b:g}" for a, b in sig.intervals)
        lines.append(f"signal {sig.signal_id} {ivs}".rstrip())
    for rx in network.reactions:
        line = f"reaction {_format_side(rx.reactants)} -> {_format_side(rx.products)} @ {rx.rate_constant:g}"
        if rx.gate is not None:
            line += f" gate={rx.gate}"
        if rx.catalysts:
            items = []
            for name in sorted(rx.catalysts):
                mult = rx.catalysts[name]
                items.append(name if mult == 1 else f"{name}:{mult}")
            line += " catalysts=" + ",".join(items)
        lines.append(line)
    return "\n".join(lines) + "\n"
