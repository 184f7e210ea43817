"""Low-complexity adaptive detector: a four-species network comparing the
receptor count against a pool of weight molecules, plus the pilot-driven
threshold update in algorithmic and chemical form.

Counting species X_C^ON / X_C^OFF race: bound receptors Y produce X_C^ON,
weight molecules W produce X_C^OFF, and the two annihilate fast, so the
surviving species indicates whether n_rb exceeds the threshold encoded by
n_W.  During pilot intervals a single helper molecule H lets the weight pool
grow or shrink by at most one per symbol, steering n_W toward the optimal
decision threshold.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .channel import ChannelScenario, draw_bound_receptors, draw_received_concentration
from .crn import ConfigError, Reaction, ReactionNetwork, Species

__all__ = [
    "AdaptiveDetectorConfig",
    "build_detector_crn",
    "build_single_molecule_crn",
    "build_learning_crn",
    "stationary_on_probability",
    "update_threshold",
    "simulate_threshold_track",
    "ThresholdTrack",
]


@dataclass(frozen=True)
class AdaptiveDetectorConfig:
    """Rates and initial weight count of the adaptive detector."""

    k_on: float = 5.0
    k_off: float = 5.0
    k_deg: float = 5e4
    k_l1: float = 1e-4
    k_l2: float = 1e-4
    n_W_init: int = 0

    def __post_init__(self) -> None:
        for field_name in ("k_on", "k_off", "k_deg", "k_l1", "k_l2"):
            if getattr(self, field_name) <= 0:
                raise ConfigError(f"{field_name} must be positive")
        if self.n_W_init < 0:
            raise ConfigError("n_W_init must be >= 0")

    def with_rates(self, k_on: float, k_off: float) -> "AdaptiveDetectorConfig":
        return replace(self, k_on=k_on, k_off=k_off)


def build_detector_crn(config: AdaptiveDetectorConfig) -> ReactionNetwork:
    """Detector core: Y -> Y + XC_ON, W -> W + XC_OFF, XC_ON + XC_OFF -> 0.

    Y is clamped to the bound-receptor draw at each interval start; W holds
    the learned threshold.  Four species regardless of receptor count.
    """
    species = (
        Species("Y", 0),
        Species("W", config.n_W_init),
        Species("XC_ON", 0),
        Species("XC_OFF", 0),
    )
    reactions = (
        Reaction({}, {"XC_ON": 1}, config.k_on, catalysts={"Y": 1}, name="produce_on"),
        Reaction({}, {"XC_OFF": 1}, config.k_off, catalysts={"W": 1}, name="produce_off"),
        Reaction({"XC_ON": 1, "XC_OFF": 1}, {}, config.k_deg, name="annihilate"),
    )
    return ReactionNetwork(species, reactions)


def build_single_molecule_crn(config: AdaptiveDetectorConfig) -> ReactionNetwork:
    """Single-decision-molecule variant: one X flips between ON and OFF.

    Y catalyzes OFF -> ON at k_on and W catalyzes ON -> OFF at k_off, so the
    stationary Pr[ON] is exactly k_on n_rb / (k_on n_rb + k_off n_W).  With
    n_rb = n_W = 0 the molecule is frozen in its initial OFF state,
    consistent with defining the probability as 0 there.
    """
    species = (
        Species("Xhat_ON", 0),
        Species("Xhat_OFF", 1),
        Species("Y", 0),
        Species("W", config.n_W_init),
    )
    reactions = (
        Reaction(
            {"Xhat_OFF": 1}, {"Xhat_ON": 1}, config.k_on,
            catalysts={"Y": 1}, name="flip_on",
        ),
        Reaction(
            {"Xhat_ON": 1}, {"Xhat_OFF": 1}, config.k_off,
            catalysts={"W": 1}, name="flip_off",
        ),
    )
    return ReactionNetwork(species, reactions)


def build_learning_crn(config: AdaptiveDetectorConfig) -> ReactionNetwork:
    """Pilot learning rule: one helper molecule gates one weight change.

    A false positive (X_C^ON present while the true symbol species is OFF)
    converts the helper into a new weight molecule; a false negative
    (X_C^OFF present while the true symbol is ON) consumes the helper and a
    weight molecule.  Consuming H in both directions bounds |delta n_W| at 1
    per interval whenever at most one H exists.  The true-symbol species and
    the counting species act catalytically.
    """
    species = (
        Species("W", config.n_W_init),
        Species("XC_ON", 0),
        Species("XC_OFF", 0),
        Species("H", 0),
        Species("Xtrue_ON", 0),
        Species("Xtrue_OFF", 0),
    )
    reactions = (
        Reaction(
            {"H": 1},
            {"W": 1},
            config.k_l1,
            catalysts={"XC_ON": 1, "Xtrue_OFF": 1},
            name="learn_add_W",
        ),
        Reaction(
            {"W": 1, "H": 1},
            {},
            config.k_l2,
            catalysts={"XC_OFF": 1, "Xtrue_ON": 1},
            name="learn_remove_W",
        ),
    )
    return ReactionNetwork(species, reactions)


def stationary_on_probability(
    n_rb: int, n_W: int, k_on: float = 5.0, k_off: float = 5.0
) -> float:
    """Long-run probability that X_C^ON is the surviving counting species.

    Equals n_rb / (n_rb + (k_off/k_on) n_W); >= 1/2 exactly when
    k_on n_rb >= k_off n_W.  With neither production source (n_rb = n_W = 0)
    no counting molecule ever appears and the value is defined as 0.
    """
    if n_rb < 0 or n_W < 0:
        raise ConfigError("counts must be >= 0")
    if k_on <= 0 or k_off <= 0:
        raise ConfigError("rates must be positive")
    a_on = k_on * n_rb
    a_off = k_off * n_W
    if a_on == 0.0 and a_off == 0.0:
        return 0.0
    return a_on / (a_on + a_off)


def update_threshold(n_W: int, x_hat: int, x_true: int) -> int:
    """Pilot update: +1 on a false positive, -1 on a false negative, floor 0."""
    if n_W < 0:
        raise ConfigError("n_W must be >= 0")
    if x_hat not in (0, 1) or x_true not in (0, 1):
        raise ConfigError("x_hat and x_true must be bits")
    if x_hat == x_true:
        return n_W
    if x_hat == 1:
        return n_W + 1
    return max(0, n_W - 1)


@dataclass
class ThresholdTrack:
    """Per-symbol record of the algorithmic adaptive detector."""

    n_W: np.ndarray  # weight count before each symbol
    n_rb: np.ndarray
    x: np.ndarray
    decisions: np.ndarray
    errors: np.ndarray


def simulate_threshold_track(
    scenario: ChannelScenario,
    symbols: np.ndarray,
    kinds: list[str] | tuple[str, ...],
    config: AdaptiveDetectorConfig,
    rng: np.random.Generator,
) -> ThresholdTrack:
    """Algorithm-level reference run of the adaptive detector.

    Per symbol: draw the receptor count, decide 1 iff
    k_on n_rb >= k_off n_W, and apply the threshold update on pilot symbols
    only.  This is the idealized counterpart of the chemical receiver and the
    sampling oracle for the weight-count Markov chain.
    """
    symbols = np.asarray(symbols, dtype=np.int8)
    n = symbols.shape[0]
    if len(kinds) != n:
        raise ConfigError("kinds length must match symbols")
    n_W = np.empty(n, dtype=np.int64)
    n_rb = np.empty(n, dtype=np.int64)
    decisions = np.empty(n, dtype=np.int8)
    w = config.n_W_init
    ratio = config.k_off / config.k_on
    for i in range(n):
        x = int(symbols[i])
        c = draw_received_concentration(scenario, x, rng)
        rb = draw_bound_receptors(scenario, c, rng)
        d = 1 if rb >= ratio * w else 0
        n_W[i] = w
        n_rb[i] = rb
        decisions[i] = d
        if kinds[i] == "pilot":
            w = update_threshold(w, d, x)
    errors = (decisions != symbols).astype(np.int8)
    return ThresholdTrack(n_W, n_rb, symbols.copy(), decisions, errors)
