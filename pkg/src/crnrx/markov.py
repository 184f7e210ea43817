"""Birth-death Markov chain for the weight count of the learning detector.

During pilot transmission the detector's weight count n_W performs a random
walk: a false positive (x=0 decided 1) adds one weight molecule, a false
negative (x=1 decided 0) removes one, and correct decisions leave it alone.
With equiprobable pilots and the decision rule 'decide 1 iff N_rb >= n_W'
the count is a birth-death chain whose transition probabilities follow
directly from the channel likelihoods.  This module builds that chain and
provides transient and steady-state solutions, which serve as the
deterministic and asymptotic baselines for the chemical receiver.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field

import numpy as np

from .crn import ConfigError, NumericalError
from .channel import (
    ChannelScenario,
    DEFAULT_QUAD_NODES,
    likelihood,
    map_threshold,
)

__all__ = [
    "DtmcModel",
    "build_transition_matrix",
    "steady_state",
    "power_iteration_steady_state",
    "expected_ber",
    "expected_weight_count",
    "transient_distribution",
    "transient_curves",
    "piecewise_transient",
    "DEFAULT_N_W_TOTAL",
]

DEFAULT_N_W_TOTAL = 60
_ROW_SUM_TOL = 1e-12
_FIXED_POINT_TOL = 1e-10


@dataclass(frozen=True)
class DtmcModel:
    """Tridiagonal weight-count chain over states 0..n_W_total."""

    scenario: ChannelScenario
    n_W_total: int
    P: np.ndarray
    pmf0: np.ndarray
    pmf1: np.ndarray
    up: np.ndarray
    down: np.ndarray
    pi0: np.ndarray

    def __post_init__(self) -> None:
        n = self.n_W_total + 1
        if self.P.shape != (n, n):
            raise ConfigError("P shape does not match n_W_total")
        if np.any(self.P < 0):
            raise ConfigError("P entries must be >= 0")
        if np.max(np.abs(self.P.sum(axis=1) - 1.0)) > _ROW_SUM_TOL:
            raise ConfigError("P rows must sum to 1")
        band = np.tril(np.triu(self.P, -1), 1)
        if np.any(self.P != band):
            raise ConfigError("P must be tridiagonal")

    @property
    def n_states(self) -> int:
        return self.n_W_total + 1

    @property
    def error_probability(self) -> np.ndarray:
        """Per-state decision error probability, 1 - P[n,n] without cancellation."""
        return self.up + self.down


def build_transition_matrix(
    scenario: ChannelScenario,
    n_W_total: int = DEFAULT_N_W_TOTAL,
    n_W_init: int = 0,
    n_nodes: int = DEFAULT_QUAD_NODES,
) -> DtmcModel:
    """One-pilot transition matrix of the weight count under equiprobable bits.

    up[n]   = Pr[x=0] * Pr[N_rb >= n | x=0]  (false positive, weight added)
    down[n] = Pr[x=1] * Pr[N_rb <  n | x=1]  (false negative, weight removed)

    Boundary states have no outflow beyond the range: state 0 cannot go down
    (the chemical update clamps at zero) and state n_W_total cannot go up.
    """
    if n_W_total < 1:
        raise ConfigError("n_W_total must be >= 1")
    if not 0 <= n_W_init <= n_W_total:
        raise ConfigError("n_W_init out of range")
    pmf0 = likelihood(scenario, 0, n_nodes)
    pmf1 = likelihood(scenario, 1, n_nodes)
    nu = map_threshold(scenario, n_nodes)
    if n_W_total < nu:
        warnings.warn(
            f"n_W_total={n_W_total} is below the optimal threshold {nu}; "
            "the chain cannot reach the optimum",
            stacklevel=2,
        )
    n = n_W_total + 1
    states = np.arange(n)
    # Pr[N_rb >= n | x=0] and Pr[N_rb < n | x=1]; zero outside the support
    sf0 = np.zeros(n)
    cdf1 = np.zeros(n)
    nr = scenario.n_r
    rev0 = np.cumsum(pmf0[::-1])[::-1]  # rev0[i] = sum_{j>=i} pmf0[j]
    c1 = np.cumsum(pmf1)
    for s in states:
        sf0[s] = rev0[s] if s <= nr else 0.0
        cdf1[s] = c1[s - 1] if 1 <= s <= nr + 1 else (1.0 if s > nr + 1 else 0.0)
    up = 0.5 * sf0
    down = 0.5 * cdf1
    up[n_W_total] = 0.0
    down[0] = 0.0
    P = np.zeros((n, n))
    P[states, states] = 1.0 - up - down
    P[states[:-1], states[:-1] + 1] = up[:-1]
    P[states[1:], states[1:] - 1] = down[1:]
    pi0 = np.zeros(n)
    pi0[n_W_init] = 1.0
    return DtmcModel(scenario, n_W_total, P, pmf0, pmf1, up, down, pi0)


def _check_fixed_point(model: DtmcModel, pi: np.ndarray) -> None:
    resid = float(np.max(np.abs(pi @ model.P - pi)))
    if resid > _FIXED_POINT_TOL:
        raise NumericalError(
            f"stationary residual {resid:.2e} exceeds {_FIXED_POINT_TOL:.0e}"
        )


def steady_state(model: DtmcModel, check: bool = True) -> np.ndarray:
    """Stationary distribution via the detailed-balance product recursion.

    pi_n / pi_{n-1} = up[n-1] / down[n], accumulated from state 0.  States
    beyond the last upward-connected one get zero mass (the chain restricted
    to its reachable communicating class from state 0).  A state with zero
    backward rate but positive inflow makes the chain degenerate.
    """
    n = model.n_states
    log_unnorm = np.full(n, -np.inf)
    log_unnorm[0] = 0.0
    acc = 0.0
    for s in range(1, n):
        u = model.up[s - 1]
        if u == 0.0:
            break  # states >= s unreachable from below
        d = model.down[s]
        if d == 0.0:
            raise NumericalError(
                f"degenerate chain: state {s} has inflow from below but zero "
                "backward rate; no stationary distribution on this class"
            )
        acc += np.log(u) - np.log(d)
        log_unnorm[s] = acc
    log_unnorm -= log_unnorm.max()
    pi = np.exp(log_unnorm)
    pi /= pi.sum()
    if check:
        _check_fixed_point(model, pi)
    return pi


def power_iteration_steady_state(
    model: DtmcModel, tol: float = 1e-13, max_iter: int = 2_000_000
) -> np.ndarray:
    """Independent stationary solve: iterate pi <- pi P until convergence."""
    up_mask = model.up > 0
    reach = 1 + int(np.max(np.nonzero(up_mask)[0])) if up_mask.any() else 0
    pi = np.zeros(model.n_states)
    pi[: reach + 1] = 1.0 / (reach + 1)
    for _ in range(max_iter):
        nxt = pi @ model.P
        if float(np.max(np.abs(nxt - pi))) < tol:
            return nxt / nxt.sum()
        pi = nxt
    raise NumericalError("power iteration did not converge")


def expected_ber(model: DtmcModel, pi: np.ndarray) -> float:
    """Expected decision error probability under state distribution pi."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (model.n_states,) or np.any(pi < -1e-15):
        raise ConfigError("pi must be a distribution over the chain states")
    return float(pi @ model.error_probability)


def expected_weight_count(model: DtmcModel, pi: np.ndarray) -> float:
    """Expected weight count under state distribution pi."""
    pi = np.asarray(pi, dtype=np.float64)
    if pi.shape != (model.n_states,):
        raise ConfigError("pi must be a distribution over the chain states")
    return float(pi @ np.arange(model.n_states))


def transient_distribution(
    model: DtmcModel, n_steps: int, pi0: np.ndarray | None = None
) -> np.ndarray:
    """Distribution after n_steps pilots: pi0 P^n_steps."""
    pi = np.array(model.pi0 if pi0 is None else pi0, dtype=np.float64)
    for _ in range(n_steps):
        pi = pi @ model.P
    return pi


def transient_curves(
    model: DtmcModel, n_steps: int, pi0: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """(E[BER], E[N_W]) after l = 0..n_steps pilots, as two arrays."""
    pi = np.array(model.pi0 if pi0 is None else pi0, dtype=np.float64)
    bers = np.empty(n_steps + 1)
    weights = np.empty(n_steps + 1)
    for l in range(n_steps + 1):
        bers[l] = expected_ber(model, pi)
        weights[l] = expected_weight_count(model, pi)
        if l < n_steps:
            pi = pi @ model.P
    return bers, weights


def piecewise_transient(
    segments: list[tuple[DtmcModel, int]], pi0: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Transient curves across chained chains with different channels.

    Each segment is (model, n_steps); the state distribution carries over
    between segments (all models must share n_W_total).  Returns
    (E[BER], E[N_W], final pi) with the curves covering l = 0..total_steps.
    """
    if not segments:
        raise ConfigError("need at least one segment")
    n_states = segments[0][0].n_states
    for m, _ in segments:
        if m.n_states != n_states:
            raise ConfigError("all segments must share n_W_total")
    pi = np.array(segments[0][0].pi0 if pi0 is None else pi0, dtype=np.float64)
    bers = [expected_ber(segments[0][0], pi)]
    weights = [expected_weight_count(segments[0][0], pi)]
    for model, n_steps in segments:
        for _ in range(n_steps):
            pi = pi @ model.P
            bers.append(expected_ber(model, pi))
            weights.append(expected_weight_count(model, pi))
    return np.array(bers), np.array(weights), pi
