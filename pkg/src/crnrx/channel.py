"""Per-symbol channel model: received concentrations, receptor binding,
likelihoods, and the optimal decision threshold.

A transmitted bit x produces a received concentration C = Delta * x + N with
Delta and N drawn fresh each symbol from constant or lognormal laws.  Each of
the n_r surface receptors then binds independently with probability
c / (c + K_D), where K_D = k_minus / k_plus, so the bound-receptor count
N_rb | c is Binomial(n_r, c/(c+K_D)).

Note on binding rates: the printed source values k_plus = 2e19 m^3/s,
k_minus = 20/s give K_D = 1e-18 and saturate every receptor at the
concentrations used here; the default below reads the exponent as 2e-19,
giving K_D = 1e20 and the intended error-prone operating point.  Both are
selectable through the scenario fields.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, replace
from typing import Sequence

import numpy as np
from scipy.stats import binom

from .crn import ConfigError, NumericalError

__all__ = [
    "ConstantLaw",
    "LognormalLaw",
    "ChannelScenario",
    "SymbolFrame",
    "lognormal_params",
    "lognormal_moments",
    "binding_probability",
    "scenario_s1",
    "scenario_s2",
    "scenario_s3",
    "get_scenario",
    "draw_received_concentration",
    "draw_bound_receptors",
    "draw_symbols_and_receptors",
    "likelihood",
    "posterior",
    "map_threshold",
    "threshold_ber",
    "map_ber",
    "pilot_sequence",
    "make_frame_plan",
    "DEFAULT_QUAD_NODES",
    "MAX_QUAD_NODES",
]

MU_DELTA = 1e20
SIGMA_DELTA = 5e19
MU_N = 1.5e19
SIGMA_N = 7.5e18
N_RECEPTORS = 30
K_PLUS_DEFAULT = 2e-19
K_PLUS_PRINTED = 2e19
K_MINUS_DEFAULT = 20.0
DEFAULT_QUAD_NODES = 96
# numpy's hermgauss weight computation overflows somewhere above ~300 nodes
MAX_QUAD_NODES = 300
_REFINE_TOL = 1e-7


def lognormal_params(mean: float, variance: float) -> tuple[float, float]:
    """(mean, variance) of a lognormal -> its underlying normal (mu, sigma^2)."""
    if mean <= 0 or variance <= 0:
        raise ConfigError("lognormal mean and variance must be positive")
    sigma2 = math.log1p(variance / (mean * mean))
    mu = math.log(mean) - 0.5 * sigma2
    return mu, sigma2


def lognormal_moments(mu: float, sigma2: float) -> tuple[float, float]:
    """Inverse of lognormal_params."""
    mean = math.exp(mu + 0.5 * sigma2)
    variance = math.expm1(sigma2) * math.exp(2.0 * mu + sigma2)
    return mean, variance


@dataclass(frozen=True)
class ConstantLaw:
    """Degenerate law: every draw equals ``value``."""

    value: float

    def __post_init__(self) -> None:
        if self.value < 0:
            raise ConfigError("constant law value must be >= 0")

    @property
    def mean(self) -> float:
        return self.value

    def draw(self, rng: np.random.Generator, size: int):
        return np.full(size, self.value)

    def scaled(self, factor: float) -> "ConstantLaw":
        return ConstantLaw(self.value * factor)


@dataclass(frozen=True)
class LognormalLaw:
    """Lognormal law parameterized by its real-space mean and variance."""

    mean: float
    variance: float

    def __post_init__(self) -> None:
        lognormal_params(self.mean, self.variance)  # validates positivity

    @property
    def normal_params(self) -> tuple[float, float]:
        return lognormal_params(self.mean, self.variance)

    def draw(self, rng: np.random.Generator, size: int):
        mu, sigma2 = self.normal_params
        return np.exp(rng.normal(mu, math.sqrt(sigma2), size))

    def scaled(self, factor: float) -> "LognormalLaw":
        return LognormalLaw(self.mean * factor, self.variance * factor * factor)


@dataclass(frozen=True)
class ChannelScenario:
    """Distribution spec for one transmission scenario."""

    name: str
    delta_law: ConstantLaw | LognormalLaw
    noise_law: ConstantLaw | LognormalLaw
    n_r: int = N_RECEPTORS
    k_plus: float = K_PLUS_DEFAULT
    k_minus: float = K_MINUS_DEFAULT

    def __post_init__(self) -> None:
        if self.n_r < 1:
            raise ConfigError("n_r must be >= 1")
        if self.k_plus <= 0 or self.k_minus <= 0:
            raise ConfigError("binding rates must be positive")

    @property
    def dissociation_constant(self) -> float:
        return self.k_minus / self.k_plus

    def with_noise_scaled(self, factor: float) -> "ChannelScenario":
        return replace(
            self,
            name=f"{self.name}xN{factor:g}",
            noise_law=self.noise_law.scaled(factor),
        )


def scenario_s1() -> ChannelScenario:
    """Both the signal increment and the noise are constant."""
    return ChannelScenario("S1", ConstantLaw(MU_DELTA), ConstantLaw(MU_N))


def scenario_s2() -> ChannelScenario:
    """Constant signal increment, lognormal noise."""
    return ChannelScenario(
        "S2", ConstantLaw(MU_DELTA), LognormalLaw(MU_N, SIGMA_N**2)
    )


def scenario_s3() -> ChannelScenario:
    """Lognormal signal increment and lognormal noise."""
    return ChannelScenario(
        "S3",
        LognormalLaw(MU_DELTA, SIGMA_DELTA**2),
        LognormalLaw(MU_N, SIGMA_N**2),
    )


def get_scenario(name: str) -> ChannelScenario:
    factories = {"S1": scenario_s1, "S2": scenario_s2, "S3": scenario_s3}
    key = str(name).upper()
    if key not in factories:
        raise ConfigError(f"unknown scenario {name!r}; expected one of {sorted(factories)}")
    return factories[key]()


def binding_probability(c, k_d: float):
    """Per-receptor binding probability at concentration c."""
    c = np.asarray(c, dtype=np.float64)
    return c / (c + k_d)


def draw_received_concentration(
    scenario: ChannelScenario, x: int, rng: np.random.Generator, size: int | None = None
):
    """C = Delta * x + N with fresh independent draws per symbol."""
    n = 1 if size is None else size
    noise = scenario.noise_law.draw(rng, n)
    if x:
        c = scenario.delta_law.draw(rng, n) + noise
    else:
        c = noise
    return float(c[0]) if size is None else c


def draw_bound_receptors(
    scenario: ChannelScenario, c, rng: np.random.Generator
):
    """Bound-receptor count N_rb ~ Binomial(n_r, c/(c+K_D))."""
    c_arr = np.asarray(c, dtype=np.float64)
    if np.any(c_arr < 0):
        raise ConfigError("concentration must be >= 0")
    p = binding_probability(c_arr, scenario.dissociation_constant)
    draws = rng.binomial(scenario.n_r, p)
    return int(draws) if np.isscalar(c) or c_arr.ndim == 0 else draws


def draw_symbols_and_receptors(
    scenario: ChannelScenario,
    n_symbols: int,
    rng: np.random.Generator,
    symbols: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Draw (x, receptor state vector) pairs for many symbols at once.

    Receptors are exchangeable: given the symbol's concentration each of the
    n_r receptors binds independently, so the returned binary matrix has iid
    Bernoulli(c/(c+K_D)) rows.  Returns (x array, matrix of shape (n, n_r)).
    """
    if symbols is None:
        x = (rng.random(n_symbols) < 0.5).astype(np.int8)
    else:
        x = np.asarray(symbols, dtype=np.int8)
        if x.shape[0] != n_symbols:
            raise ConfigError("symbols length mismatch")
    noise = scenario.noise_law.draw(rng, n_symbols)
    delta = scenario.delta_law.draw(rng, n_symbols)
    c = noise + delta * x
    p = binding_probability(c, scenario.dissociation_constant)
    y = (rng.random((n_symbols, scenario.n_r)) < p[:, None]).astype(np.uint8)
    return x, y


_likelihood_cache: dict[tuple, np.ndarray] = {}


def _gh_nodes(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    if n_nodes < 2:
        raise ConfigError("quadrature needs at least 2 nodes")
    if n_nodes > MAX_QUAD_NODES:
        raise ConfigError(
            f"n_nodes={n_nodes} exceeds the stable limit {MAX_QUAD_NODES}"
        )
    nodes, weights = np.polynomial.hermite.hermgauss(n_nodes)
    if not np.isfinite(weights).all():
        raise NumericalError(f"quadrature weights overflowed at {n_nodes} nodes")
    return nodes, weights / math.sqrt(math.pi)


def _law_support(law, n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    """Discretize a law as (values, probabilities) for marginalization."""
    if isinstance(law, ConstantLaw):
        return np.array([law.value]), np.array([1.0])
    mu, sigma2 = law.normal_params
    nodes, weights = _gh_nodes(n_nodes)
    values = np.exp(mu + math.sqrt(2.0 * sigma2) * nodes)
    return values, weights


def _likelihood_raw(scenario: ChannelScenario, x: int, n_nodes: int) -> np.ndarray:
    noise_v, noise_w = _law_support(scenario.noise_law, n_nodes)
    if x:
        delta_v, delta_w = _law_support(scenario.delta_law, n_nodes)
        c = (delta_v[:, None] + noise_v[None, :]).ravel()
        w = (delta_w[:, None] * noise_w[None, :]).ravel()
    else:
        c = noise_v
        w = noise_w
    p = binding_probability(c, scenario.dissociation_constant)
    ks = np.arange(scenario.n_r + 1)
    pmf_given_c = binom.pmf(ks[None, :], scenario.n_r, p[:, None])
    pmf = w @ pmf_given_c
    return pmf / pmf.sum()


def likelihood(
    scenario: ChannelScenario, x: int, n_nodes: int = DEFAULT_QUAD_NODES
) -> np.ndarray:
    """Pr[N_rb = n | X = x] over n = 0..n_r, marginalized over the laws.

    Constant laws give the exact binomial pmf.  Lognormal laws are integrated
    with Gauss-Hermite quadrature; a refinement with twice the node count must
    agree to within a small tolerance or a numerical error is raised.
    """
    key = (scenario, int(bool(x)), n_nodes)
    cached = _likelihood_cache.get(key)
    if cached is not None:
        return cached.copy()
    pmf = _likelihood_raw(scenario, x, n_nodes)
    needs_refinement = isinstance(scenario.noise_law, LognormalLaw) or (
        x and isinstance(scenario.delta_law, LognormalLaw)
    )
    if needs_refinement:
        n_hi = min(2 * n_nodes, MAX_QUAD_NODES)
        if n_hi > n_nodes:
            refined = _likelihood_raw(scenario, x, n_hi)
        else:
            # already at the node ceiling: refine downward for the check
            refined, pmf = pmf, _likelihood_raw(scenario, x, max(2, n_nodes // 2))
        err = float(np.max(np.abs(refined - pmf)))
        if err > _REFINE_TOL:
            raise NumericalError(
                f"likelihood quadrature did not converge for {scenario.name}, x={x}: "
                f"refinement changed entries by {err:.2e} (> {_REFINE_TOL:.0e}); "
                "increase n_nodes"
            )
        pmf = refined
    _likelihood_cache[key] = pmf
    return pmf.copy()


def posterior(
    scenario: ChannelScenario, n_nodes: int = DEFAULT_QUAD_NODES
) -> np.ndarray:
    """Pr[X=1 | N_rb = n] for equiprobable symbols; NaN for unreachable n."""
    pmf0 = likelihood(scenario, 0, n_nodes)
    pmf1 = likelihood(scenario, 1, n_nodes)
    total = pmf0 + pmf1
    with np.errstate(invalid="ignore", divide="ignore"):
        post = np.where(total > 0, pmf1 / total, np.nan)
    return post


def map_threshold(scenario: ChannelScenario, n_nodes: int = DEFAULT_QUAD_NODES) -> int:
    """Smallest n with Pr[X=1 | N_rb = n] >= 1/2 (ties decide 1).

    Warns when the posterior is not monotone over the reachable counts (the
    threshold rule then only approximates the exact MAP decision), when the
    hypotheses are indistinguishable, and when the posterior never reaches 1/2
    (boundary threshold n_r + 1: never decide 1).
    """
    post = posterior(scenario, n_nodes)
    reachable = ~np.isnan(post)
    values = post[reachable]
    if values.size == 0:
        raise NumericalError("no reachable receptor counts")
    if float(values.max() - values.min()) < 1e-12:
        warnings.warn(
            "posterior is flat: the two hypotheses are indistinguishable",
            stacklevel=2,
        )
    diffs = np.diff(values)
    if np.any(diffs < -1e-12):
        warnings.warn(
            "posterior is not monotone in the receptor count; "
            "the threshold decision rule is approximate here",
            stacklevel=2,
        )
    hits = np.nonzero(reachable & (post >= 0.5))[0]
    if hits.size == 0:
        warnings.warn(
            "posterior never reaches 1/2; returning boundary threshold n_r + 1",
            stacklevel=2,
        )
        return scenario.n_r + 1
    return int(hits[0])


def threshold_ber(
    scenario: ChannelScenario, nu: int, n_nodes: int = DEFAULT_QUAD_NODES
) -> float:
    """Error probability of the rule 'decide 1 iff N_rb >= nu' (equiprobable x)."""
    pmf0 = likelihood(scenario, 0, n_nodes)
    pmf1 = likelihood(scenario, 1, n_nodes)
    nu = int(nu)
    miss = float(pmf1[:nu].sum())  # x=1 decided 0
    false_alarm = float(pmf0[nu:].sum())  # x=0 decided 1
    return 0.5 * (miss + false_alarm)


def map_ber(scenario: ChannelScenario, n_nodes: int = DEFAULT_QUAD_NODES) -> float:
    """BER of the optimal threshold detector for this scenario."""
    return threshold_ber(scenario, map_threshold(scenario, n_nodes), n_nodes)


def pilot_sequence(n: int) -> np.ndarray:
    """The alternating pilot bits <0,1,0,1,...> of length n."""
    return (np.arange(n) % 2).astype(np.int8)


@dataclass(frozen=True)
class SymbolFrame:
    """An ordered symbol sequence with per-symbol kind (pilot or data).

    Every contiguous pilot block must follow the alternating pattern
    <0,1,0,1,...> starting at 0.
    """

    symbols: tuple[int, ...]
    kinds: tuple[str, ...]

    def __post_init__(self) -> None:
        if len(self.symbols) != len(self.kinds):
            raise ConfigError("symbols and kinds must have equal length")
        if any(s not in (0, 1) for s in self.symbols):
            raise ConfigError("symbols must be bits")
        if any(k not in ("pilot", "data") for k in self.kinds):
            raise ConfigError("kind must be 'pilot' or 'data'")
        run = 0
        for s, k in zip(self.symbols, self.kinds):
            if k == "pilot":
                if s != run % 2:
                    raise ConfigError("pilot blocks must alternate <0,1,0,1,...> from 0")
                run += 1
            else:
                run = 0

    def __len__(self) -> int:
        return len(self.symbols)


def make_frame_plan(
    n_frames: int,
    pilots_per_frame: int,
    data_per_frame: int,
    rng: np.random.Generator,
) -> SymbolFrame:
    """Frames of alternating pilots followed by equiprobable random data bits."""
    symbols: list[int] = []
    kinds: list[str] = []
    for _ in range(n_frames):
        symbols.extend(int(b) for b in pilot_sequence(pilots_per_frame))
        kinds.extend(["pilot"] * pilots_per_frame)
        symbols.extend(int(b) for b in (rng.random(data_per_frame) < 0.5))
        kinds.extend(["data"] * data_per_frame)
    return SymbolFrame(tuple(symbols), tuple(kinds))
