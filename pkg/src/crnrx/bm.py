"""Boltzmann-machine detector: model, Gibbs sampling, moment-matching
training, threshold-equivalent construction, and the chemical realization.

The machine has m = n_r + 1 binary nodes.  Node 0 is the decision node and
nodes 1..n_r mirror the receptor states; the joint distribution is
p(z) proportional to exp(z'Wz/2 + z'theta) with symmetric zero-diagonal W.
Detection clamps the receptor nodes to the observed binding vector and reads
the conditional distribution of node 0.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import engine
from .channel import ChannelScenario, draw_symbols_and_receptors
from .crn import (
    ConfigError,
    Reaction,
    ReactionNetwork,
    Species,
    TrainingError,
)

__all__ = [
    "BoltzmannMachine",
    "TrainingSet",
    "sigmoid",
    "init_bm",
    "gibbs_step",
    "conditional_on_probability",
    "data_moments",
    "model_moments",
    "train",
    "evaluate_ber",
    "construct_map_bm",
    "bm_to_crn",
    "crn_stationary_on_probability",
    "attach_decision_layer",
    "make_training_set",
    "save_bm",
    "load_bm",
    "save_training_set",
    "load_training_set",
    "DEFAULT_EVAL_SAMPLES",
]

DEFAULT_EVAL_SAMPLES = 500
DEFAULT_TRAIN_STEPS = 100
DEFAULT_GIBBS_LEN = 50_000
DEFAULT_BURN_IN = 500
DEFAULT_LEARNING_RATE = 0.2
DEFAULT_BASE_RATE = 1.0
DEFAULT_COUNT_RATE = 1.0
DEFAULT_ANNIHILATION_RATE = 100.0
_BM_FILE_VERSION = "bm-detector v1"


def sigmoid(h: float) -> float:
    """Branch-stable logistic function (same form as the sampling kernels)."""
    if h >= 0.0:
        return 1.0 / (1.0 + math.exp(-h))
    e = math.exp(h)
    return e / (1.0 + e)


@dataclass(frozen=True)
class BoltzmannMachine:
    """Symmetric binary network; node 0 is the decision node."""

    W: np.ndarray
    theta: np.ndarray

    def __post_init__(self) -> None:
        W = np.array(self.W, dtype=np.float64)
        theta = np.array(self.theta, dtype=np.float64)
        if W.ndim != 2 or W.shape[0] != W.shape[1]:
            raise ConfigError("W must be square")
        if theta.shape != (W.shape[0],):
            raise ConfigError("theta length must match W")
        if not (np.isfinite(W).all() and np.isfinite(theta).all()):
            raise ConfigError("parameters must be finite")
        if np.max(np.abs(W - W.T)) > 1e-12:
            raise ConfigError("W must be symmetric")
        if np.any(np.diag(W) != 0.0):
            raise ConfigError("W diagonal must be zero")
        W.setflags(write=False)
        theta.setflags(write=False)
        object.__setattr__(self, "W", W)
        object.__setattr__(self, "theta", theta)

    @property
    def m(self) -> int:
        return self.W.shape[0]

    @property
    def n_r(self) -> int:
        return self.m - 1


@dataclass(frozen=True)
class TrainingSet:
    """Labeled detection samples: bits x and receptor vectors y."""

    x: np.ndarray
    y: np.ndarray

    def __post_init__(self) -> None:
        x = np.asarray(self.x, dtype=np.int8)
        y = np.asarray(self.y, dtype=np.uint8)
        if x.ndim != 1 or y.ndim != 2 or y.shape[0] != x.shape[0]:
            raise ConfigError("x must be (n,), y must be (n, n_r)")
        if x.shape[0] < 1:
            raise ConfigError("training set needs at least one sample")
        if np.any((x != 0) & (x != 1)) or np.any(y > 1):
            raise ConfigError("training samples must be bits")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n_t(self) -> int:
        return self.x.shape[0]

    @property
    def n_r(self) -> int:
        return self.y.shape[1]


def make_training_set(
    scenario: ChannelScenario, n_t: int, rng: np.random.Generator
) -> TrainingSet:
    """Draw n_t labeled (x, y) pairs from the channel."""
    x, y = draw_symbols_and_receptors(scenario, n_t, rng)
    return TrainingSet(x, y)


def init_bm(n_r: int, rng: np.random.Generator) -> BoltzmannMachine:
    """Zero biases; W is a symmetrized Gaussian with variance 1/(n_r+1)."""
    m = n_r + 1
    v = rng.normal(0.0, math.sqrt(1.0 / m), size=(m, m))
    W = 0.5 * (v + v.T)
    np.fill_diagonal(W, 0.0)
    return BoltzmannMachine(W, np.zeros(m))


def gibbs_step(
    bm: BoltzmannMachine, z: np.ndarray, node: int, rng: np.random.Generator
) -> np.ndarray:
    """Resample one coordinate: set to 1 with probability sigmoid(local field)."""
    z = np.asarray(z)
    if z.shape != (bm.m,) or np.any((z != 0) & (z != 1)):
        raise ConfigError("z must be a bit vector of length m")
    h = bm.theta[node] + float(bm.W[node] @ z) - bm.W[node, node] * z[node]
    out = z.copy()
    out[node] = 1 if rng.random() < sigmoid(h) else 0
    return out


def conditional_on_probability(bm: BoltzmannMachine, y: np.ndarray) -> float:
    """Pr[node 0 = 1 | receptor nodes clamped to y]."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (bm.n_r,):
        raise ConfigError("y must have length n_r")
    return sigmoid(bm.theta[0] + float(bm.W[0, 1:] @ y))


def data_moments(ts: TrainingSet) -> tuple[np.ndarray, np.ndarray]:
    """Empirical E[z] and E[z z'] with z = (x, y_1..y_nr)."""
    z = np.column_stack([ts.x.astype(np.float64), ts.y.astype(np.float64)])
    m1 = z.mean(axis=0)
    m2 = (z.T @ z) / ts.n_t
    return m1, m2


def model_moments(
    bm: BoltzmannMachine,
    rng: np.random.Generator,
    n_updates: int = DEFAULT_GIBBS_LEN,
    burn_in: int = DEFAULT_BURN_IN,
    backend: str | None = None,
) -> tuple[np.ndarray, np.ndarray]:
    """Estimate E[z] and E[z z'] from a fresh random-scan Gibbs chain."""
    z0 = rng.integers(0, 2, size=bm.m).astype(np.int8)
    free = np.arange(bm.m, dtype=np.int64)
    sum1, sum2, _, _, n_kept = engine.gibbs_chain(
        bm.W, bm.theta, z0, free, n_updates, burn_in, rng.bit_generator,
        backend=backend,
    )
    return sum1 / n_kept, sum2 / n_kept


def train(
    bm: BoltzmannMachine,
    training_set: TrainingSet,
    steps: int = DEFAULT_TRAIN_STEPS,
    gibbs_len: int = DEFAULT_GIBBS_LEN,
    burn_in: int = DEFAULT_BURN_IN,
    learning_rate: float = DEFAULT_LEARNING_RATE,
    rng: np.random.Generator | None = None,
    gap_history: list | None = None,
    backend: str | None = None,
) -> BoltzmannMachine:
    """Moment-matching training: nudge (theta, W) toward the data moments.

    Each step estimates the model moments from a fresh Gibbs chain and applies
    theta += lr * (E_data[z] - E_model[z]) and the analogous off-diagonal W
    update.  W stays symmetric with zero diagonal.  Non-finite parameters
    abort with the failing step index.  If ``gap_history`` is a list, the
    max-abs moment gap of each step is appended to it.
    """
    if training_set.n_r != bm.n_r:
        raise ConfigError("training set width does not match the machine")
    if rng is None:
        rng = np.random.default_rng()
    d1, d2 = data_moments(training_set)
    W = bm.W.copy()
    theta = bm.theta.copy()
    off_diag = ~np.eye(bm.m, dtype=bool)
    for step in range(1, steps + 1):
        cur = BoltzmannMachine(W, theta)
        m1, m2 = model_moments(cur, rng, gibbs_len, burn_in, backend=backend)
        g1 = d1 - m1
        g2 = d2 - m2
        if gap_history is not None:
            gap_history.append(
                max(float(np.max(np.abs(g1))), float(np.max(np.abs(g2[off_diag]))))
            )
        theta = theta + learning_rate * g1
        W = W + learning_rate * np.where(off_diag, g2, 0.0)
        W = 0.5 * (W + W.T)
        if not (np.isfinite(theta).all() and np.isfinite(W).all()):
            raise TrainingError(f"parameters diverged at step {step}", step)
    return BoltzmannMachine(W, theta)


def evaluate_ber(
    bm: BoltzmannMachine,
    scenario: ChannelScenario,
    n_symbols: int,
    rng: np.random.Generator,
    n_samples: int = DEFAULT_EVAL_SAMPLES,
    use_kernel: bool = False,
    backend: str | None = None,
) -> float:
    """Detection BER over fresh channel symbols.

    Each decision averages ``n_samples`` Gibbs samples of node 0 with the
    receptor nodes clamped; sample mean >= 1/2 decides 1.  With everything but
    node 0 clamped those samples are iid Bernoulli(sigmoid(local field)), so
    the default path draws the sample count binomially, which is
    distributionally identical to stepping the chain.  ``use_kernel=True``
    runs the literal chain instead.
    """
    if scenario.n_r != bm.n_r:
        raise ConfigError("scenario n_r does not match the machine")
    if n_symbols < 1:
        raise ConfigError("n_symbols must be >= 1")
    x, y = draw_symbols_and_receptors(scenario, n_symbols, rng)
    thresh = n_samples / 2.0
    if not use_kernel:
        h = bm.theta[0] + y.astype(np.float64) @ bm.W[0, 1:]
        p = np.where(h >= 0, 1.0 / (1.0 + np.exp(-np.abs(h))),
                     np.exp(-np.abs(h)) / (1.0 + np.exp(-np.abs(h))))
        ones = rng.binomial(n_samples, p)
        decisions = ones >= thresh
    else:
        free = np.array([0], dtype=np.int64)
        decisions = np.empty(n_symbols, dtype=bool)
        for i in range(n_symbols):
            z0 = np.concatenate([[0], y[i]]).astype(np.int8)
            sum1, _, _, _, n_kept = engine.gibbs_chain(
                bm.W, bm.theta, z0, free, n_samples, 0, rng.bit_generator,
                backend=backend,
            )
            decisions[i] = sum1[0] >= thresh
    return float(np.mean(decisions != (x == 1)))


def construct_map_bm(nu_map: int, w: float, n_r: int = 30) -> BoltzmannMachine:
    """Machine whose conditional decision equals the threshold rule.

    All off-diagonal weights are w and every bias is -(nu_map - 1/2) w, so
    Pr[node0 = 1 | y] = sigmoid(w (sum(y) - nu_map + 1/2)) >= 1/2 exactly when
    sum(y) >= nu_map.
    """
    if w <= 0:
        raise ConfigError("w must be positive")
    m = n_r + 1
    W = np.full((m, m), float(w))
    np.fill_diagonal(W, 0.0)
    theta = np.full(m, -(nu_map - 0.5) * w)
    return BoltzmannMachine(W, theta)


def bm_to_crn(bm: BoltzmannMachine, k: float = DEFAULT_BASE_RATE) -> ReactionNetwork:
    """Chemical realization of the decision node's dynamics.

    Only the reactions that change the decision species are mapped: a base
    flip pair Xhat_OFF -> Xhat_ON at k and Xhat_ON -> Xhat_OFF at
    k (1 + |theta_0|), plus one Y_i-catalyzed OFF -> ON conversion at
    k W[0, i] per receptor.  Receptor species are never consumed, so clamping
    a symbol's receptor pattern means setting their counts.  Weights from
    node 0 must be non-negative to serve as rate constants.
    """
    if k <= 0:
        raise ConfigError("base rate k must be positive")
    w_row = bm.W[0, 1:]
    if np.any(w_row < 0):
        bad = int(np.argmin(w_row)) + 1
        raise ConfigError(
            f"cannot map negative weight W[0,{bad}]={w_row[bad - 1]:g} to a rate "
            "constant; only non-negative first-row weights are realizable"
        )
    species = [Species("Xhat_ON", 0), Species("Xhat_OFF", 1)]
    for i in range(1, bm.n_r + 1):
        species.append(Species(f"Y{i}_ON", 0))
        species.append(Species(f"Y{i}_OFF", 1))
    reactions = [
        Reaction({"Xhat_OFF": 1}, {"Xhat_ON": 1}, k, name="flip_on_base"),
        Reaction(
            {"Xhat_ON": 1},
            {"Xhat_OFF": 1},
            k * (1.0 + abs(float(bm.theta[0]))),
            name="flip_off",
        ),
    ]
    for i in range(1, bm.n_r + 1):
        wi = float(bm.W[0, i])
        if wi == 0.0:
            continue
        reactions.append(
            Reaction(
                {"Xhat_OFF": 1},
                {"Xhat_ON": 1},
                k * wi,
                catalysts={f"Y{i}_ON": 1},
                name=f"flip_on_y{i}",
            )
        )
    return ReactionNetwork(tuple(species), tuple(reactions))


def crn_stationary_on_probability(
    bm: BoltzmannMachine, y: np.ndarray, k: float = DEFAULT_BASE_RATE
) -> float:
    """Closed-form stationary Pr[decision species ON] of the mapped network.

    With receptor counts clamped the decision species is a two-state chain
    with on-rate k (1 + W[0,1:] . y) and off-rate k (1 + |theta_0|); the
    stationary ON probability is their ratio.
    """
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (bm.n_r,):
        raise ConfigError("y must have length n_r")
    a_on = k * (1.0 + float(bm.W[0, 1:] @ y))
    a_off = k * (1.0 + abs(float(bm.theta[0])))
    return a_on / (a_on + a_off)


def attach_decision_layer(
    network: ReactionNetwork,
    k_c: float = DEFAULT_COUNT_RATE,
    k_a: float = DEFAULT_ANNIHILATION_RATE,
) -> ReactionNetwork:
    """Add counting species driven by the decision species.

    XC_ON is produced at rate k_c while Xhat_ON is present, XC_OFF likewise
    for Xhat_OFF, and the two annihilate pairwise at k_a, so at k_a >> k_c
    essentially only the majority species survives at any time.
    """
    names = {s.name for s in network.species}
    if "Xhat_ON" not in names or "Xhat_OFF" not in names:
        raise ConfigError("network must expose Xhat_ON and Xhat_OFF")
    if k_c <= 0 or k_a <= 0:
        raise ConfigError("k_c and k_a must be positive")
    species = network.species + (Species("XC_ON", 0), Species("XC_OFF", 0))
    reactions = network.reactions + (
        Reaction({}, {"XC_ON": 1}, k_c, catalysts={"Xhat_ON": 1}, name="count_on"),
        Reaction({}, {"XC_OFF": 1}, k_c, catalysts={"Xhat_OFF": 1}, name="count_off"),
        Reaction({"XC_ON": 1, "XC_OFF": 1}, {}, k_a, name="count_annihilate"),
    )
    return ReactionNetwork(species, reactions, network.signals)


def save_bm(bm: BoltzmannMachine, path: str) -> None:
    """Persist as plain text: version header, node count, theta row, W rows."""
    lines = [f"# {_BM_FILE_VERSION}", f"m {bm.m}"]
    lines.append(" ".join(f"{v:.17g}" for v in bm.theta))
    for row in bm.W:
        lines.append(" ".join(f"{v:.17g}" for v in row))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_bm(path: str) -> BoltzmannMachine:
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip()]
    if not lines or lines[0] != f"# {_BM_FILE_VERSION}":
        raise ConfigError(f"{path}: missing or unsupported version header")
    if len(lines) < 2 or not lines[1].startswith("m "):
        raise ConfigError(f"{path}: missing node count")
    m = int(lines[1].split()[1])
    if len(lines) != 2 + 1 + m:
        raise ConfigError(f"{path}: expected {1 + m} parameter rows")
    theta = np.array([float(v) for v in lines[2].split()])
    W = np.array([[float(v) for v in lines[3 + i].split()] for i in range(m)])
    if theta.shape != (m,) or W.shape != (m, m):
        raise ConfigError(f"{path}: parameter shapes do not match node count")
    return BoltzmannMachine(W, theta)


def save_training_set(ts: TrainingSet, path: str) -> None:
    """CSV with columns x, y_1..y_nr."""
    header = "x," + ",".join(f"y_{i}" for i in range(1, ts.n_r + 1))
    data = np.column_stack([ts.x, ts.y])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for row in data:
            fh.write(",".join(str(int(v)) for v in row) + "\n")


def load_training_set(path: str) -> TrainingSet:
    with open(path) as fh:
        header = fh.readline().strip()
        cols = header.split(",")
        if not cols or cols[0] != "x" or len(cols) < 2:
            raise ConfigError(f"{path}: expected header x,y_1,...")
        rows = [ln.strip().split(",") for ln in fh if ln.strip()]
    data = np.array([[int(v) for v in row] for row in rows], dtype=np.int64)
    if data.ndim != 2 or data.shape[1] != len(cols):
        raise ConfigError(f"{path}: row width does not match header")
    return TrainingSet(data[:, 0], data[:, 1:])
