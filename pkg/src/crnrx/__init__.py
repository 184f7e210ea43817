"""crnrx: stochastic CRN simulation engine and a fully chemical receiver stack.

Subpackages by concern:

- ``crn``: reaction-network data model, propensities, composition, text format
- ``engine``: exact event-driven simulation (compiled kernel + Python twin)
- ``channel``: per-symbol channel realizations, likelihoods, decision threshold
- ``bm``: Boltzmann-machine detector (sampling, training, CRN mapping)
- ``adaptive``: low-complexity adaptive detector and its learning rule
- ``receiver``: the assembled chemical receiver (timing, switches, learning)
- ``markov``: birth-death chain baselines for the learning rule
- ``experiments`` / ``cli``: experiment harness and command-line entry point
"""

from .crn import (
    ConfigError,
    EventBudgetExceeded,
    InvariantViolation,
    NumericalError,
    Reaction,
    ReactionNetwork,
    ExternalSignalSchedule,
    Species,
    apply_reaction,
    merge,
    propensity,
)
from .engine import SimState, advance, backend_name, run_ensemble, run_symbol_interval
from .experiments import (
    ExperimentConfig,
    compute_p_rel_on,
    load_config,
    run_baseline,
    run_bm_study,
    run_experiment,
    run_frames_experiment,
    run_single_interval,
    run_threshold_learning,
    run_time_variant_experiment,
)

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "EventBudgetExceeded",
    "InvariantViolation",
    "NumericalError",
    "Species",
    "Reaction",
    "ExternalSignalSchedule",
    "ReactionNetwork",
    "propensity",
    "apply_reaction",
    "merge",
    "SimState",
    "advance",
    "run_symbol_interval",
    "run_ensemble",
    "backend_name",
    "ExperimentConfig",
    "compute_p_rel_on",
    "load_config",
    "run_experiment",
    "run_baseline",
    "run_frames_experiment",
    "run_time_variant_experiment",
    "run_bm_study",
    "run_threshold_learning",
    "run_single_interval",
    "__version__",
]
