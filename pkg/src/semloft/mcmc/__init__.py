"""Data-driven Metropolis-Hastings search over semantic worlds."""

from .chain import (
    Annealing,
    ChainConfig,
    ChainTrace,
    Sample,
    acceptance_probability,
    build_context,
    detected_init,
    random_init,
    run,
    run_chains,
    step,
)
from .kernels import (
    DEFAULT_WEIGHTS,
    IMPLEMENTATIONS,
    INVERSE,
    KERNELS,
    Kernel,
    Proposal,
    apply_move,
    inverse_move,
    propose,
    selection_log_prob,
    transition_log_prob,
)
from .state import ChainContext, ChainState, KernelParams, changed_window, full_state, update_state
from .tiny import Enumeration, TinyDomain, enumerate_posterior, total_variation

__all__ = [
    "Annealing",
    "ChainConfig",
    "ChainContext",
    "ChainState",
    "ChainTrace",
    "DEFAULT_WEIGHTS",
    "Enumeration",
    "IMPLEMENTATIONS",
    "INVERSE",
    "KERNELS",
    "Kernel",
    "KernelParams",
    "Proposal",
    "Sample",
    "TinyDomain",
    "acceptance_probability",
    "apply_move",
    "build_context",
    "changed_window",
    "detected_init",
    "enumerate_posterior",
    "full_state",
    "inverse_move",
    "propose",
    "random_init",
    "run",
    "run_chains",
    "selection_log_prob",
    "step",
    "total_variation",
    "transition_log_prob",
    "update_state",
]
