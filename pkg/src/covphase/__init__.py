"""Covariant phase and phase difference observables on truncated Fock spaces."""
from .fock import Cutoff, TwoModeOperator, TwoModeState
from .phase1 import IntervalSet, PhaseKernel
from .phasediff import DiffKernel, GramFamily, eval_diff, factorize, prob, validate

__all__ = [
    "Cutoff",
    "DiffKernel",
    "GramFamily",
    "IntervalSet",
    "PhaseKernel",
    "TwoModeOperator",
    "TwoModeState",
    "eval_diff",
    "factorize",
    "prob",
    "validate",
]
__version__ = "0.1.0"
