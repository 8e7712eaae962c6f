"""Simulation of open quantum networks with discrete-delay coherent feedback."""

from .model import (
    ChainPlan,
    KernelTerm,
    NetworkSpec,
    discretize_kernel,
    interval_index,
    plan_chain,
    validate,
)
from .results import Insertion, ObservableSeries, ReconstructionResult

__all__ = [
    "ChainPlan",
    "KernelTerm",
    "NetworkSpec",
    "discretize_kernel",
    "interval_index",
    "plan_chain",
    "validate",
    "Insertion",
    "ObservableSeries",
    "ReconstructionResult",
]

__version__ = "0.1.0"
