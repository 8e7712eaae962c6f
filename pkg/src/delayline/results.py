"""Shared result and record types."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass(frozen=True)
class ObservableSeries:
    """Time grid with real expectation values (CSV-facing)."""

    times: np.ndarray
    values: np.ndarray
    imag_residue: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "times", np.asarray(self.times, dtype=float))
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float))


@dataclass(frozen=True)
class ReconstructionResult:
    """Reduced single-copy state with computed sanity diagnostics."""

    time: float
    rho: np.ndarray
    trace_error: float
    hermiticity_error: float
    min_eigenvalue: float


@dataclass(frozen=True)
class Insertion:
    """Operator insertion record for multi-time correlation functions.

    ``side`` is "left" or "right"; ``op`` acts on the single-copy space.
    """

    time: float
    op: np.ndarray
    side: str

    def __post_init__(self):
        if self.side not in ("left", "right"):
            raise ValueError(f"side must be 'left' or 'right', got {self.side!r}")
        if self.time < 0:
            raise ValueError("insertion time must be nonnegative")
