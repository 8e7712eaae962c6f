"""Dense complex linear algebra and time propagation primitives.

Matrices are plain numpy ``complex128`` arrays throughout; square shape is
the only structural assumption.  Hermiticity/unitarity are never implied by
the carrier type and are checked by predicates where needed.

Index convention: ``kron`` is row-major, ``kron(a, b)[i*db + k, j*db + l]
= a[i, j] * b[k, l]``.  Every module in this package relies on that fixed
ordering.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import prod

import numpy as np
from scipy.integrate import solve_ivp


class PropagationError(RuntimeError):
    """Adaptive integration failed (step-size underflow / stiffness)."""


@dataclass(frozen=True)
class FactorShape:
    """Tensor-factor dimensions of a composite space."""

    dims: tuple[int, ...]

    def __post_init__(self):
        if not self.dims or any(d < 1 for d in self.dims):
            raise ValueError(f"factor dimensions must be positive: {self.dims}")
        object.__setattr__(self, "dims", tuple(int(d) for d in self.dims))

    @property
    def total(self) -> int:
        return prod(self.dims)


def kron(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Kronecker product with the package-wide row-major convention."""
    return np.kron(np.asarray(a), np.asarray(b))


def embed(a: np.ndarray, shape: FactorShape, position: int) -> np.ndarray:
    """Embed ``a`` at ``position`` of a tensor product, identity elsewhere."""
    a = np.asarray(a)
    if not 0 <= position < len(shape.dims):
        raise IndexError(f"position {position} out of range for {shape.dims}")
    if a.shape != (shape.dims[position], shape.dims[position]):
        raise ValueError(
            f"operator dim {a.shape} does not match factor {shape.dims[position]}"
        )
    left = prod(shape.dims[:position])
    right = prod(shape.dims[position + 1:])
    out = np.kron(np.kron(np.eye(left), a), np.eye(right))
    return out.astype(complex)


def partial_trace(x: np.ndarray, shape: FactorShape, traced) -> np.ndarray:
    """Trace out the factors listed in ``traced``; keeps the rest in order."""
    x = np.asarray(x)
    nf = len(shape.dims)
    traced = sorted(set(int(i) for i in traced))
    if any(i < 0 or i >= nf for i in traced):
        raise IndexError(f"traced factors {traced} out of range for {shape.dims}")
    if x.shape != (shape.total, shape.total):
        raise ValueError(f"matrix dim {x.shape} does not match shape total {shape.total}")
    t = x.reshape(shape.dims + shape.dims)
    # trace highest factor index first so earlier positions stay valid
    for i in reversed(traced):
        t = np.trace(t, axis1=i, axis2=i + (t.ndim // 2))
    kept = prod(d for i, d in enumerate(shape.dims) if i not in traced)
    return t.reshape(kept, kept)


def matrix_units_basis(d: int) -> list[np.ndarray]:
    """The d^2 matrix units |mu><nu| in row-major (mu, nu) order.

    Hilbert-Schmidt orthonormal: tr(e_j^dag e_k) = delta_jk.
    """
    if d < 1:
        raise ValueError("dimension must be >= 1")
    basis = []
    for mu in range(d):
        for nu in range(d):
            e = np.zeros((d, d), dtype=complex)
            e[mu, nu] = 1.0
            basis.append(e)
    return basis


def is_hermitian(a: np.ndarray, tol: float = 1e-12) -> bool:
    a = np.asarray(a)
    return np.max(np.abs(a - a.conj().T)) <= tol


def dag(a: np.ndarray) -> np.ndarray:
    return np.asarray(a).conj().T


def propagate(generator, x0: np.ndarray, t0: float, t1: float,
              tol: float = 1e-10) -> np.ndarray:
    """Integrate dX/dt = generator(X) from t0 to t1 with an adaptive RK pair.

    ``generator`` must be a shape-preserving linear action.  ``tol`` is the
    relative tolerance; the absolute tolerance is tol * 1e-2.
    """
    out = propagate_times(generator, x0, t0, [t1], tol=tol)
    return out[0]


def propagate_times(generator, x0: np.ndarray, t0: float, times,
                    tol: float = 1e-10) -> list[np.ndarray]:
    """Like :func:`propagate` but returns snapshots at each time in ``times``.

    ``times`` must be ascending and >= t0.
    """
    x0 = np.asarray(x0, dtype=complex)
    times = list(times)
    if any(t < t0 for t in times) or any(b < a for a, b in zip(times, times[1:])):
        raise ValueError("snapshot times must be ascending and >= t0")
    if tol <= 0:
        raise ValueError("tol must be positive")
    shape = x0.shape

    if not times:
        return []
    if times[-1] == t0:
        return [x0.copy() for _ in times]

    def rhs(t, y):
        return generator(y.reshape(shape)).reshape(-1)

    sol = solve_ivp(
        rhs, (t0, times[-1]), x0.reshape(-1), method="DOP853",
        t_eval=times, rtol=tol, atol=tol * 1e-2, dense_output=False,
    )
    if not sol.success:
        raise PropagationError(f"integration failed: {sol.message}")
    return [sol.y[:, k].reshape(shape) for k in range(len(times))]
