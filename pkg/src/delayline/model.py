"""Declarative system/reservoir description and chain-layout planning.

A reservoir is specified entirely through its discrete dissipation kernel:
each :class:`KernelTerm` ``(alpha, beta, gamma, delay)`` stands for the
Hermitian pair ``gamma * delta(t - delay) + conj(gamma) * delta(t + delay)``
in the kernel block F_{alpha beta}.  Delays are exact rationals so that the
base interval (their gcd) and the integer copy offsets are exact.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from fractions import Fraction

import numpy as np

from . import qlinalg
from .qlinalg import FactorShape

MAX_DENOMINATOR = 10**6


class ModelError(ValueError):
    pass


class NonHermitianHamiltonian(ModelError):
    pass


class DimensionMismatch(ModelError):
    pass


class CrossChannelZeroDelay(ModelError):
    pass


class EmptyKernel(ModelError):
    pass


class DenominatorOverflow(ModelError):
    """Rational gcd of the delays exceeds the configured denominator bound."""


class NonHermitianSample(ModelError):
    pass


@dataclass(frozen=True)
class KernelTerm:
    alpha: str
    beta: str
    gamma: complex
    delay: Fraction

    def __post_init__(self):
        object.__setattr__(self, "gamma", complex(self.gamma))
        object.__setattr__(self, "delay", Fraction(self.delay))
        if self.delay < 0:
            raise ModelError(f"negative delay {self.delay}")


@dataclass(frozen=True)
class NetworkSpec:
    """Subsystems, internal Hamiltonian, couplings and dissipation kernel.

    ``h_internal`` and every coupling operator live on the full single-copy
    space (the tensor product of all subsystem spaces), in rate units.
    ``rho0`` optionally carries the initial single-copy state.
    """

    subsystems: tuple[tuple[str, int], ...]
    h_internal: np.ndarray
    couplings: dict[str, np.ndarray]
    kernel: tuple[KernelTerm, ...]
    rho0: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "subsystems",
                           tuple((str(n), int(d)) for n, d in self.subsystems))
        object.__setattr__(self, "kernel", tuple(self.kernel))
        object.__setattr__(self, "h_internal",
                           np.asarray(self.h_internal, dtype=complex))

    @property
    def copy_dim(self) -> int:
        return math.prod(d for _, d in self.subsystems)

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(n for n, _ in self.subsystems)


@dataclass(frozen=True)
class ChainPlan:
    """Derived layout: base interval, copy count and integer delay offsets."""

    xi: Fraction
    n: int
    offsets: tuple[int, ...]  # one per kernel term, in spec.kernel order
    copy_dim: int

    @property
    def chain_shape(self) -> FactorShape:
        return FactorShape((self.copy_dim,) * self.n)


def validate(spec: NetworkSpec) -> NetworkSpec:
    """Check all invariants and return a canonicalized copy.

    Kernel terms are sorted by (alpha, beta, delay) and zero-delay
    amplitudes are replaced by their real part (the delta pair
    gamma*delta(t) + conj(gamma)*delta(t) only exposes 2*Re(gamma)).
    """
    if not spec.subsystems:
        raise DimensionMismatch("at least one subsystem required")
    dim = spec.copy_dim
    if spec.h_internal.shape != (dim, dim):
        raise DimensionMismatch(
            f"h_internal is {spec.h_internal.shape}, expected {(dim, dim)}")
    if not qlinalg.is_hermitian(spec.h_internal, tol=1e-12):
        raise NonHermitianHamiltonian("h_internal is not Hermitian to 1e-12")
    names = set(spec.names)
    for name, op in spec.couplings.items():
        if name not in names:
            raise DimensionMismatch(f"coupling for unknown subsystem {name!r}")
        if np.asarray(op).shape != (dim, dim):
            raise DimensionMismatch(
                f"coupling {name!r} is {np.asarray(op).shape}, expected {(dim, dim)}")
    if not spec.kernel:
        raise EmptyKernel("kernel must contain at least one term")
    canon = []
    for term in spec.kernel:
        if term.alpha not in names or term.beta not in names:
            raise DimensionMismatch(
                f"kernel term references unknown subsystem: {term}")
        if term.alpha not in spec.couplings or term.beta not in spec.couplings:
            raise DimensionMismatch(
                f"kernel term references subsystem without coupling: {term}")
        if term.delay == 0:
            if term.alpha != term.beta:
                raise CrossChannelZeroDelay(
                    f"zero-delay cross-channel term {term.alpha}->{term.beta} "
                    "is not supported")
            term = replace(term, gamma=complex(term.gamma.real, 0.0))
        canon.append(term)
    canon.sort(key=lambda t: (t.alpha, t.beta, t.delay))
    if spec.rho0 is not None:
        r = np.asarray(spec.rho0)
        if r.shape != (dim, dim):
            raise DimensionMismatch(f"rho0 is {r.shape}, expected {(dim, dim)}")
    return replace(spec, kernel=tuple(canon))


def _fraction_gcd(a: Fraction, b: Fraction) -> Fraction:
    return Fraction(math.gcd(a.numerator * b.denominator,
                             b.numerator * a.denominator),
                    a.denominator * b.denominator)


def interval_index(t: float, xi: float) -> tuple[int, float]:
    """Interval containing physical time t, with its relative time.

    Returns (l, t_rel) with t = (l-1)*xi + t_rel and t_rel in (0, xi] for
    t > 0.  A time exactly on a boundary belongs to the earlier interval
    (t_rel = xi); t = 0 gives (1, 0).
    """
    if t < 0:
        raise ValueError("time must be nonnegative")
    if t == 0:
        return 1, 0.0
    r = t / xi
    k = round(r)
    if k >= 1 and abs(r - k) <= 1e-12 * max(1.0, abs(r)):
        return k, xi
    l = max(math.ceil(r), 1)
    return l, t - (l - 1) * xi


def plan_chain(spec: NetworkSpec, t_final: float,
               xi: Fraction | None = None,
               max_denominator: int = MAX_DENOMINATOR) -> ChainPlan:
    """Derive the chain layout covering [0, t_final].

    xi is the rational gcd of the nonzero delays unless overridden (the
    override is required for a purely Markovian kernel).
    """
    nonzero = [t.delay for t in spec.kernel if t.delay > 0]
    if xi is None:
        if not nonzero:
            raise ModelError(
                "kernel has no nonzero delay; pass an explicit xi")
        g = nonzero[0]
        for d in nonzero[1:]:
            g = _fraction_gcd(g, d)
        xi = g
    else:
        xi = Fraction(xi)
        if xi <= 0:
            raise ModelError("xi must be positive")
    if xi.denominator > max_denominator:
        raise DenominatorOverflow(
            f"interval denominator {xi.denominator} exceeds {max_denominator}; "
            "delays are practically incommensurable")
    offsets = []
    for term in spec.kernel:
        q = term.delay / xi
        if q.denominator != 1:
            raise ModelError(f"delay {term.delay} is not a multiple of xi={xi}")
        offsets.append(int(q))
    if t_final <= 0:
        raise ModelError("t_final must be positive")
    n, _ = interval_index(t_final, float(xi))
    return ChainPlan(xi=xi, n=n, offsets=tuple(offsets), copy_dim=spec.copy_dim)


def discretize_kernel(f, h: Fraction, cutoff, channel: str = "A") -> list[KernelTerm]:
    """Discretize a Hermitian memory kernel into delta terms on an h-grid.

    ``f`` samples the kernel for t >= 0 (Hermitian: f(-t) = conj(f(t))).
    The emitted amplitudes are gamma_j = h * f(h j) / w_j with boundary
    weight w_0 = 2, w_{j>0} = 1, so that the delta-pair convention of
    KernelTerm reproduces the trapezoidal (left-Riemann with half endpoint)
    approximation of integrals over the kernel.

    Terms are emitted on the diagonal kernel block of ``channel``.
    """
    h = Fraction(h)
    if h <= 0:
        raise ModelError("step must be positive")
    f0 = complex(f(0.0))
    if abs(f0.imag) > 1e-12:
        raise NonHermitianSample(f"f(0) = {f0} has a nonzero imaginary part")
    jmax = int(Fraction(cutoff) / h)
    terms = []
    for j in range(jmax + 1):
        delay = h * j
        w = 2.0 if j == 0 else 1.0
        gamma = float(h) * complex(f(float(delay))) / w
        terms.append(KernelTerm(channel, channel, gamma, delay))
    return terms
