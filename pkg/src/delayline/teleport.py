"""The two-interval mapping rule as a quantum teleportation protocol.

Alice holds S0 and S1, Bob holds S2.  S0 and S2 start maximally
entangled, S1 starts in the system state.  S1 and S2 play the two chain
copies: the pair evolves under the two-copy cascaded generator up to
chain time t' = t - xi, then S1 alone completes its interval.  A Bell
measurement of S0 S1 with outcome 00 (or any outcome, if Bob corrected
his half in advance) leaves S2 in the physical reduced state at time t.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import expm

from .cascade import liouvillian_superop
from .model import ChainPlan, ModelError, NetworkSpec, interval_index


@dataclass(frozen=True)
class BellOutcome:
    p: int
    q: int
    probability: float
    conditional_state: np.ndarray


def bell_basis(d: int) -> list[np.ndarray]:
    """Orthonormal maximally entangled basis, index order (p, q)."""
    if d < 1:
        raise ValueError("dimension must be positive")
    out = []
    mu = np.arange(d)
    for p in range(d):
        for q in range(d):
            psi = np.zeros(d * d, dtype=complex)
            psi[mu * d + (mu + q) % d] = np.exp(2j * np.pi * mu * p / d)
            out.append(psi / np.sqrt(d))
    return out


def correction_unitary(p: int, q: int, d: int) -> np.ndarray:
    """Phase-and-shift unitary undoing Bell outcome (p, q)."""
    if not (0 <= p < d and 0 <= q < d):
        raise ValueError("need 0 <= p, q < d")
    u = np.zeros((d, d), dtype=complex)
    mu = np.arange(d)
    u[mu, (mu + q) % d] = np.exp(2j * np.pi * mu * p / d)
    return u


def _apply_pair_superop(rho3: np.ndarray, e: np.ndarray, d: int) -> np.ndarray:
    """Apply a superoperator on (S1, S2) to a state of S0 S1 S2."""
    r = rho3.reshape(d, d, d, d, d, d)
    r = r.transpose(1, 2, 4, 5, 0, 3).reshape(d ** 4, d * d)
    r = (e @ r).reshape(d, d, d, d, d, d)
    return r.transpose(4, 0, 1, 5, 2, 3).reshape(d ** 3, d ** 3)


def _apply_s1_superop(rho3: np.ndarray, e: np.ndarray, d: int) -> np.ndarray:
    """Apply a single-copy superoperator to S1 of a state of S0 S1 S2."""
    r = rho3.reshape(d, d, d, d, d, d)
    r = r.transpose(1, 4, 0, 2, 3, 5).reshape(d * d, d ** 4)
    r = (e @ r).reshape(d, d, d, d, d, d)
    return r.transpose(2, 0, 3, 4, 1, 5).reshape(d ** 3, d ** 3)


def teleport_protocol(spec: NetworkSpec, plan: ChainPlan, t: float,
                      mode: str = "postselect",
                      pq: tuple[int, int] | None = None,
                      tol: float = 1e-10,
                      rho0: np.ndarray | None = None) -> list[BellOutcome]:
    """Run the deterministic protocol; returns every Bell outcome.

    ``mode`` is "postselect" (no correction; the 00 branch carries the
    physical state) or "precorrect" (Bob applies the correction for the
    given outcome pq before the dynamics; that branch then carries the
    physical state).  Requires a time in the second interval, xi < t <=
    2 xi.  ``tol`` is unused by the dense exponentials and kept for
    interface symmetry.
    """
    d = spec.copy_dim
    xi = float(plan.xi)
    n, t_rel = interval_index(t, xi)
    if n != 2:
        raise ModelError(f"time {t} is not in the second interval (xi, 2*xi]")
    if mode not in ("postselect", "precorrect"):
        raise ModelError(f"unknown mode {mode!r}")
    if mode == "precorrect":
        if pq is None:
            raise ModelError("precorrect mode needs the outcome pq")
    r0 = spec.rho0 if rho0 is None else rho0
    if r0 is None:
        raise ModelError("no initial state: set spec.rho0 or pass rho0")
    r0 = np.asarray(r0, dtype=complex)

    # rho_012 = (1/D) sum_{mu nu} |mu><nu| x rho(0) x |mu><nu|,
    # subsystem order S0 S1 S2 with S0 and S2 entangled.
    t6 = np.zeros((d,) * 6, dtype=complex)
    for m in range(d):
        for nu in range(d):
            t6[m, :, m, nu, :, nu] += r0 / d
    rho3 = t6.reshape(d ** 3, d ** 3)

    if mode == "precorrect":
        u = correction_unitary(pq[0], pq[1], d)
        big_u = np.kron(np.eye(d * d), u)
        rho3 = big_u @ rho3 @ big_u.conj().T

    l2 = liouvillian_superop(spec, plan, 2).toarray()
    l1 = liouvillian_superop(spec, plan, 1).toarray()
    rho3 = _apply_pair_superop(rho3, expm(l2 * t_rel), d)
    rho3 = _apply_s1_superop(rho3, expm(l1 * (xi - t_rel)), d)

    rho6 = rho3.reshape((d,) * 6)
    outcomes = []
    for idx, psi in enumerate(bell_basis(d)):
        psi2 = psi.reshape(d, d)
        cond = np.einsum("ab,abicdj,cd->ij", psi2.conj(), rho6, psi2)
        prob = float(np.trace(cond).real)
        if prob > 1e-14:
            cond = cond / np.trace(cond)
        outcomes.append(BellOutcome(p=idx // d, q=idx % d,
                                    probability=prob,
                                    conditional_state=cond))
    return outcomes
