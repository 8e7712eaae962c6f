"""Multi-time correlation functions on the cascaded chain.

Operator insertions at physical time s act on chain copy l = ceil(s/xi)
at chain time s - (l-1)*xi.  Insertions whose chain time falls after the
readout's relative time are applied during the completion stage of
copies 1..n-1 (they carry a restricted superoperator); the two branches
realize the generalized quantum regression rule for the delay network.

Output-field correlations expand the field operator at the system ports:
E(t) = -i * sum_j gamma_j a_{beta_j; l-k_j}, dropping terms that reach
below copy 1 (those hit the input vacuum and vanish in normal order).
"""

from __future__ import annotations

import numpy as np
import scipy.sparse as sp

from . import cascade
from .model import ChainPlan, ModelError, NetworkSpec, interval_index
from .results import Insertion

__all__ = ["Insertion", "ZeroFlux", "two_time_correlation",
           "multi_time_correlation", "field_expansion", "flux", "g2"]

FLUX_FLOOR = 1e-12


class ZeroFlux(ArithmeticError):
    """Normalization of g2 is below the numerical floor."""


def _side_superop(op: sp.spmatrix, side: str) -> sp.csr_matrix:
    eye = sp.identity(op.shape[0], format="csr", dtype=complex)
    if side == "left":
        return sp.kron(op, eye, format="csr")
    return sp.kron(eye, op.T, format="csr")


def _chain_event(op_full: sp.spmatrix, op_primed: sp.spmatrix | None,
                 chain_time: float, side: str) -> cascade.ChainEvent:
    primed = None if op_primed is None else _side_superop(op_primed, side)
    return cascade.ChainEvent(chain_time=chain_time,
                              full=_side_superop(op_full, side),
                              primed=primed)


def _embed_pair(op: np.ndarray, d: int, n: int, l: int):
    """Operator on copy l, embedded in the n-copy and (n-1)-copy chains."""
    full = cascade._embed_sparse(op, d, n, l)
    primed = cascade._embed_sparse(op, d, n - 1, l) if l <= n - 1 else None
    return full, primed


def _insertion_events(insertions: list[Insertion], plan: ChainPlan,
                      n: int) -> list[cascade.ChainEvent]:
    """Events in application order.

    At equal chain times, left insertions compose outermost-first in the
    supplied order (the product O1 O2 ... multiplies from the left), so
    they are applied innermost-last; right insertions compose
    innermost-first and are applied in the supplied order.
    """
    d = plan.copy_dim
    xi = float(plan.xi)
    keyed = []
    for pos, ins in enumerate(insertions):
        l, s_rel = interval_index(ins.time, xi)
        if l > n:
            raise ModelError("insertion time beyond the readout interval")
        op = np.asarray(ins.op, dtype=complex)
        if op.shape != (d, d):
            raise ModelError(f"insertion operator must be {d}x{d}")
        full, primed = _embed_pair(op, d, n, l)
        keyed.append((s_rel, pos, ins.side, full, primed))
    events = []
    keyed.sort(key=lambda rec: rec[0])
    i = 0
    while i < len(keyed):
        j = i
        while j < len(keyed) and keyed[j][0] == keyed[i][0]:
            j += 1
        group = keyed[i:j]
        lefts = [r for r in group if r[2] == "left"]
        rights = [r for r in group if r[2] == "right"]
        for s_rel, _, side, full, primed in reversed(lefts):
            events.append(_chain_event(full, primed, s_rel, side))
        for s_rel, _, side, full, primed in rights:
            events.append(_chain_event(full, primed, s_rel, side))
        i = j
    return events


def multi_time_correlation(spec: NetworkSpec, plan: ChainPlan,
                           insertions: list[Insertion], tol: float = 1e-10,
                           rho0: np.ndarray | None = None,
                           max_intervals: int | None = None) -> complex:
    """Trace of the physical state after all insertions, read out at the
    latest insertion time.  Later trace-preserving evolution cannot
    change the value, so this is the correlation function itself.
    """
    if not insertions:
        raise ModelError("need at least one insertion")
    t_max = max(ins.time for ins in insertions)
    if t_max <= 0:
        r0 = spec.rho0 if rho0 is None else rho0
        chi = np.asarray(r0, dtype=complex).copy()
        lefts = [i.op for i in insertions if i.side == "left"]
        rights = [i.op for i in insertions if i.side == "right"]
        for op in reversed(lefts):
            chi = np.asarray(op, complex) @ chi
        for op in rights:
            chi = chi @ np.asarray(op, complex)
        return complex(np.trace(chi))
    n, t_rel = interval_index(t_max, float(plan.xi))
    cascade._check_cap(n, plan.copy_dim, max_intervals)
    events = _insertion_events(insertions, plan, n)
    rho = cascade.contracted_states(spec, plan, n, [t_rel], tol=tol,
                                    rho0=rho0, events=events)[0]
    return complex(np.trace(rho))


def two_time_correlation(spec: NetworkSpec, plan: ChainPlan,
                         a: np.ndarray, b: np.ndarray, c: np.ndarray,
                         t1: float, t2: float, tol: float = 1e-10,
                         rho0: np.ndarray | None = None,
                         max_intervals: int | None = None) -> complex:
    """<A(t1) B(t2) C(t1)> for single-copy operators, t1 <= t2."""
    if t2 < t1:
        raise ModelError("need t1 <= t2")
    ins = [Insertion(t1, c, "left"), Insertion(t1, a, "right"),
           Insertion(t2, b, "left")]
    return multi_time_correlation(spec, plan, ins, tol=tol, rho0=rho0,
                                  max_intervals=max_intervals)


def field_expansion(spec: NetworkSpec, plan: ChainPlan, t: float, m: int,
                    alpha: str | None = None) -> tuple[float, sp.csr_matrix]:
    """Output field at time t as an operator on the m-copy chain.

    Returns (chain_time, operator).  ``alpha`` selects the output port;
    with one coupling channel it may be omitted.
    """
    if alpha is None:
        if len(spec.names) == 1 or len({t_.alpha for t_ in spec.kernel}) == 1:
            alpha = spec.kernel[0].alpha
        else:
            raise ModelError("several ports: alpha must be given")
    d = plan.copy_dim
    xi = float(plan.xi)
    l, s_rel = interval_index(t, xi)
    if l > m:
        raise ModelError("field time beyond the chain horizon")
    dim = d ** m
    op = sp.csr_matrix((dim, dim), dtype=complex)
    found = False
    for term, k in zip(spec.kernel, plan.offsets):
        if term.alpha != alpha:
            continue
        found = True
        if l - k < 1:
            continue
        op = op + (-1j) * complex(term.gamma) * cascade._embed_sparse(
            spec.couplings[term.beta], d, m, l - k)
    if not found:
        raise ModelError(f"no kernel term with output port {alpha!r}")
    return s_rel, op.tocsr()


def _trace_after_events(spec, plan, n, t_rel, events, tol, rho0,
                        max_intervals) -> complex:
    cascade._check_cap(n, plan.copy_dim, max_intervals)
    rho = cascade.contracted_states(spec, plan, n, [t_rel], tol=tol,
                                    rho0=rho0, events=events)[0]
    return complex(np.trace(rho))


def flux(spec: NetworkSpec, plan: ChainPlan, t: float, tol: float = 1e-10,
         alpha: str | None = None, rho0: np.ndarray | None = None,
         max_intervals: int | None = None) -> float:
    """Normally ordered photon flux <E^dag(t) E(t)> at the output port."""
    if t <= 0:
        raise ModelError("flux requires t > 0")
    n, t_rel = interval_index(t, float(plan.xi))
    s_rel, e_full = field_expansion(spec, plan, t, n, alpha)
    nf = (e_full.conj().T @ e_full).tocsr()
    ev = cascade.ChainEvent(chain_time=s_rel,
                            full=_side_superop(nf, "left"))
    val = _trace_after_events(spec, plan, n, t_rel, [ev], tol, rho0,
                              max_intervals)
    return float(val.real)


def g2(spec: NetworkSpec, plan: ChainPlan, t1: float, t2: float,
       tol: float = 1e-10, alpha: str | None = None,
       rho0: np.ndarray | None = None,
       max_intervals: int | None = None) -> float:
    """Normalized intensity correlation of the output field,
    <E^dag(t1) E^dag(t2) E(t2) E(t1)> / (<E^dag E>(t1) <E^dag E>(t2)),
    for 0 < t1 <= t2.  Raises ZeroFlux when a normalizing flux is below
    the numerical floor.
    """
    if not 0 < t1 <= t2:
        raise ModelError("need 0 < t1 <= t2")
    f1 = flux(spec, plan, t1, tol=tol, alpha=alpha, rho0=rho0,
              max_intervals=max_intervals)
    f2 = flux(spec, plan, t2, tol=tol, alpha=alpha, rho0=rho0,
              max_intervals=max_intervals)
    if f1 < FLUX_FLOOR or f2 < FLUX_FLOOR:
        raise ZeroFlux(f"flux too small to normalize ({f1:.3e}, {f2:.3e})")
    n, t_rel = interval_index(t2, float(plan.xi))
    d = plan.copy_dim
    xi = float(plan.xi)

    s1, e1 = field_expansion(spec, plan, t1, n, alpha)
    s2, e2 = field_expansion(spec, plan, t2, n, alpha)
    events = [
        cascade.ChainEvent(chain_time=s1, full=_side_superop(e1, "left"),
                           primed=_primed_side(spec, plan, t1, n, alpha, "left")),
        cascade.ChainEvent(chain_time=s1,
                           full=_side_superop(e1.conj().T.tocsr(), "right"),
                           primed=_primed_side(spec, plan, t1, n, alpha,
                                               "right", dagger=True)),
        cascade.ChainEvent(chain_time=s2,
                           full=_side_superop((e2.conj().T @ e2).tocsr(),
                                              "left")),
    ]
    events.sort(key=lambda e: e.chain_time)
    num = _trace_after_events(spec, plan, n, t_rel, events, tol, rho0,
                              max_intervals)
    return float(num.real) / (f1 * f2)


def _primed_side(spec, plan, t, n, alpha, side, dagger=False):
    """Completion-stage superoperator for a field insertion, if it fits
    on copies 1..n-1 (None otherwise; only needed when it does)."""
    l, _ = interval_index(t, float(plan.xi))
    highest = 0
    for term, k in zip(spec.kernel, plan.offsets):
        if term.alpha == (alpha or term.alpha) and l - k >= 1:
            highest = max(highest, l - k)
    if highest > n - 1 or n == 1:
        return None
    _, op = field_expansion(spec, plan, t, n - 1, alpha)
    if dagger:
        op = op.conj().T.tocsr()
    return _side_superop(op, side)
