"""Cascaded-chain evolution and single-copy state reconstruction.

A network with discrete-delay dissipation kernel is evolved by unrolling
time into intervals of length xi and attaching one fresh copy of the
system per interval.  The chain of m copies evolves under a cascaded
Liouvillian whose cross terms connect copy l to copy l - k, where k is
the integer delay offset of each kernel term.  The physical reduced
state at time t = (n-1)*xi + t_rel is recovered by letting the n-copy
chain run to chain time t_rel, completing copies 1..n-1 to the full
interval, and contracting against a dual operator basis.

The completion stage never touches copy n, so instead of finishing each
basis branch separately we propagate the pairing vectors backwards with
the transposed (n-1)-copy generator and contract once.  This is exact
and turns the expensive stage into a single linear solve shared by all
branches.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from . import qlinalg
from .model import ChainPlan, ModelError, NetworkSpec, interval_index
from .results import ObservableSeries, ReconstructionResult

# Soft budget for the largest dense work array in column-chunked linear
# solves, in complex entries (about 130 MB).  The ODE solver holds a
# handful of arrays of this size.
_CHUNK_BUDGET = 8_000_000


class CapExceeded(RuntimeError):
    """Requested horizon needs more chain copies than the resource cap."""


def default_max_intervals(copy_dim: int) -> int:
    """Copy-count cap keeping the chunked solve within a few GB."""
    if copy_dim <= 2:
        return 8
    if copy_dim <= 4:
        return 5
    return 3


def _check_cap(n: int, copy_dim: int, max_intervals: int | None):
    cap = default_max_intervals(copy_dim) if max_intervals is None else max_intervals
    if n > cap:
        raise CapExceeded(
            f"horizon needs {n} chain copies of dimension {copy_dim}, "
            f"cap is {cap} (raise max_intervals to override)")


def _embed_sparse(op: np.ndarray, d: int, m: int, l: int) -> sp.csr_matrix:
    """Single-copy operator on copy l (1-based) of an m-copy chain."""
    a = sp.csr_matrix(op)
    left = sp.identity(d ** (l - 1), format="csr")
    right = sp.identity(d ** (m - l), format="csr")
    return sp.kron(sp.kron(left, a, format="csr"), right, format="csr")


def liouvillian_superop(spec: NetworkSpec, plan: ChainPlan, m: int) -> sp.csr_matrix:
    """Sparse generator of the m-copy cascaded chain, acting on row-major
    vectorized operators (vec(A X B) = kron(A, B.T) vec(X)).

    Copy l couples to copy l - k for each kernel term with offset k;
    terms reaching below copy 1 are absent, which encodes the vacuum
    state of the not-yet-scattered field.
    """
    d = plan.copy_dim
    big = d ** m
    dim = big * big
    if m == 0:
        return sp.csr_matrix((1, 1), dtype=complex)
    eye = sp.identity(big, format="csr", dtype=complex)
    lh = sp.csr_matrix((dim, dim), dtype=complex)
    for l in range(1, m + 1):
        h = _embed_sparse(spec.h_internal, d, m, l)
        lh = lh + (-1j) * (sp.kron(h, eye, format="csr")
                           - sp.kron(eye, h.T, format="csr"))
    for term, k in zip(spec.kernel, plan.offsets):
        g = complex(term.gamma)
        op_a = spec.couplings[term.alpha]
        op_b = spec.couplings[term.beta]
        for l in range(1, m + 1):
            if l - k < 1:
                continue
            aa = _embed_sparse(op_a, d, m, l)
            ab = _embed_sparse(op_b, d, m, l - k)
            aad = aa.conj().T.tocsr()
            abd = ab.conj().T.tocsr()
            # gamma * [a_b chi, a_a^dag] + gamma* * [a_a, chi a_b^dag]
            lh = lh + g * (sp.kron(ab, aa.conj(), format="csr")
                           - sp.kron(aad @ ab, eye, format="csr"))
            lh = lh + np.conj(g) * (sp.kron(aa, ab.conj(), format="csr")
                                    - sp.kron(eye, (abd @ aa).T, format="csr"))
    return lh.tocsr()


def chain_liouvillian(spec: NetworkSpec, plan: ChainPlan, m: int):
    """Matrix-in, matrix-out form of the m-copy chain generator."""
    lh = liouvillian_superop(spec, plan, m)
    big = plan.copy_dim ** m

    def apply(chi: np.ndarray) -> np.ndarray:
        chi = np.asarray(chi, dtype=complex)
        if chi.shape != (big, big):
            raise ModelError(f"chain operator must be {big}x{big}")
        return (lh @ chi.reshape(-1)).reshape(big, big)

    return apply


@dataclass(frozen=True)
class ChainEvent:
    """Operator insertion applied to the chain at a fixed chain time.

    ``full`` is the superoperator on the n-copy chain; ``primed`` is the
    same map restricted to copies 1..n-1, needed only when the event
    falls in the completion stage (chain_time > t_rel).  Events are
    applied in list order.
    """

    chain_time: float
    full: sp.spmatrix
    primed: sp.spmatrix | None = None


# Below this value of duration * ||L||_1 a truncated Taylor series of the
# exponential converges in a few terms with no cancellation; it keeps
# sparse inputs sparse, which matters for the injection stage of large
# chains just past an interval boundary.
_TAYLOR_THRESHOLD = 0.05

# Dense expm beats the column-chunked linear solve for the completion
# map once the (n-1)-copy superoperator is this large.
_EXPM_DIM = 2048


def _one_norm(lh: sp.spmatrix) -> float:
    return float(np.abs(lh).sum(axis=0).max()) if lh.nnz else 0.0


def _taylor_apply(lh: sp.spmatrix, y, dt: float, tol: float):
    """exp(lh*dt) @ y by plain Taylor series; only valid for small
    dt*||lh||.  Keeps sparse y sparse."""
    out = y.copy()
    term = y.copy()
    for k in range(1, 40):
        term = (lh @ term) * (dt / k)
        out = out + term
        if sp.issparse(term):
            mag = float(np.abs(term.data).max()) if term.nnz else 0.0
        else:
            mag = float(np.abs(term).max())
        if mag < tol * 1e-4:
            break
    return out


def _evolve_block(lh: sp.spmatrix, y, t0: float, times, tol: float) -> list:
    """Snapshots of exp(lh*(t - t0)) @ y at each t in times (ascending).

    Dispatches between a short-time Taylor expansion (sparse friendly)
    and the adaptive RK integrator.  Output blocks are dense except on
    the Taylor path with sparse input.
    """
    times = list(times)
    if not times:
        return []
    span = times[-1] - t0
    if span <= 0:
        return [y.copy() for _ in times]
    if span * _one_norm(lh) <= _TAYLOR_THRESHOLD:
        return [_taylor_apply(lh, y, t - t0, tol) for t in times]
    if sp.issparse(y):
        y = y.toarray()
    gen = lambda v: lh @ v
    return qlinalg.propagate_times(gen, y, t0, times, tol=tol)


def _chunk_cols(total_cols: int, rows: int) -> int:
    return max(1, min(total_cols, _CHUNK_BUDGET // max(1, rows)))


def _pairing_matrix(n: int, d: int, basis: list[np.ndarray] | None) -> np.ndarray | None:
    """Columns are the vectorized duals conj(vec(e_J)) on copies 1..n-1.

    For the matrix-unit basis with branch index J = (R, C) in row-major
    order this is the identity, signalled by returning None.
    """
    if basis is None or n == 1:
        return None
    nb = len(basis)
    cols = []
    for flat in range(nb ** (n - 1)):
        idx = []
        r = flat
        for _ in range(n - 1):
            idx.append(r % nb)
            r //= nb
        idx.reverse()
        e = np.array([[1.0 + 0j]])
        for j in idx:
            e = np.kron(e, basis[j])
        cols.append(np.conj(e.reshape(-1)))
    return np.array(cols, dtype=complex).T


def _injection_block(rho0: np.ndarray, n: int, d: int, j0: int, j1: int,
                     basis: list[np.ndarray] | None):
    """Initial chain vectors vec(rho0 x e_J) for J in [j0, j1), as columns.

    Sparse for the matrix-unit branch basis (each column has one entry
    per nonzero of rho0), dense for a general basis.
    """
    dp = d ** (n - 1)
    big = d ** n
    k = j1 - j0
    if basis is None:
        cols = np.arange(j0, j1)
        rr = cols // dp
        cc = cols % dp
        nz = np.argwhere(np.abs(rho0) > 0)
        rows, ccol, vals = [], [], []
        for i1, o1 in nz:
            rows.append((i1 * dp + rr) * big + (o1 * dp + cc))
            ccol.append(np.arange(k))
            vals.append(np.full(k, rho0[i1, o1]))
        return sp.csc_matrix(
            (np.concatenate(vals), (np.concatenate(rows), np.concatenate(ccol))),
            shape=(big * big, k), dtype=complex)
    y = np.zeros((big * big, k), dtype=complex)
    nb = len(basis)
    for c, flat in enumerate(range(j0, j1)):
        idx = []
        r = flat
        for _ in range(n - 1):
            idx.append(r % nb)
            r //= nb
        idx.reverse()
        e = rho0
        for j in idx:
            e = np.kron(e, basis[j])
        y[:, c] = e.reshape(-1)
    return y


def _completion_vectors(lp_t: sp.spmatrix, n: int, d: int, t_rels: list[float],
                        xi: float, events_b: list[ChainEvent], tol: float,
                        basis: list[np.ndarray] | None) -> list[np.ndarray]:
    """Backward-propagated pairing vectors, one (dp^2, nJ) array per t_rel.

    Row index is the vectorized (copies 1..n-1) operator index; column
    index is the branch J.  Entry [a, J] pairs against the chain state
    of branch J at the end of its interval.
    """
    dp = d ** (n - 1)
    dim = dp * dp
    v = _pairing_matrix(n, d, basis)
    nj = dim if v is None else v.shape[1]

    if events_b:
        if len(t_rels) != 1:
            raise ModelError("events require a single target time")
        t_rel = t_rels[0]
        w = np.eye(dim, dtype=complex) if v is None else v.copy()
        # Apply the transposed completion map right-to-left: evolve over
        # the last segment first, then the last event, and so on down to
        # chain time t_rel.
        bounds = [t_rel] + [e.chain_time for e in events_b] + [xi]
        chunk = _chunk_cols(nj, dim)
        for i in range(len(events_b), -1, -1):
            dt = bounds[i + 1] - bounds[i]
            if dt > 0:
                for j0 in range(0, nj, chunk):
                    j1 = min(nj, j0 + chunk)
                    w[:, j0:j1] = _evolve_block(lp_t, w[:, j0:j1], 0.0, [dt], tol)[-1]
            if i > 0:
                w = events_b[i - 1].primed.T @ w
        return [w]

    deltas = [xi - t for t in t_rels]
    if v is None and dim >= _EXPM_DIM:
        # One dense exponential per target time; at this size it beats
        # the chunked linear solve and is accurate to roundoff.
        return [np.eye(dim, dtype=complex) if dlt == 0
                else sla.expm((lp_t * dlt).toarray()) for dlt in deltas]
    order = np.argsort(deltas)
    sorted_deltas = [deltas[i] for i in order]
    w0 = np.eye(dim, dtype=complex) if v is None else v
    out: list[np.ndarray | None] = [None] * len(t_rels)
    chunk = _chunk_cols(nj, dim)
    snaps = [np.empty((dim, nj), dtype=complex) for _ in t_rels]
    for j0 in range(0, nj, chunk):
        j1 = min(nj, j0 + chunk)
        blocks = _evolve_block(lp_t, w0[:, j0:j1].copy(), 0.0, sorted_deltas, tol)
        for pos, blk in zip(order, blocks):
            snaps[pos][:, j0:j1] = blk
    for i in range(len(t_rels)):
        out[i] = snaps[i]
    return out  # type: ignore[return-value]


def contracted_states(spec: NetworkSpec, plan: ChainPlan, n: int,
                      t_rels: list[float], tol: float = 1e-10,
                      rho0: np.ndarray | None = None,
                      events: list[ChainEvent] | None = None,
                      basis: list[np.ndarray] | None = None) -> list[np.ndarray]:
    """Reduced single-copy matrices at chain times t_rels within interval n.

    t_rels must be strictly increasing in (0, xi].  With ``events``
    (operator insertions at fixed chain times) only a single t_rel is
    supported; events with chain_time <= t_rel act on the running n-copy
    chain, later ones act during the completion of copies 1..n-1 and
    must carry their ``primed`` restriction.  ``basis`` switches the
    branch decomposition to an arbitrary single-copy operator basis
    (dense path, small chains only); the result is basis independent.
    """
    d = plan.copy_dim
    xi = float(plan.xi)
    if rho0 is None:
        rho0 = spec.rho0
    if rho0 is None:
        raise ModelError("no initial state: set spec.rho0 or pass rho0")
    rho0 = np.asarray(rho0, dtype=complex)
    if rho0.shape != (d, d):
        raise ModelError(f"initial state must be {d}x{d}")
    if not t_rels:
        return []
    if any(t <= 0 or t > xi * (1 + 1e-12) for t in t_rels):
        raise ModelError("relative times must lie in (0, xi]")
    if any(b <= a for a, b in zip(t_rels, t_rels[1:])):
        raise ModelError("relative times must be strictly increasing")

    events = list(events or [])
    t_ref = t_rels[0]
    events_a = [e for e in events if e.chain_time <= t_ref * (1 + 1e-12)]
    events_b = [e for e in events if e.chain_time > t_ref * (1 + 1e-12)]
    if events_b and any(e.primed is None for e in events_b):
        raise ModelError("completion-stage event lacks its primed restriction")

    dp = d ** (n - 1)
    big = d ** n
    nvec = big * big
    nj = dp * dp if basis is None else len(basis) ** (n - 1)

    lh = liouvillian_superop(spec, plan, n)
    lp_t = liouvillian_superop(spec, plan, n - 1).T.tocsr()
    wmats = _completion_vectors(lp_t, n, d, t_rels, xi, events_b, tol, basis)

    rhos = [np.zeros((d, d), dtype=complex) for _ in t_rels]
    chunk = _chunk_cols(nj, nvec * max(1, len(t_rels) // 2))
    for j0 in range(0, nj, chunk):
        j1 = min(nj, j0 + chunk)
        y = _injection_block(rho0, n, d, j0, j1, basis)
        t_cur = 0.0
        for ev in events_a:
            if ev.chain_time > t_cur:
                y = _evolve_block(lh, y, t_cur, [ev.chain_time], tol)[-1]
                t_cur = ev.chain_time
            y = ev.full @ y
        remaining = [t for t in t_rels if t >= t_cur]
        if len(remaining) != len(t_rels):
            raise ModelError("event chain time exceeds a target time")
        snaps = _evolve_block(lh, y, t_cur, t_rels, tol)
        for i, x in enumerate(snaps):
            if sp.issparse(x):
                x = x.toarray()
            xt = x.reshape(dp, d, dp, d, j1 - j0)
            wt = wmats[i][:, j0:j1].reshape(dp, dp, j1 - j0)
            rhos[i] += np.einsum("xpyqk,xyk->pq", xt, wt)
    return rhos


def reconstruct_state(spec: NetworkSpec, plan: ChainPlan, t: float,
                      tol: float = 1e-10, rho0: np.ndarray | None = None,
                      max_intervals: int | None = None) -> ReconstructionResult:
    """Physical reduced state at time t with sanity diagnostics."""
    d = plan.copy_dim
    if t == 0:
        r = np.asarray(spec.rho0 if rho0 is None else rho0, dtype=complex)
        return _diagnose(0.0, r)
    n, t_rel = interval_index(t, float(plan.xi))
    _check_cap(n, d, max_intervals)
    rho = contracted_states(spec, plan, n, [t_rel], tol=tol, rho0=rho0)[0]
    return _diagnose(t, rho)


def _diagnose(t: float, rho: np.ndarray) -> ReconstructionResult:
    herm = float(np.max(np.abs(rho - rho.conj().T)))
    tr_err = abs(np.trace(rho) - 1.0)
    sym = 0.5 * (rho + rho.conj().T)
    evals = np.linalg.eigvalsh(sym)
    return ReconstructionResult(time=float(t), rho=rho, trace_error=float(tr_err),
                                hermiticity_error=herm,
                                min_eigenvalue=float(evals.min()))


def states_series(spec: NetworkSpec, plan: ChainPlan, times,
                  tol: float = 1e-10, rho0: np.ndarray | None = None,
                  max_intervals: int | None = None) -> list[ReconstructionResult]:
    """Reduced states on a time grid, grouped by interval so every group
    shares one chain solve.  Results follow the input time order."""
    times = np.asarray(times, dtype=float)
    xi = float(plan.xi)
    order = np.argsort(times, kind="stable")
    groups: dict[int, list[tuple[int, float]]] = {}
    zero_idx = []
    for i in order:
        t = times[i]
        if t == 0:
            zero_idx.append(i)
            continue
        n, t_rel = interval_index(t, xi)
        _check_cap(n, spec.copy_dim, max_intervals)
        groups.setdefault(n, []).append((int(i), t_rel))
    out: list[ReconstructionResult | None] = [None] * len(times)
    if zero_idx:
        r0 = spec.rho0 if rho0 is None else rho0
        if r0 is None:
            raise ModelError("no initial state: set spec.rho0 or pass rho0")
        for i in zero_idx:
            out[i] = _diagnose(0.0, np.asarray(r0, dtype=complex))
    for n in sorted(groups):
        entries = groups[n]
        t_rels = [tr for _, tr in entries]
        rhos = contracted_states(spec, plan, n, t_rels, tol=tol, rho0=rho0)
        for (i, _), rho in zip(entries, rhos):
            out[i] = _diagnose(times[i], rho)
    return out  # type: ignore[return-value]


def observable_series(spec: NetworkSpec, plan: ChainPlan, observable: np.ndarray,
                      times, tol: float = 1e-10,
                      rho0: np.ndarray | None = None,
                      max_intervals: int | None = None) -> ObservableSeries:
    """Expectation of a single-copy observable on a time grid.

    The imaginary residue of tr(O rho) is reported, not discarded
    silently, since the observable is expected to be Hermitian.
    """
    obs = np.asarray(observable, dtype=complex)
    states = states_series(spec, plan, times, tol=tol, rho0=rho0,
                           max_intervals=max_intervals)
    values = np.zeros(len(states))
    imag = 0.0
    for i, st in enumerate(states):
        v = np.trace(obs @ st.rho)
        values[i] = v.real
        imag = max(imag, abs(v.imag))
    return ObservableSeries(times=np.asarray(times, dtype=float),
                            values=values, imag_residue=imag)
