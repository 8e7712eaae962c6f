"""Independent reference solutions used to cross-check the chain engine.

Nothing here touches the cascaded-chain code; these are small direct
integrations (a delay differential equation for the driven-free qubit
amplitude, plain Lindblad evolution for zero-delay kernels, and a
closed-system consistency check of the interval decomposition).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from . import qlinalg
from .model import NetworkSpec
from .results import Insertion, ObservableSeries


class OracleError(ValueError):
    pass


@dataclass(frozen=True)
class DdeParams:
    """Single-qubit single-excitation amplitude model.

    c(t) obeys dc/dt = -gamma c(t) - gamma e^{i phi} c(t - tau) with
    c(t) = 0 for t < 0 and c(0) = c0.  The excited population is |c|^2.
    """

    gamma: float
    phi: float
    tau: float
    c0: complex = 1.0 + 0j

    def __post_init__(self):
        if self.gamma < 0:
            raise OracleError("gamma must be nonnegative")
        if self.tau <= 0:
            raise OracleError("tau must be positive")


def dde_amplitude(params: DdeParams, times, tol: float = 1e-12) -> np.ndarray:
    """Amplitude c(t) on a grid, by the method of steps.

    Each interval [k tau, (k+1) tau] is integrated with the previous
    interval's dense interpolant supplying the delayed value.
    """
    times = np.asarray(times, dtype=float)
    if np.any(times < 0):
        raise OracleError("times must be nonnegative")
    if times.size == 0:
        return np.zeros(0, dtype=complex)
    g, phi, tau = params.gamma, params.phi, params.tau
    fb = g * np.exp(1j * phi)
    t_max = float(times.max())
    sols = []

    def history(t):
        if t <= 0:
            return complex(params.c0) if t == 0 else 0.0 + 0j
        if not sols:
            return 0.0 + 0j
        k = min(int(t / tau), len(sols) - 1)
        # fall back to earlier segments at boundaries
        while k >= 0 and t < k * tau:
            k -= 1
        y = sols[k].sol(np.clip(t, k * tau, (k + 1) * tau))
        return y[0] + 1j * y[1]

    c_start = complex(params.c0)
    k = 0
    while k * tau < t_max or k == 0:
        a, b = k * tau, min((k + 1) * tau, t_max)
        if b <= a:
            break

        def rhs(t, y):
            c = y[0] + 1j * y[1]
            delayed = history(t - tau) if t - tau >= 0 else 0.0
            dc = -g * c - fb * delayed
            return [dc.real, dc.imag]

        sol = solve_ivp(rhs, (a, (k + 1) * tau), [c_start.real, c_start.imag],
                        method="DOP853", dense_output=True, rtol=tol,
                        atol=tol * 1e-2)
        if not sol.success:
            raise OracleError(f"segment integration failed: {sol.message}")
        sols.append(sol)
        c_start = sol.y[0, -1] + 1j * sol.y[1, -1]
        k += 1

    out = np.empty(times.shape, dtype=complex)
    for i, t in enumerate(times):
        if t == 0:
            out[i] = params.c0
        else:
            out[i] = history(min(t, len(sols) * tau))
    return out


def _zero_delay_generator(spec: NetworkSpec):
    """Single-copy Lindblad generator for an all-zero-delay kernel."""
    if any(term.delay != 0 for term in spec.kernel):
        raise OracleError("reference generator needs an all-zero-delay kernel")
    h = spec.h_internal

    pairs = [(spec.couplings[t.alpha], spec.couplings[t.beta], t.gamma.real)
             for t in spec.kernel]

    def gen(chi):
        out = -1j * (h @ chi - chi @ h)
        for a, b, g in pairs:
            ad = a.conj().T
            bd = b.conj().T
            out = out + g * (b @ chi @ ad - ad @ b @ chi)
            out = out + g * (a @ chi @ bd - chi @ bd @ a)
        return out

    return gen


def lindblad_reference(spec: NetworkSpec, observable: np.ndarray, times,
                       tol: float = 1e-10,
                       rho0: np.ndarray | None = None) -> ObservableSeries:
    """Direct single-copy Lindblad expectation values (no chain)."""
    times = np.asarray(times, dtype=float)
    gen = _zero_delay_generator(spec)
    r0 = spec.rho0 if rho0 is None else rho0
    if r0 is None:
        raise OracleError("no initial state")
    obs = np.asarray(observable, dtype=complex)
    order = np.argsort(times, kind="stable")
    ts = [times[i] for i in order if times[i] > 0]
    snaps = qlinalg.propagate_times(gen, np.asarray(r0, complex), 0.0, ts, tol=tol)
    vals = np.zeros(len(times))
    imag = 0.0
    it = iter(snaps)
    for i in order:
        rho = np.asarray(r0, complex) if times[i] == 0 else next(it)
        v = np.trace(obs @ rho)
        vals[i] = v.real
        imag = max(imag, abs(v.imag))
    return ObservableSeries(times=times, values=vals, imag_residue=imag)


def lindblad_regression(spec: NetworkSpec, insertions: list[Insertion],
                        tol: float = 1e-10,
                        rho0: np.ndarray | None = None) -> complex:
    """Multi-time correlation by direct quantum regression (zero delays).

    The sandwiched state is evolved between insertion times with the
    single-copy Lindblad generator; the value is the final trace.  At
    equal times, left operators multiply outermost-first in the given
    order and right operators innermost-first.
    """
    gen = _zero_delay_generator(spec)
    r0 = spec.rho0 if rho0 is None else rho0
    if r0 is None:
        raise OracleError("no initial state")
    chi = np.asarray(r0, dtype=complex).copy()
    groups: dict[float, list[Insertion]] = {}
    for ins in insertions:
        groups.setdefault(float(ins.time), []).append(ins)
    t_cur = 0.0
    for t in sorted(groups):
        if t < t_cur:
            raise OracleError("insertion times must be nonnegative")
        if t > t_cur:
            chi = qlinalg.propagate(gen, chi, t_cur, t, tol=tol)
            t_cur = t
        lefts = [i.op for i in groups[t] if i.side == "left"]
        rights = [i.op for i in groups[t] if i.side == "right"]
        for op in reversed(lefts):
            chi = np.asarray(op, complex) @ chi
        for op in rights:
            chi = chi @ np.asarray(op, complex)
    return complex(np.trace(chi))


def closed_decomposition_check(h: np.ndarray, t: float, n: int,
                               rho0: np.ndarray | None = None) -> float:
    """Max deviation between direct unitary evolution and the interval
    decomposition with matrix-unit branch states, for a closed system.

    The chain copies do not interact (no kernel), so each copy evolves
    under the same one-body unitary; the branch sum must still resolve
    the identity exactly.  Returns max |rho_dec - rho_direct|.
    """
    h = np.asarray(h, dtype=complex)
    d = h.shape[0]
    if rho0 is None:
        rho0 = np.zeros((d, d), dtype=complex)
        rho0[0, 0] = 1.0
    if n < 1 or t <= 0:
        raise OracleError("need n >= 1 and t > 0")
    xi = t / n
    u = expm(-1j * h * xi)
    rho_direct = expm(-1j * h * t) @ rho0 @ expm(1j * h * t)
    units = qlinalg.matrix_units_basis(d)
    shape = qlinalg.FactorShape((d,) * n)
    rho_dec = np.zeros((d, d), dtype=complex)
    for flat in range(d ** (2 * (n - 1))):
        idx = []
        r = flat
        for _ in range(n - 1):
            idx.append(r % (d * d))
            r //= d * d
        idx.reverse()
        chi = rho0
        dual = np.array([[1.0 + 0j]])
        for j in idx:
            chi = np.kron(chi, units[j])
            dual = np.kron(dual, units[j].conj().T)
        big_u = np.eye(1, dtype=complex)
        for _ in range(n):
            big_u = np.kron(big_u, u)
        chi = big_u @ chi @ big_u.conj().T
        dual_full = np.kron(dual, np.eye(d))
        rho_dec += qlinalg.partial_trace(chi @ dual_full, shape,
                                         tuple(range(n - 1)))
    return float(np.max(np.abs(rho_dec - rho_direct)))
