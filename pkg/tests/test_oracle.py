"""Tests for the independent reference solvers."""

from fractions import Fraction

import numpy as np
import pytest

from delayline import model, oracle
from delayline.results import Insertion

from conftest import (EXCITED, GROUND, NUMBER, SIGMA_MINUS, SIGMA_PLUS,
                      qubit_spec, random_density, random_hermitian)


def test_dde_no_feedback_is_pure_decay():
    params = oracle.DdeParams(gamma=0.8, phi=np.pi, tau=50.0)
    times = np.linspace(0.0, 3.0, 7)
    amps = oracle.dde_amplitude(params, times)
    assert np.allclose(np.abs(amps) ** 2, np.exp(-2 * 0.8 * times), atol=1e-9)


def test_dde_piecewise_exact_first_two_intervals():
    """Method of steps has a closed form over the first delayed interval."""
    gamma, tau = 1.0, 1.0
    params = oracle.DdeParams(gamma=gamma, phi=0.0, tau=tau)
    t = 1.6
    amps = oracle.dde_amplitude(params, [t])
    # c(t) = e^{-g t} - g (t - tau) e^{-g (t - tau)} for t in [tau, 2 tau]
    # with e^{i phi} = 1.
    want = (np.exp(-gamma * t)
            - gamma * (t - tau) * np.exp(-gamma * (t - tau)))
    assert np.isclose(amps[0], want, atol=1e-9)


def test_dde_dark_state_trapping():
    """With phi = pi and gamma tau << 1 the decay stalls well above zero."""
    params = oracle.DdeParams(gamma=1.0, phi=np.pi, tau=0.2)
    amps = oracle.dde_amplitude(params, [10.0, 12.0])
    pops = np.abs(amps) ** 2
    assert pops[0] > 0.4
    assert np.isclose(pops[0], pops[1], atol=1e-3)


def test_lindblad_reference_decay():
    spec = qubit_spec(feedback=0.0)
    times = np.linspace(0.0, 2.0, 9)
    series = oracle.lindblad_reference(spec, NUMBER, times, rho0=EXCITED)
    assert np.allclose(series.values, np.exp(-2.0 * times), atol=1e-9)


def test_lindblad_regression_decaying_coherence():
    spec = qubit_spec(feedback=0.0)
    t1, t2 = 0.3, 1.1
    val = oracle.lindblad_regression(
        spec,
        [Insertion(t1, SIGMA_PLUS, "right"), Insertion(t2, SIGMA_MINUS, "left")],
        rho0=EXCITED)
    # <sigma+(t1) sigma-(t2)> = e^{-gamma (t2 - t1)} e^{-2 gamma t1}
    want = np.exp(-(t2 - t1)) * np.exp(-2.0 * t1)
    assert np.isclose(val, want, atol=1e-9)


def test_lindblad_regression_rejects_feedback_spec():
    spec = qubit_spec(feedback=1.0)
    with pytest.raises(oracle.OracleError):
        oracle.lindblad_regression(
            spec, [Insertion(0.5, NUMBER, "left")], rho0=EXCITED)


@pytest.mark.parametrize("d,n", [(2, 2), (2, 4), (3, 3)])
def test_closed_decomposition_exact(rng, d, n):
    h = random_hermitian(rng, d)
    dev = oracle.closed_decomposition_check(h, t=1.3, n=n,
                                            rho0=random_density(rng, d))
    assert dev < 1e-10
