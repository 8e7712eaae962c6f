"""Shared fixtures: small network specs used across the test modules."""

from fractions import Fraction

import numpy as np
import pytest

from delayline import model

SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
SIGMA_PLUS = SIGMA_MINUS.conj().T
EXCITED = np.diag([1.0, 0.0]).astype(complex)
GROUND = np.diag([0.0, 1.0]).astype(complex)
NUMBER = SIGMA_PLUS @ SIGMA_MINUS


def qubit_spec(omega=0.0, phi=np.pi, tau=Fraction(5), gamma=1.0,
               feedback=1.0, rho0=None):
    """Driven qubit with a single feedback loop of delay tau.

    feedback scales the delayed kernel term so feedback=0 gives the
    plain Lindblad decay channel.
    """
    kernel = [model.KernelTerm("A", "A", gamma, Fraction(0))]
    if feedback != 0.0:
        kernel.append(model.KernelTerm(
            "A", "A", feedback * gamma * np.exp(1j * phi), Fraction(tau)))
    spec = model.NetworkSpec(
        subsystems=(("A", 2),),
        h_internal=omega * (SIGMA_MINUS + SIGMA_PLUS),
        couplings={"A": SIGMA_MINUS},
        kernel=tuple(kernel),
        rho0=rho0,
    )
    return model.validate(spec)


def pair_spec(phi=np.pi / 2, tau=Fraction(5), back_delay=None, rho0=None):
    """Two cascaded qubits with delayed backscatter from B to A."""
    if back_delay is None:
        back_delay = tau
    i2 = np.eye(2)
    sm_a = np.kron(SIGMA_MINUS, i2)
    sm_b = np.kron(i2, SIGMA_MINUS)
    h = (sm_a + sm_a.conj().T
         + np.exp(1j * phi) * sm_b + np.exp(-1j * phi) * sm_b.conj().T)
    spec = model.NetworkSpec(
        subsystems=(("A", 2), ("B", 2)),
        h_internal=h,
        couplings={"A": sm_a, "B": sm_b},
        kernel=(
            model.KernelTerm("A", "A", 1.0, Fraction(0)),
            model.KernelTerm("B", "B", 1.0, Fraction(0)),
            model.KernelTerm("B", "A", np.exp(1j * phi), Fraction(tau)),
            model.KernelTerm("A", "B", np.exp(1j * phi), Fraction(back_delay)),
        ),
        rho0=rho0,
    )
    return model.validate(spec)


@pytest.fixture
def rng():
    return np.random.default_rng(20260826)


def random_density(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return (a + a.conj().T) / 2
