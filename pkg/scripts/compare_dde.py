#!/usr/bin/env python3
"""Cross-check the chain engine against the delay-differential oracle.

For an undriven qubit decaying into a feedback loop the excited-state
population has a classical closed form.  This script sweeps the loop
phase and prints the worst disagreement between the two solvers.

Usage:
    python scripts/compare_dde.py [--tau TAU] [--t-final T] [--points N]
"""

import argparse
import sys
from fractions import Fraction

import numpy as np

from delayline import cascade, model, oracle

SIGMA_MINUS = np.array([[0.0, 0.0], [1.0, 0.0]], dtype=complex)
EXCITED = np.diag([1.0, 0.0]).astype(complex)
NUMBER = SIGMA_MINUS.conj().T @ SIGMA_MINUS


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--tau", type=float, default=1.0)
    ap.add_argument("--t-final", type=float, default=3.0)
    ap.add_argument("--points", type=int, default=13)
    ap.add_argument("--tol", type=float, default=1e-10)
    args = ap.parse_args()

    tau = Fraction(args.tau).limit_denominator(10 ** 6)
    times = np.linspace(0.0, args.t_final, args.points)
    worst = 0.0
    for phi in (0.0, np.pi / 2, np.pi):
        spec = model.validate(model.NetworkSpec(
            subsystems=(("A", 2),),
            h_internal=np.zeros((2, 2)),
            couplings={"A": SIGMA_MINUS},
            kernel=(model.KernelTerm("A", "A", 1.0, Fraction(0)),
                    model.KernelTerm("A", "A", np.exp(1j * phi), tau)),
        ))
        plan = model.plan_chain(spec, args.t_final)
        series = cascade.observable_series(spec, plan, NUMBER, times,
                                           tol=args.tol, rho0=EXCITED)
        amps = oracle.dde_amplitude(
            oracle.DdeParams(gamma=1.0, phi=phi, tau=float(tau)), times)
        dev = float(np.max(np.abs(series.values - np.abs(amps) ** 2)))
        worst = max(worst, dev)
        print(f"phi = {phi:5.3f}: n = {plan.n}, max deviation {dev:.3e}")
    print(f"worst deviation {worst:.3e}")
    return 0 if worst < 1e-6 else 1


if __name__ == "__main__":
    sys.exit(main())
