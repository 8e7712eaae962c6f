"""Acceptance suite: one numbered check per shipped guarantee.

Each test prints a single PASS/FAIL line with the measured figure of
merit so the log doubles as a report.  The heavy shipped configs are run
once through the CLI by a session fixture and shared between checks.
"""

import json
import time
from fractions import Fraction
from pathlib import Path

import numpy as np
import pytest

from delayline import cascade, cli, correlations, model, oracle, teleport
from delayline.results import Insertion

from conftest import (EXCITED, GROUND, NUMBER, SIGMA_MINUS, SIGMA_PLUS,
                      pair_spec, qubit_spec, random_density, random_hermitian)

CONFIG_DIR = Path(__file__).resolve().parent.parent / "configs"

HEAVY_CONFIGS = [
    ("evolve", "qubit_two_loops"),
    ("evolve", "qubit_three_loops"),
    ("evolve", "qubit_infinite_loop"),
    ("evolve", "pair_backscatter_equal"),
    ("evolve", "pair_backscatter_unequal"),
]

LIGHT_CONFIGS = [
    ("evolve", "qubit_single_loop"),
    ("g2", "qubit_g2_phase0"),
    ("g2", "qubit_g2_phasepi"),
    ("oracle", "oracle_dde"),
    ("teleport", "teleport_demo"),
]


def report(number, name, passed, detail):
    status = "PASS" if passed else "FAIL"
    print(f"[criterion {number:2d}] {name}: {status} ({detail})")
    assert passed, f"criterion {number} ({name}): {detail}"


def run_config(command, stem, out):
    path = CONFIG_DIR / f"{stem}.json"
    t0 = time.perf_counter()
    code = cli.main([command, "--config", str(path), "--out", str(out)])
    elapsed = time.perf_counter() - t0
    assert code == 0, f"{stem} exited with {code}"
    meta = json.loads((out / f"{stem}.json").read_text())
    return meta, elapsed


@pytest.fixture(scope="session")
def shipped_runs(tmp_path_factory):
    """Run every shipped config once; reused by criteria 4 and 9."""
    out = tmp_path_factory.mktemp("shipped")
    runs = {}
    for command, stem in HEAVY_CONFIGS + LIGHT_CONFIGS:
        meta, elapsed = run_config(command, stem, out)
        runs[stem] = (meta, elapsed, out)
    return runs


def read_csv(out, stem):
    lines = (out / f"{stem}.csv").read_text().strip().split("\n")
    header = lines[0].split(",")
    data = np.array([[float(x) for x in line.split(",")]
                     for line in lines[1:]])
    return header, data


def test_criterion_01_causality():
    """Feedback cannot act before one round trip has elapsed."""
    t0 = time.perf_counter()
    times = np.linspace(0.0, 5.0, 21)
    with_fb = qubit_spec(omega=0.25, phi=np.pi, tau=Fraction(5))
    without = qubit_spec(omega=0.25, feedback=0.0)
    plan = model.plan_chain(with_fb, 5.0)
    fb = cascade.observable_series(with_fb, plan, NUMBER, times,
                                   tol=1e-10, rho0=GROUND)
    ref = oracle.lindblad_reference(without, NUMBER, times, tol=1e-10,
                                    rho0=GROUND)
    dev = float(np.max(np.abs(fb.values - ref.values)))
    elapsed = time.perf_counter() - t0
    report(1, "causality before one delay", dev <= 1e-8 and elapsed < 10.0,
           f"max dev {dev:.2e}, runtime {elapsed:.1f}s")


def test_criterion_02_dde_oracle():
    """Undriven decay matches the classical delay-differential amplitude."""
    t0 = time.perf_counter()
    spec = qubit_spec(omega=0.0, phi=np.pi, tau=Fraction(5))
    times = np.linspace(0.0, 15.0, 31)
    plan = model.plan_chain(spec, 15.0)
    series = cascade.observable_series(spec, plan, NUMBER, times,
                                       tol=1e-10, rho0=EXCITED)
    amps = oracle.dde_amplitude(
        oracle.DdeParams(gamma=1.0, phi=np.pi, tau=5.0), times)
    dev = float(np.max(np.abs(series.values - np.abs(amps) ** 2)))
    elapsed = time.perf_counter() - t0
    report(2, "delay-differential oracle", dev <= 1e-6 and elapsed < 120.0,
           f"max dev {dev:.2e}, runtime {elapsed:.1f}s")


def test_criterion_03_boundary_continuity():
    spec = qubit_spec(omega=0.5, phi=np.pi, tau=Fraction(1))
    plan = model.plan_chain(spec, 5.0)
    eps = 1e-9
    worst = 0.0
    for k in (1, 2, 3, 4):
        lo = cascade.reconstruct_state(spec, plan, k - eps, tol=1e-11,
                                       rho0=GROUND)
        hi = cascade.reconstruct_state(spec, plan, k + eps, tol=1e-11,
                                       rho0=GROUND)
        worst = max(worst, float(np.max(np.abs(lo.rho - hi.rho))))
    report(3, "interval boundary continuity", worst <= 1e-7,
           f"max jump {worst:.2e} over boundaries 1..4")


def test_criterion_04_state_sanity(shipped_runs):
    worst_trace = worst_herm = 0.0
    worst_eig = 0.0
    checked = 0
    for stem, (meta, _, _) in shipped_runs.items():
        if "max_trace_error" not in meta:
            continue
        checked += 1
        worst_trace = max(worst_trace, meta["max_trace_error"])
        worst_herm = max(worst_herm, meta["max_hermiticity_error"])
        worst_eig = min(worst_eig, meta["min_eigenvalue"])
    ok = (checked >= 6 and worst_trace <= 1e-9 and worst_herm <= 1e-9
          and worst_eig >= -1e-8)
    report(4, "state sanity on shipped configs", ok,
           f"{checked} configs, trace {worst_trace:.2e}, "
           f"herm {worst_herm:.2e}, min eig {worst_eig:.2e}")


def test_criterion_05_basis_independence():
    spec = qubit_spec(omega=0.4, phi=0.7, tau=Fraction(1))
    plan = model.plan_chain(spec, 3.0)
    sx = np.array([[0, 1], [1, 0]], dtype=complex)
    sy = np.array([[0, -1j], [1j, 0]], dtype=complex)
    sz = np.array([[1, 0], [0, -1]], dtype=complex)
    pauli = [m / np.sqrt(2.0) for m in (np.eye(2, dtype=complex), sx, sy, sz)]
    rho0 = random_density(np.random.default_rng(7), 2)
    units = cascade.contracted_states(spec, plan, 3, [0.6], tol=1e-11,
                                      rho0=rho0)[0]
    general = cascade.contracted_states(spec, plan, 3, [0.6], tol=1e-11,
                                        rho0=rho0, basis=pauli)[0]
    dev = float(np.max(np.abs(units - general)))
    report(5, "operator basis independence (n=3)", dev <= 1e-10,
           f"max dev {dev:.2e}")


def test_criterion_06_regression_reduction():
    spec = qubit_spec(omega=0.6, feedback=0.0)
    plan = model.plan_chain(spec, 1.5, xi=Fraction(1))
    t1, t2 = 0.5, 1.3
    corr = correlations.two_time_correlation(
        spec, plan, SIGMA_PLUS, NUMBER, SIGMA_MINUS, t1, t2,
        tol=1e-11, rho0=EXCITED)
    want = oracle.lindblad_regression(
        spec,
        [Insertion(t1, SIGMA_MINUS, "left"),
         Insertion(t1, SIGMA_PLUS, "right"),
         Insertion(t2, NUMBER, "left")],
        tol=1e-11, rho0=EXCITED)
    dev_corr = abs(corr - want)
    g2_val = correlations.g2(spec, plan, t1, t2, tol=1e-11, rho0=EXCITED)
    f1 = oracle.lindblad_regression(spec, [Insertion(t1, NUMBER, "left")],
                                    tol=1e-11, rho0=EXCITED)
    f2 = oracle.lindblad_regression(spec, [Insertion(t2, NUMBER, "left")],
                                    tol=1e-11, rho0=EXCITED)
    dev_g2 = abs(g2_val - want.real / (f1.real * f2.real))
    same_time = abs(correlations.g2(spec, plan, t1, t1, tol=1e-11,
                                    rho0=EXCITED))
    ok = dev_corr <= 1e-8 and dev_g2 <= 1e-8 and same_time <= 1e-10
    report(6, "Markov regression reduction", ok,
           f"corr dev {dev_corr:.2e}, g2 dev {dev_g2:.2e}, "
           f"g2(t,t) {same_time:.2e}")


def test_criterion_07_teleportation():
    spec = qubit_spec(omega=0.5, phi=np.pi, tau=Fraction(1))
    plan = model.plan_chain(spec, 2.0)
    rho0 = random_density(np.random.default_rng(11), 2)
    t = 1.6
    ref = cascade.reconstruct_state(spec, plan, t, tol=1e-12, rho0=rho0)
    outcomes = teleport.teleport_protocol(spec, plan, t, mode="postselect",
                                          tol=1e-12, rho0=rho0)
    out00 = next(o for o in outcomes if (o.p, o.q) == (0, 0))
    dev_state = float(np.max(np.abs(out00.conditional_state - ref.rho)))
    dev_prob = abs(out00.probability - 0.25)
    pre_ok = True
    for p in range(2):
        for q in range(2):
            outs = teleport.teleport_protocol(
                spec, plan, t, mode="precorrect", pq=(p, q), tol=1e-12,
                rho0=rho0)
            out = next(o for o in outs if (o.p, o.q) == (p, q))
            pre_ok &= (np.max(np.abs(out.conditional_state - ref.rho))
                       <= 1e-10)
    ok = dev_state <= 1e-10 and dev_prob <= 1e-10 and pre_ok
    report(7, "teleportation equivalence", ok,
           f"state dev {dev_state:.2e}, prob dev {dev_prob:.2e}, "
           f"precorrect all-outcomes {'ok' if pre_ok else 'failed'}")


def test_criterion_08_closed_decomposition():
    rng = np.random.default_rng(23)
    worst = 0.0
    for d in (2, 3):
        for n in (2, 3, 4):
            h = random_hermitian(rng, d)
            dev = oracle.closed_decomposition_check(
                h, t=1.1, n=n, rho0=random_density(rng, d))
            worst = max(worst, dev)
    report(8, "closed-system decomposition", worst <= 1e-10,
           f"max dev {worst:.2e} over dims 2-3, n 2-4")


def test_criterion_09_multi_delay_and_backscatter(shipped_runs):
    combined = sum(shipped_runs[stem][1]
                   for _, stem in HEAVY_CONFIGS)
    depth_ok = all(shipped_runs[stem][0]["plan"]["n"] >= 5
                   for stem in ("qubit_two_loops", "qubit_three_loops",
                                "qubit_infinite_loop"))
    depth_ok &= shipped_runs["pair_backscatter_equal"][0]["plan"]["n"] >= 4

    # Before one round trip subsystem B only sees its own drive and decay.
    meta, _, out = shipped_runs["pair_backscatter_equal"]
    header, data = read_csv(out, "pair_backscatter_equal")
    col = header.index("n_B")
    mask = data[:, 0] <= 5.0
    times = data[mask, 0]
    phi = np.pi / 2
    iso = model.validate(model.NetworkSpec(
        subsystems=(("B", 2),),
        h_internal=(np.exp(1j * phi) * SIGMA_MINUS
                    + np.exp(-1j * phi) * SIGMA_PLUS),
        couplings={"B": SIGMA_MINUS},
        kernel=(model.KernelTerm("B", "B", 1.0, Fraction(0)),),
    ))
    ref = oracle.lindblad_reference(iso, NUMBER, times, tol=1e-10,
                                    rho0=GROUND)
    dev = float(np.max(np.abs(data[mask, col] - ref.values)))
    ok = depth_ok and dev <= 1e-8 and combined < 600.0
    report(9, "multi-delay and backscatter configs", ok,
           f"B causality dev {dev:.2e}, combined runtime {combined:.0f}s, "
           f"depth ok {depth_ok}")


def test_criterion_10_kernel_discretization():
    kappa = 1.0

    def f(t):
        return kappa * np.exp(-kappa * t)

    t_final = 0.5
    vals = []
    for h in (Fraction(1, 2), Fraction(1, 4), Fraction(1, 8)):
        terms = model.discretize_kernel(f, h, cutoff=Fraction(1))
        spec = model.validate(model.NetworkSpec(
            subsystems=(("A", 2),),
            h_internal=np.zeros((2, 2)),
            couplings={"A": SIGMA_MINUS},
            kernel=tuple(terms)))
        plan = model.plan_chain(spec, t_final)
        series = cascade.observable_series(spec, plan, NUMBER, [t_final],
                                           tol=1e-11, rho0=EXCITED)
        vals.append(series.values[0])
    ratio = abs(vals[0] - vals[1]) / abs(vals[1] - vals[2])
    report(10, "kernel discretization convergence",
           3.2 <= ratio <= 4.8, f"halving ratio {ratio:.3f}")
