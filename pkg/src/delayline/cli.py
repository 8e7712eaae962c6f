"""Command line front end: config parsing, run orchestration, CSV output.

Configs are JSON with exact rational delays ({"num", "den"}) so that
commensurability survives serialization, complex scalars as [re, im]
pairs and matrices as nested lists of such pairs.  Parsing is strict:
unknown keys are errors.  Every run writes a CSV (header row, 12
significant digits, LF endings) and a JSON diagnostics sidecar.
"""

from __future__ import annotations

import argparse
import json
import sys
import time
from dataclasses import dataclass
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import cascade, correlations, oracle, teleport
from .model import (KernelTerm, ModelError, NetworkSpec, interval_index,
                    plan_chain, validate)


class ParseError(ValueError):
    pass


_TOP_KEYS = {"time_unit", "subsystems", "hamiltonian", "couplings", "kernel",
             "initial_state", "t_final", "grid", "tol", "max_intervals",
             "xi", "command"}
_KERNEL_KEYS = {"alpha", "beta", "gamma", "delay"}
_COMMAND_KEYS = {
    "evolve": {"observables"},
    "correlate": {"a", "b", "c", "t1", "t2"},
    "g2": {"t1_list", "dt_list", "alpha"},
    "oracle": {"kind", "gamma", "phi", "tau", "observable"},
    "teleport": {"t", "mode", "p", "q"},
}


def _check_keys(obj: dict, allowed: set, where: str):
    unknown = set(obj) - allowed
    if unknown:
        raise ParseError(f"unknown key(s) {sorted(unknown)} in {where}")


def _complex_scalar(v, where: str) -> complex:
    if (not isinstance(v, (list, tuple)) or len(v) != 2
            or not all(isinstance(x, (int, float)) for x in v)):
        raise ParseError(f"{where}: complex scalar must be [re, im]")
    return complex(v[0], v[1])


def _matrix(v, where: str) -> np.ndarray:
    if not isinstance(v, list) or not v or not all(isinstance(r, list) for r in v):
        raise ParseError(f"{where}: matrix must be a nested list of [re, im]")
    rows = [[_complex_scalar(x, where) for x in r] for r in v]
    m = np.array(rows, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ParseError(f"{where}: matrix must be square")
    return m


def _fraction(v, where: str) -> Fraction:
    if (not isinstance(v, dict) or set(v) != {"num", "den"}
            or not all(isinstance(v[k], int) for k in ("num", "den"))):
        raise ParseError(f"{where}: expected {{\"num\": int, \"den\": int}}")
    if v["den"] == 0:
        raise ParseError(f"{where}: zero denominator")
    return Fraction(v["num"], v["den"])


@dataclass
class RunConfig:
    spec: NetworkSpec
    t_final: float
    grid: list[float] | int
    tol: float
    max_intervals: int | None
    xi: Fraction | None
    command: str
    params: dict
    time_unit: str = "1/gamma"


def _initial_state(v, dim: int) -> np.ndarray:
    if v == "ground":
        r = np.zeros((dim, dim), dtype=complex)
        r[dim - 1, dim - 1] = 1.0
        return r
    if v == "excited":
        r = np.zeros((dim, dim), dtype=complex)
        r[0, 0] = 1.0
        return r
    if isinstance(v, str):
        raise ParseError(f"unknown initial_state preset {v!r}")
    return _matrix(v, "initial_state")


def parse_config(path: str | Path) -> RunConfig:
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ParseError("top-level config must be an object")
    _check_keys(raw, _TOP_KEYS, "top level")
    for key in ("subsystems", "hamiltonian", "couplings", "kernel",
                "t_final", "command"):
        if key not in raw:
            raise ParseError(f"missing required key {key!r}")

    subsystems = []
    for i, s in enumerate(raw["subsystems"]):
        _check_keys(s, {"name", "dim"}, f"subsystems[{i}]")
        subsystems.append((s["name"], int(s["dim"])))

    couplings = {name: _matrix(m, f"couplings[{name}]")
                 for name, m in raw["couplings"].items()}
    kernel = []
    for i, term in enumerate(raw["kernel"]):
        _check_keys(term, _KERNEL_KEYS, f"kernel[{i}]")
        kernel.append(KernelTerm(
            alpha=term["alpha"], beta=term["beta"],
            gamma=_complex_scalar(term["gamma"], f"kernel[{i}].gamma"),
            delay=_fraction(term["delay"], f"kernel[{i}].delay")))

    spec = NetworkSpec(
        subsystems=tuple(subsystems),
        h_internal=_matrix(raw["hamiltonian"], "hamiltonian"),
        couplings=couplings,
        kernel=tuple(kernel),
        rho0=None)
    if "initial_state" in raw:
        spec = NetworkSpec(spec.subsystems, spec.h_internal, spec.couplings,
                           spec.kernel,
                           rho0=_initial_state(raw["initial_state"],
                                               spec.copy_dim))
    spec = validate(spec)

    t_final = float(raw["t_final"])
    grid = raw.get("grid", 50)
    if isinstance(grid, list):
        grid = [float(t) for t in grid]
        if any(t < 0 or t > t_final for t in grid):
            raise ParseError("grid times must lie in [0, t_final]")
    elif not isinstance(grid, int):
        raise ParseError("grid must be a count or a list of times")

    cmd = raw["command"]
    if not isinstance(cmd, dict) or "name" not in cmd:
        raise ParseError("command must be an object with a 'name'")
    name = cmd["name"]
    if name not in _COMMAND_KEYS:
        raise ParseError(f"unknown command {name!r}")
    _check_keys(cmd, _COMMAND_KEYS[name] | {"name"}, f"command {name!r}")

    return RunConfig(
        spec=spec, t_final=t_final, grid=grid,
        tol=float(raw.get("tol", 1e-10)),
        max_intervals=raw.get("max_intervals"),
        xi=_fraction(raw["xi"], "xi") if "xi" in raw else None,
        command=name, params={k: v for k, v in cmd.items() if k != "name"},
        time_unit=raw.get("time_unit", "1/gamma"))


def default_grid(t_final: float, count: int, xi: float) -> list[float]:
    """Midpoint grid plus boundary-adjacent pairs at k*xi*(1 ± 1e-6).

    Exact multiples of xi are avoided on purpose: times on a boundary
    belong to the earlier interval, which surprises in plotted output,
    while the paired offsets double as a continuity diagnostic.
    """
    pts = {0.0}
    for i in range(count):
        pts.add((i + 0.5) * t_final / count)
    k = 1
    while k * xi < t_final:
        pts.add(k * xi - 1e-6 * xi)
        pts.add(k * xi + 1e-6 * xi)
        k += 1
    return sorted(pts)


def _fmt(x: float) -> str:
    return f"{x:.11e}"


def _write_csv(path: Path, header: list[str], rows: list[list[float]]):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


def _write_sidecar(path: Path, payload: dict):
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _plan_and_grid(cfg: RunConfig):
    plan = plan_chain(cfg.spec, cfg.t_final, xi=cfg.xi)
    if isinstance(cfg.grid, int):
        grid = default_grid(cfg.t_final, cfg.grid, float(plan.xi))
    else:
        grid = cfg.grid
    return plan, grid


def _precheck_cap(plan, times, copy_dim, max_intervals):
    worst = max((t for t in times), default=0.0)
    if worst > 0:
        n, _ = interval_index(worst, float(plan.xi))
        cascade._check_cap(n, copy_dim, max_intervals)


def cmd_evolve(cfg: RunConfig, out: Path, stem: str) -> dict:
    plan, grid = _plan_and_grid(cfg)
    _precheck_cap(plan, grid, cfg.spec.copy_dim, cfg.max_intervals)
    obs = [(o["name"], _matrix(o["matrix"], f"observable {o['name']}"))
           for o in cfg.params["observables"]]
    t0 = time.perf_counter()
    states = cascade.states_series(cfg.spec, plan, grid, tol=cfg.tol,
                                   max_intervals=cfg.max_intervals)
    rows = []
    imag = 0.0
    for t, st in zip(grid, states):
        vals = [np.trace(m @ st.rho) for _, m in obs]
        imag = max(imag, max((abs(v.imag) for v in vals), default=0.0))
        rows.append([t] + [v.real for v in vals])
    _write_csv(out / f"{stem}.csv", ["t"] + [n for n, _ in obs], rows)
    return {
        "plan": {"xi": [plan.xi.numerator, plan.xi.denominator], "n": plan.n},
        "runtime_s": time.perf_counter() - t0,
        "max_trace_error": max(s.trace_error for s in states),
        "max_hermiticity_error": max(s.hermiticity_error for s in states),
        "min_eigenvalue": min(s.min_eigenvalue for s in states),
        "max_imag_residue": imag,
    }


def cmd_correlate(cfg: RunConfig, out: Path, stem: str) -> dict:
    plan, _ = _plan_and_grid(cfg)
    p = cfg.params
    a = _matrix(p["a"], "a")
    b = _matrix(p["b"], "b")
    c = _matrix(p["c"], "c")
    t1 = float(p["t1"])
    t2s = [float(t) for t in p["t2"]]
    _precheck_cap(plan, t2s, cfg.spec.copy_dim, cfg.max_intervals)
    t0 = time.perf_counter()
    rows = []
    for t2 in t2s:
        v = correlations.two_time_correlation(
            cfg.spec, plan, a, b, c, t1, t2, tol=cfg.tol,
            max_intervals=cfg.max_intervals)
        rows.append([t2, v.real, v.imag])
    _write_csv(out / f"{stem}.csv", ["t2", "re", "im"], rows)
    return {
        "plan": {"xi": [plan.xi.numerator, plan.xi.denominator], "n": plan.n},
        "runtime_s": time.perf_counter() - t0,
        "t1": t1,
    }


def cmd_g2(cfg: RunConfig, out: Path, stem: str) -> dict:
    plan, _ = _plan_and_grid(cfg)
    p = cfg.params
    t1s = [float(t) for t in p["t1_list"]]
    dts = [float(t) for t in p["dt_list"]]
    alpha = p.get("alpha")
    _precheck_cap(plan, [t1 + dt for t1 in t1s for dt in dts],
                  cfg.spec.copy_dim, cfg.max_intervals)
    t0 = time.perf_counter()
    rows = []
    for t1 in t1s:
        for dt in dts:
            val = correlations.g2(cfg.spec, plan, t1, t1 + dt, tol=cfg.tol,
                                  alpha=alpha, max_intervals=cfg.max_intervals)
            rows.append([t1, dt, val])
    _write_csv(out / f"{stem}.csv", ["t1", "t2_minus_t1", "g2"], rows)
    return {
        "plan": {"xi": [plan.xi.numerator, plan.xi.denominator], "n": plan.n},
        "runtime_s": time.perf_counter() - t0,
    }


def cmd_oracle(cfg: RunConfig, out: Path, stem: str) -> dict:
    plan, grid = _plan_and_grid(cfg)
    p = cfg.params
    kind = p.get("kind")
    t0 = time.perf_counter()
    if kind == "dde":
        params = oracle.DdeParams(gamma=float(p["gamma"]), phi=float(p["phi"]),
                                  tau=float(p["tau"]))
        c = oracle.dde_amplitude(params, grid, tol=min(cfg.tol, 1e-10))
        rows = [[t, abs(ci) ** 2] for t, ci in zip(grid, c)]
        _write_csv(out / f"{stem}.csv", ["t", "population"], rows)
    elif kind == "lindblad":
        obs = _matrix(p["observable"], "observable")
        series = oracle.lindblad_reference(cfg.spec, obs, grid, tol=cfg.tol)
        rows = [[t, v] for t, v in zip(series.times, series.values)]
        _write_csv(out / f"{stem}.csv", ["t", "value"], rows)
    else:
        raise ParseError(f"oracle kind must be 'dde' or 'lindblad', got {kind!r}")
    return {
        "plan": {"xi": [plan.xi.numerator, plan.xi.denominator], "n": plan.n},
        "runtime_s": time.perf_counter() - t0,
        "kind": kind,
    }


def cmd_teleport(cfg: RunConfig, out: Path, stem: str) -> dict:
    plan, _ = _plan_and_grid(cfg)
    p = cfg.params
    t = float(p["t"])
    mode = p.get("mode", "postselect")
    pq = (int(p["p"]), int(p["q"])) if "p" in p or "q" in p else None
    t0 = time.perf_counter()
    ref = cascade.reconstruct_state(cfg.spec, plan, t, tol=cfg.tol,
                                    max_intervals=cfg.max_intervals).rho
    outcomes = teleport.teleport_protocol(cfg.spec, plan, t, mode=mode, pq=pq,
                                          tol=cfg.tol)
    rows = []
    for o in outcomes:
        rows.append([float(o.p), float(o.q), o.probability,
                     _fidelity(o.conditional_state, ref)])
    _write_csv(out / f"{stem}.csv", ["p", "q", "probability", "fidelity"], rows)
    return {
        "plan": {"xi": [plan.xi.numerator, plan.xi.denominator], "n": plan.n},
        "runtime_s": time.perf_counter() - t0,
        "mode": mode,
        "probability_sum": float(sum(o.probability for o in outcomes)),
    }


def _fidelity(rho: np.ndarray, sigma: np.ndarray) -> float:
    from scipy.linalg import sqrtm
    s = sqrtm(np.asarray(rho, dtype=complex))
    inner = sqrtm(s @ sigma @ s)
    return float(np.real(np.trace(inner)) ** 2)


_COMMANDS = {
    "evolve": cmd_evolve,
    "correlate": cmd_correlate,
    "g2": cmd_g2,
    "oracle": cmd_oracle,
    "teleport": cmd_teleport,
}


def main(argv: list[str] | None = None) -> int:
    ap = argparse.ArgumentParser(
        prog="delayline",
        description="Open quantum networks with discrete-delay feedback")
    ap.add_argument("command", choices=sorted(_COMMANDS))
    ap.add_argument("--config", required=True)
    ap.add_argument("--out", default=".")
    ap.add_argument("--tol", type=float, default=None)
    ap.add_argument("--max-intervals", type=int, default=None)
    args = ap.parse_args(argv)

    try:
        cfg = parse_config(args.config)
        if cfg.command != args.command:
            raise ParseError(
                f"config declares command {cfg.command!r}, "
                f"invoked as {args.command!r}")
        if args.tol is not None:
            cfg.tol = args.tol
        if args.max_intervals is not None:
            cfg.max_intervals = args.max_intervals
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        stem = Path(args.config).stem
        payload = _COMMANDS[args.command](cfg, out, stem)
    except (ParseError, json.JSONDecodeError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 2
    except (ModelError, cascade.CapExceeded, correlations.ZeroFlux,
            FileNotFoundError) as exc:
        print(json.dumps({"error": type(exc).__name__, "message": str(exc)}))
        return 1
    payload["command"] = args.command
    payload["config"] = str(args.config)
    payload["tol"] = cfg.tol
    _write_sidecar(out / f"{stem}.json", payload)
    return 0


if __name__ == "__main__":
    sys.exit(main())
