#!/usr/bin/env python3
"""Run every shipped config through the CLI and collect the outputs.

Usage:
    python scripts/run_all_configs.py [--out OUTDIR] [--skip-heavy]

Writes one CSV and one JSON diagnostics file per config into OUTDIR
(default: ./results).  The two-qubit backscatter runs take a few
minutes each; --skip-heavy leaves them out for a quick pass.
"""

import argparse
import sys
import time
from pathlib import Path

from delayline import cli

CONFIGS = [
    ("evolve", "qubit_single_loop", False),
    ("evolve", "qubit_two_loops", False),
    ("evolve", "qubit_three_loops", False),
    ("evolve", "qubit_infinite_loop", False),
    ("evolve", "pair_backscatter_equal", True),
    ("evolve", "pair_backscatter_unequal", True),
    ("g2", "qubit_g2_phase0", False),
    ("g2", "qubit_g2_phasepi", False),
    ("oracle", "oracle_dde", False),
    ("teleport", "teleport_demo", False),
]


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    ap.add_argument("--out", default="results")
    ap.add_argument("--skip-heavy", action="store_true",
                    help="skip the multi-minute two-qubit configs")
    args = ap.parse_args()

    config_dir = Path(__file__).resolve().parent.parent / "configs"
    failures = 0
    for command, stem, heavy in CONFIGS:
        if heavy and args.skip_heavy:
            print(f"skipping {stem} (heavy)")
            continue
        path = config_dir / f"{stem}.json"
        t0 = time.perf_counter()
        code = cli.main([command, "--config", str(path), "--out", args.out])
        elapsed = time.perf_counter() - t0
        status = "ok" if code == 0 else f"exit {code}"
        print(f"{stem}: {status} in {elapsed:.1f}s")
        failures += code != 0
    return 1 if failures else 0


if __name__ == "__main__":
    sys.exit(main())
