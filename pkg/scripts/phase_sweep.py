"""Phase table from a sweep config, written to DIR/phase.csv.

Usage: python scripts/phase_sweep.py scripts/configs/sweep_chi_n2.cfg --out DIR --workers 4
"""
import argparse
import os
from pathlib import Path

from fluxks.cli import load_config, phase_table, sweep_spec


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("config")
    ap.add_argument("--out", default="phase")
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    spec = sweep_spec(load_config(args.config), args.out)
    table = phase_table(spec, args.workers)
    Path(args.out).mkdir(parents=True, exist_ok=True)
    (Path(args.out) / "phase.csv").write_text(table)
    print(table, end="")


if __name__ == "__main__":
    main()
