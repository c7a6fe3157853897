"""Long solver runs behind the blow-up / boundedness dichotomy.

  sub1d      n=1, chi=2, m=0.4, uniform data to t=50
  mass1d     n=1, chi=2, concentrated data for a range of masses to t=5
  threshold  n=1, chi=2, data just above the certified threshold at m=sqrt(3)
  chi2d      n=2, m=0.5, concentrated data for chi=0.8 and 1.5 to t=20

Usage: python scripts/dichotomy_runs.py [case ...] [--out DIR]
Each run writes <case>.json and <case>.csv into DIR.
"""
import argparse
import math
from pathlib import Path

from fluxks import SolverConfig, init_from_threshold, make_grid, make_setup, run, select_params
from fluxks.solver import concentrated_state, uniform_state


def _save(out, tag, report):
    (out / f"{tag}.json").write_text(report.to_json())
    (out / f"{tag}.csv").write_text(report.trace_csv())
    growth = report.max_sup_u() / report.sup_u0
    print(f"{tag:>24}: {report.outcome:<18} t={report.t_final:.4g} sup u0={report.sup_u0:.4g} "
          f"growth={growth:.3g} min defect={report.min_defect():.3g}")


def sub1d(out):
    setup = make_setup(1, 1.0, 2.0, 0.4)
    cfg = SolverConfig(s_nodes=512, grading=1.0, t_end=50.0)
    s = make_grid(setup, 512, 1.0)
    _save(out, "sub1d", run(uniform_state(setup, s, 0.1), setup, cfg))


def mass1d(out):
    for m in (0.8, 1.2, 1.4, 1.6, 2.4):
        setup = make_setup(1, 1.0, 2.0, m)
        cfg = SolverConfig(s_nodes=512, grading=1.0, t_end=5.0, stop_on_detect=False)
        s = make_grid(setup, 512, 1.0)
        _save(out, f"mass1d_m{m}", run(concentrated_state(setup, s, 0.02, 0.9), setup, cfg))


def threshold(out):
    setup = make_setup(1, 1.0, 2.0, math.sqrt(3.0))
    rep = select_params(setup)
    if not rep.feasible:
        print(f"threshold: infeasible ({rep.reason})")
        return
    p = rep.params
    for gamma in (1.0, 2.0):
        cfg = SolverConfig(s_nodes=512, grading=gamma, t_end=p.T_ext)
        s = make_grid(setup, 512, gamma)
        _save(out, f"threshold_g{gamma:g}", run(init_from_threshold(p, setup, s), setup, cfg, p))


def chi2d(out):
    for chi in (0.8, 1.5):
        setup = make_setup(2, 1.0, chi, 0.5)
        cfg = SolverConfig(s_nodes=512, grading=2.0, t_end=20.0)
        s = make_grid(setup, 512, 2.0)
        _save(out, f"chi2d_chi{chi}", run(concentrated_state(setup, s, 0.02, 0.9), setup, cfg))


CASES = {"sub1d": sub1d, "mass1d": mass1d, "threshold": threshold, "chi2d": chi2d}


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("cases", nargs="*", help=f"subset of {', '.join(CASES)} (default: all)")
    ap.add_argument("--out", default="runs")
    args = ap.parse_args()
    unknown = set(args.cases) - set(CASES)
    if unknown:
        ap.error(f"unknown cases: {', '.join(sorted(unknown))}")
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name in args.cases or CASES:
        CASES[name](out)


if __name__ == "__main__":
    main()
