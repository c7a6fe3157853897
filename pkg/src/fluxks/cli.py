"""Batch front end: ``certify``, ``run`` and ``sweep`` subcommands.

Configuration is a flat ``key = value`` file; ``#`` starts a comment and
lists are comma separated.  Recognised keys are listed in ``SCHEMA``.

Exit codes: 0 ok, 1 usage or input error, 2 infeasible, 3 certification
failed.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .feasibility import RECIPES, select_params
from .problem import make_setup
from .residual import certify_subsolution
from .solver import (SolverConfig, ThresholdError, concentrated_state, init_from_threshold,
                     make_grid, run, state_from_profile, uniform_state)

EXIT_OK, EXIT_USAGE, EXIT_INFEASIBLE, EXIT_CERT_FAIL = 0, 1, 2, 3
INIT_MODES = ("threshold", "uniform", "concentrated", "custom")
PHASE_HEADER = ("n", "R", "chi", "m", "feasible", "outcome", "t_detect", "T_ext")


def _bool(text: str) -> bool:
    low = text.strip().lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _floats(text: str) -> list[float]:
    return [float(v) for v in text.split(",") if v.strip()]


SCHEMA = {
    "problem.n": (int, None),
    "problem.R": (float, 1.0),
    "problem.chi": (float, None),
    "problem.m": (float, None),
    "feasibility.recipe": (str, "corrected"),
    "certify.s_nodes": (int, 1000),
    "certify.t_nodes": (int, 1000),
    "certify.t_frac": (float, 0.99),
    "solver.s_nodes": (int, 512),
    "solver.grading": (float, None),
    "solver.cfl": (float, 0.9),
    "solver.t_end": (float, None),
    "solver.blowup_threshold": (float, 1e3),
    "solver.collapse_fraction": (float, 0.05),
    "solver.monitor_tolerance": (float, 1e-3),
    "solver.scheme": (str, "euler"),
    "solver.trace_points": (int, 2000),
    "solver.stop_on_detect": (_bool, True),
    "init.mode": (str, "uniform"),
    "init.margin": (float, 0.05),
    "init.width": (float, None),
    "init.floor": (float, 1e-3),
    "init.perturbation": (float, 0.1),
    "init.core_width": (float, 0.02),
    "init.core_fraction": (float, 0.9),
    "init.profile": (str, None),
    "sweep.chi": (_floats, None),
    "sweep.m": (_floats, None),
}


class ConfigError(ValueError):
    pass


def parse_config(text: str, source: str = "<config>") -> dict:
    """Parse ``key = value`` lines into a dict with defaults filled in."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}:{lineno}: expected 'key = value', got {raw.strip()!r}")
        key, val = (p.strip() for p in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"{source}:{lineno}: unknown key {key!r}")
        if key in values:
            raise ConfigError(f"{source}:{lineno}: duplicate key {key!r}")
        conv = SCHEMA[key][0]
        try:
            values[key] = conv(val)
        except ValueError as exc:
            raise ConfigError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    cfg = {k: values.get(k, default) for k, (_, default) in SCHEMA.items()}
    if cfg["init.mode"] not in INIT_MODES:
        raise ConfigError(f"{source}: init.mode must be one of {INIT_MODES}")
    if cfg["feasibility.recipe"] not in RECIPES:
        raise ConfigError(f"{source}: feasibility.recipe must be one of {RECIPES}")
    return cfg


def load_config(path: str | Path) -> dict:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def _require(cfg: dict, *keys: str) -> None:
    missing = [k for k in keys if cfg[k] is None]
    if missing:
        raise ConfigError(f"missing required keys: {', '.join(missing)}")


def _setup(cfg: dict, chi: float | None = None, m: float | None = None):
    try:
        return make_setup(cfg["problem.n"], cfg["problem.R"],
                          cfg["problem.chi"] if chi is None else chi,
                          cfg["problem.m"] if m is None else m)
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def solver_config(cfg: dict, t_end: float) -> SolverConfig:
    try:
        return SolverConfig(
            s_nodes=cfg["solver.s_nodes"], grading=cfg["solver.grading"], cfl=cfg["solver.cfl"],
            t_end=t_end, blowup_threshold=cfg["solver.blowup_threshold"],
            collapse_fraction=cfg["solver.collapse_fraction"],
            monitor_tolerance=cfg["solver.monitor_tolerance"], scheme=cfg["solver.scheme"],
            trace_points=cfg["solver.trace_points"], stop_on_detect=cfg["solver.stop_on_detect"])
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _read_profile(path: str):
    """Two-column CSV ``r,u`` (header optional)."""
    try:
        data = np.genfromtxt(path, delimiter=",", names=None, comments="#", invalid_raise=True)
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read profile {path}: {exc}") from None
    if data.ndim == 2 and np.isnan(data[0]).all():
        data = data[1:]
    if data.ndim != 2 or data.shape[1] != 2 or np.isnan(data).any():
        raise ConfigError(f"profile {path} must have two numeric columns r,u")
    return data[:, 0], data[:, 1]


def initial_state(cfg: dict, setup, s, params=None):
    mode = cfg["init.mode"]
    try:
        if mode == "threshold":
            return init_from_threshold(params, setup, s, cfg["init.width"], cfg["init.margin"],
                                       cfg["init.floor"])
        if mode == "uniform":
            return uniform_state(setup, s, cfg["init.perturbation"])
        if mode == "concentrated":
            return concentrated_state(setup, s, cfg["init.core_width"], cfg["init.core_fraction"])
        if cfg["init.profile"] is None:
            raise ConfigError("init.mode = custom needs init.profile")
        r, u = _read_profile(cfg["init.profile"])
        return state_from_profile(setup, s, r, u)
    except ThresholdError:
        raise
    except ValueError as exc:
        raise ConfigError(str(exc)) from None


def _out_dir(out: str | Path) -> Path:
    path = Path(out)
    try:
        path.mkdir(parents=True, exist_ok=True)
        probe = path / ".write_probe"
        probe.write_text("")
        probe.unlink()
    except OSError as exc:
        raise ConfigError(f"output directory {path} is not writable: {exc.strerror}") from None
    return path


# ---------------------------------------------------------------------------
# subcommands


def cmd_certify(cfg: dict, out: str | Path) -> int:
    _require(cfg, "problem.n", "problem.chi", "problem.m")
    setup = _setup(cfg)
    out = _out_dir(out)
    rep = select_params(setup, cfg["feasibility.recipe"])
    (out / "constraints.csv").write_text(rep.to_csv())
    summary = {"feasible": rep.feasible, "reason": rep.reason, "recipe": rep.recipe,
               "kappa_components": rep.kappa_components}
    if rep.params is not None:
        p = rep.params
        summary["params"] = {"lam": p.lam, "K": p.K, "delta": p.delta, "B0": p.B0,
                             "kappa": p.kappa, "T_ext": p.T_ext, "A_T": p.A_T, "c1": p.c1}
    (out / "feasibility.json").write_text(json.dumps(summary, indent=2, sort_keys=True))
    if not rep.feasible:
        print(f"infeasible: {rep.reason}")
        return EXIT_INFEASIBLE
    cert = certify_subsolution(rep.params, setup, cfg["certify.s_nodes"], cfg["certify.t_nodes"],
                               cfg["certify.t_frac"])
    (out / "cert.json").write_text(cert.to_json())
    worst = cert.worst()
    verdict = "PASS" if cert.passed else "FAIL"
    print(f"certification {verdict}: worst region {worst.region} residual {worst.max_residual:.3e}"
          f" (tol {cert.tol_sign:.3e})")
    return EXIT_OK if cert.passed else EXIT_CERT_FAIL


def cmd_run(cfg: dict, out: str | Path) -> int:
    _require(cfg, "problem.n", "problem.chi", "problem.m")
    setup = _setup(cfg)
    out = _out_dir(out)
    params = None
    if cfg["init.mode"] == "threshold":
        rep = select_params(setup, cfg["feasibility.recipe"])
        if not rep.feasible:
            print(f"infeasible: {rep.reason}")
            return EXIT_INFEASIBLE
        params = rep.params
    t_end = cfg["solver.t_end"]
    if t_end is None:
        if params is None:
            raise ConfigError("solver.t_end is required unless init.mode = threshold")
        t_end = 1.5 * params.T_ext
    config = solver_config(cfg, t_end)
    s = make_grid(setup, config.s_nodes, config.grading_for(setup.n))
    state = initial_state(cfg, setup, s, params)
    report = run(state, setup, config, params)
    (out / "report.json").write_text(report.to_json())
    (out / "traces.csv").write_text(report.trace_csv())
    print(f"outcome {report.outcome} at t={report.t_final:.6g}"
          + (f", detected at t={report.t_detect:.6g}" if report.t_detect is not None else ""))
    return EXIT_OK


@dataclass(frozen=True)
class SweepSpec:
    n: int
    R: float
    chis: tuple[float, ...]
    ms: tuple[float, ...]
    cfg: dict = field(hash=False, compare=False)
    out: str = "."

    def __post_init__(self):
        if not self.chis or not self.ms:
            raise ConfigError("sweep needs non-empty sweep.chi and sweep.m lists")
        if min(self.chis) <= 0 or min(self.ms) <= 0:
            raise ConfigError("sweep values must be positive")

    def cases(self) -> list[tuple[float, float]]:
        return sorted((c, m) for c in set(self.chis) for m in set(self.ms))


def sweep_spec(cfg: dict, out: str | Path) -> SweepSpec:
    if cfg["problem.n"] is None:
        raise ConfigError("missing required keys: problem.n")
    chis = cfg["sweep.chi"] or ([cfg["problem.chi"]] if cfg["problem.chi"] is not None else [])
    ms = cfg["sweep.m"] or ([cfg["problem.m"]] if cfg["problem.m"] is not None else [])
    return SweepSpec(cfg["problem.n"], cfg["problem.R"], tuple(chis), tuple(ms), cfg, str(out))


def _fmt(x) -> str:
    if x is None or (isinstance(x, float) and not math.isfinite(x)):
        return ""
    return repr(float(x))


def sweep_row(cfg: dict, chi: float, m: float) -> tuple:
    setup = _setup(cfg, chi, m)
    rep = select_params(setup, cfg["feasibility.recipe"])
    params = rep.params if rep.feasible else None
    t_end = cfg["solver.t_end"]
    if t_end is None:
        t_end = 1.5 * params.T_ext if params is not None else 10.0
    config = solver_config(cfg, t_end)
    s = make_grid(setup, config.s_nodes, config.grading_for(setup.n))
    if cfg["init.mode"] == "threshold" and params is None:
        outcome, t_detect = "not_run", None
    else:
        state = initial_state(cfg, setup, s, params)
        monitor = params if cfg["init.mode"] == "threshold" else None
        report = run(state, setup, config, monitor)
        outcome, t_detect = report.outcome, report.t_detect
    return (str(setup.n), _fmt(setup.R), _fmt(chi), _fmt(m), str(rep.feasible).lower(), outcome,
            _fmt(t_detect), _fmt(params.T_ext if params is not None else None))


def _sweep_row_star(args):
    return sweep_row(*args)


def phase_table(spec: SweepSpec, workers: int = 1) -> str:
    jobs = [(spec.cfg, chi, m) for chi, m in spec.cases()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_sweep_row_star, jobs))
    else:
        rows = [_sweep_row_star(j) for j in jobs]
    buf = io.StringIO()
    wr = csv.writer(buf, lineterminator="\n")
    wr.writerow(PHASE_HEADER)
    wr.writerows(rows)
    return buf.getvalue()


def cmd_sweep(cfg: dict, out: str | Path, workers: int = 1) -> int:
    spec = sweep_spec(cfg, out)
    path = _out_dir(out)
    table = phase_table(spec, workers)
    (path / "phase.csv").write_text(table)
    print(table, end="")
    return EXIT_OK


# ---------------------------------------------------------------------------


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="fluxks", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)
    for name, text in (("certify", "select parameters and certify the subsolution"),
                       ("run", "integrate one case"),
                       ("sweep", "phase table over chi and m values")):
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", required=True, help="key = value configuration file")
        p.add_argument("--out", default=".", help="output directory")
        if name == "sweep":
            p.add_argument("--workers", type=int, default=1, help="worker processes")
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.command == "certify":
            return cmd_certify(cfg, args.out)
        if args.command == "run":
            return cmd_run(cfg, args.out)
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        return cmd_sweep(cfg, args.out, args.workers)
    except (ConfigError, ThresholdError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
