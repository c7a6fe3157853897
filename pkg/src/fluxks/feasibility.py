"""Deterministic parameter selection for the blow-up subsolution.

Two recipes are available:

``"corrected"`` (default)
    Uses the sharp form of the bound ``1/(A^2 s^{2/n-2} phi^2) <=
    omega_n^2 (1 + a R^n/K^2)^2 K^{2-2/n} B0^{1-1/n} / (lam^2 m^2)``.  In one
    dimension this makes the taxis margin depend on ``m / omega_1``, so the
    construction needs ``m > omega_1 * m_c``.
``"literal"``
    The older form of the same bound (``omega_n`` dropped for n = 1,
    unsquared factor, ``B0^{3-3/n}``).  Kept to reproduce and diagnose
    parameter sets that the certifier rejects.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .problem import ProblemSetup
from .profile import PhiProfile
from .subsolution import SubsolutionParams, make_params, w_lower

RECIPES = ("corrected", "literal")
LAMBDA_SCAN = tuple(np.round(np.arange(0.50, 0.951, 0.05), 2)) + (0.99,)
K_MARGIN = 1e-6
B0_FLOOR = 1e-30


@dataclass(frozen=True)
class Constraint:
    name: str
    sense: str
    required: float
    actual: float

    @property
    def satisfied(self) -> bool:
        a, r = self.actual, self.required
        return {"<=": a <= r, "<": a < r, ">": a > r, ">=": a >= r}[self.sense]


@dataclass
class FeasibilityReport:
    feasible: bool
    reason: str = ""
    params: SubsolutionParams | None = None
    constraints: list[Constraint] = field(default_factory=list)
    kappa_components: dict[str, float] = field(default_factory=dict)
    recipe: str = "corrected"

    def violated(self) -> list[Constraint]:
        return [c for c in self.constraints if not c.satisfied]

    def to_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(["name", "required", "actual", "satisfied"])
        for c in self.constraints:
            wr.writerow([f"{c.name} ({c.sense})", repr(c.required), repr(c.actual),
                         str(c.satisfied).lower()])
        return buf.getvalue()


def kappa_outer(setup: ProblemSetup, profile: PhiProfile, K: float) -> float:
    """Largest shrink rate for which the affine shell stays a subsolution."""
    n, m, om = setup.n, setup.m, setup.omega_n
    root = math.sqrt(1.0 + K ** (2.0 / n - 2.0) * m * m / om**2)
    return n * m * setup.chi * K / (2.0 * profile.ab * om * setup.Rn * root)


def _c1_n1(setup, lam, delta, recipe):
    m, chi, om = setup.m, setup.chi, setup.omega_n
    if recipe == "literal":
        return (1 - delta) * m * chi / math.sqrt((1 + delta) / lam**2 + m * m) - 1.0
    return (1 - delta) * m * chi / math.sqrt(om**2 * (1 + delta) ** 2 / lam**2 + m * m) - 1.0


def _c1_nd(setup, delta):
    return setup.n * ((1 - delta) * setup.chi / math.sqrt(1 + delta) - 1.0)


def _half_root(f) -> float:
    """Half of the root of a decreasing f on (0, 1) with f(0) > 0 > f(1-)."""
    return 0.5 * brentq(f, 0.0, 1.0 - 1e-15, xtol=1e-15, rtol=1e-14)


def _dominance_lhs(setup, profile, K, B0, recipe):
    """Left side of the condition making the taxis denominator dominated."""
    n, m, om, Rn = setup.n, setup.m, setup.omega_n, setup.Rn
    lam, a = profile.lam, profile.a_lam
    if recipe == "literal":
        return om / (lam * m) ** 2 * (1 + a * Rn / K**2) * K ** (2 - 2 / n) * B0 ** (3 - 3 / n)
    return (om / (lam * m)) ** 2 * (1 + a * Rn / K**2) ** 2 * K ** (2 - 2 / n) * B0 ** (1 - 1 / n)


def _b0_constraints(setup, profile, K, delta, B0, A_T, recipe):
    n, Rn, mu, chi = setup.n, setup.Rn, setup.mu, setup.chi
    ab, lam = profile.ab, profile.lam
    rows = [
        Constraint("B0 in (0,1)", "<", 1.0, B0),
        Constraint("K sqrt(B0) < R^n", "<", Rn, K * math.sqrt(B0)),
        Constraint("B0 <= K^2/(4(a+b)^2) [well-posed A,D,E]", "<=", K * K / (4 * ab * ab), B0),
        Constraint("B0 <= K^2/(16(a+b)^2) [outer shell]", "<=", K * K / (16 * ab * ab), B0),
        Constraint("B0 <= (n/(4 chi mu))^n [core]", "<=", (n / (4 * chi * mu)) ** n, B0),
        Constraint("mu/(n A_T) max(B0/lam, 2K sqrt(B0)) <= delta [taxis numerator]", "<=", delta,
                   mu / (n * A_T) * max(B0 / lam, 2 * K * math.sqrt(B0))),
    ]
    if n >= 2:
        rows.append(Constraint("denominator dominance <= delta", "<=", delta,
                               _dominance_lhs(setup, profile, K, B0, recipe)))
    return rows


def select_params(setup: ProblemSetup, recipe: str = "corrected") -> FeasibilityReport:
    """Pick (lam, K, delta, B0, kappa) making every region a subsolution."""
    if recipe not in RECIPES:
        raise ValueError(f"unknown recipe {recipe!r}; choose from {RECIPES}")
    n, chi, m, Rn = setup.n, setup.chi, setup.m, setup.Rn
    if chi <= 1:
        return FeasibilityReport(False, "chi <= 1: blow-up construction requires chi > 1",
                                 recipe=recipe)

    pre_rows: list[Constraint] = []
    if n == 1:
        # effective mass entering the 1-d taxis margin
        m_eff = m if recipe == "literal" else m / setup.omega_n
        if m_eff <= setup.m_crit:
            what = "m" if recipe == "literal" else "m/omega_1"
            return FeasibilityReport(
                False, f"{what} <= m_c: {m_eff:.6g} <= {setup.m_crit:.6g}", recipe=recipe)
        lam = next((l for l in LAMBDA_SCAN
                    if m_eff * chi / math.sqrt(1 / l**2 + m_eff**2) > 1), None)
        if lam is None:
            return FeasibilityReport(False, "no lambda in scan yields taxis dominance", recipe=recipe)
        profile = PhiProfile(float(lam))
        delta = _half_root(lambda d: _c1_n1(setup, lam, d, recipe))
        c1 = _c1_n1(setup, lam, delta, recipe)
        a, b = profile.a_lam, profile.b_lam
        K = max(math.sqrt(max(b, 0.0) * Rn), 1.0) * (1 + K_MARGIN)
        K = max(K, math.sqrt(a * Rn / delta))
        kappa_taxis = c1 / K
        pre_rows += [
            Constraint("m chi/sqrt(1/lam^2+m^2) > 1 [lambda choice]", ">", 1.0,
                       m_eff * chi / math.sqrt(1 / lam**2 + m_eff**2)),
            Constraint("a R/K^2 <= delta", "<=", delta, a * Rn / K**2),
        ]
    else:
        profile = PhiProfile(0.5)
        a, b = profile.a_lam, profile.b_lam
        delta = _half_root(lambda d: _c1_nd(setup, d))
        c1 = _c1_nd(setup, delta)
        K = max(math.sqrt(max(b, 0.0) * Rn), 1.0) * (1 + K_MARGIN)
        kappa_taxis = c1 * K ** (-1.0 / n)
    pre_rows += [
        Constraint("c1 > 0 [taxis margin]", ">", 0.0, c1),
        Constraint("K > 1", ">", 1.0, K),
        Constraint("K^2 >= b R^n [A nonincreasing]", ">=", b * Rn, K * K),
    ]

    A_T = setup.w_total / (1.0 + a * Rn / K**2)
    B0 = min(K * K / (4 * profile.ab**2), 0.5)
    while True:
        rows = _b0_constraints(setup, profile, K, delta, B0, A_T, recipe)
        if all(r.satisfied for r in rows):
            break
        B0 *= 0.5
        if B0 < B0_FLOOR:
            bad = [r.name for r in rows if not r.satisfied]
            return FeasibilityReport(False, f"B0 shrink hit floor; failing: {bad}",
                                     constraints=pre_rows + rows, recipe=recipe)

    k_out = kappa_outer(setup, profile, K)
    comps = {"taxis": kappa_taxis, "outer": k_out, "core": n / 4.0}
    kappa = min(comps.values())
    params = make_params(setup, profile, K, delta, B0, kappa, c1)
    rows = pre_rows + rows + [
        Constraint("kappa <= kappa_taxis", "<=", kappa_taxis, kappa),
        Constraint("kappa <= kappa_outer", "<=", k_out, kappa),
        Constraint("kappa <= n/4", "<=", n / 4.0, kappa),
    ]
    ok = all(r.satisfied for r in rows)
    return FeasibilityReport(ok, "" if ok else "constraint violated", params, rows, comps, recipe)


def M_profile(params: SubsolutionParams, setup: ProblemSetup, r):
    """Initial mass threshold: ``int_{B_r} u0 >= M(r)`` forces blow-up."""
    r = np.asarray(r, dtype=float)
    return (setup.omega_n * w_lower(params, setup, r**setup.n, 0.0))[()]
