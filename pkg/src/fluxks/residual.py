"""The degenerate parabolic operator on mass accumulation profiles.

    P[w] = w_t - n^2 s^{2-2/n} w_s w_ss / sqrt(w_s^2 + n^2 s^{2-2/n} w_ss^2)
               - n chi (w - mu s/n) w_s / sqrt(1 + s^{2/n-2} (w - mu s/n)^2)

Both flux terms are saturating: the diffusion part is bounded by
``n s^{1-1/n} w_s`` and the taxis part by ``n chi s^{1-1/n} w_s``.
"""
from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field

import numpy as np

from .problem import ProblemSetup, RadialState
from .profile import LEFT, RIGHT
from .subsolution import SubsolutionParams, coeffs

REGIONS = ("very_inner", "intermediate", "outer")


def diffusion_term(s, ws, wss, n: int):
    """n^2 s^{2-2/n} ws wss / sqrt(ws^2 + n^2 s^{2-2/n} wss^2), written as
    ``n s^{1-1/n} ws g(q)`` with ``g(q) = q/sqrt(1+q^2)`` to stay finite."""
    s, ws, wss = (np.asarray(x, dtype=float) for x in (s, ws, wss))
    sc = n * s ** (1.0 - 1.0 / n)
    q = sc * wss / ws
    return (sc * ws * q / np.sqrt(1.0 + q * q))[()]


def taxis_term(s, w, ws, n: int, chi: float, mu: float):
    """n chi (w - mu s/n) ws / sqrt(1 + s^{2/n-2} (w - mu s/n)^2)."""
    s, w, ws = (np.asarray(x, dtype=float) for x in (s, w, ws))
    x = w - mu * s / n
    if n == 1:
        return (n * chi * x * ws / np.sqrt(1.0 + x * x))[()]
    with np.errstate(divide="ignore", invalid="ignore"):
        y = x / s ** (1.0 - 1.0 / n)
        out = n * chi * s ** (1.0 - 1.0 / n) * ws * y / np.sqrt(1.0 + y * y)
    return np.where(s > 0, out, 0.0)[()]


def rhs(s, w, ws, wss, setup: ProblemSetup):
    """w_t for a solution of P[w] = 0."""
    return diffusion_term(s, ws, wss, setup.n) + taxis_term(s, w, ws, setup.n, setup.chi, setup.mu)


def discrete_derivatives(s: np.ndarray, w: np.ndarray):
    """Centered nonuniform first and second differences at interior nodes."""
    hm = s[1:-1] - s[:-2]
    hp = s[2:] - s[1:-1]
    dm = (w[1:-1] - w[:-2]) / hm
    dp = (w[2:] - w[1:-1]) / hp
    ws = (hp * dm + hm * dp) / (hm + hp)
    wss = 2.0 * (dp - dm) / (hm + hp)
    return ws, wss


@dataclass
class DiscreteResidual:
    s: np.ndarray
    residual: np.ndarray
    degenerate_nodes: list[int]


def eval_P_discrete(state: RadialState, setup: ProblemSetup, w_t) -> DiscreteResidual:
    """P[w] at interior nodes from centered differences; ``w_t`` given per node."""
    s, w = state.s, state.w
    w_t = np.asarray(w_t, dtype=float)
    if w_t.shape == s.shape:
        w_t = w_t[1:-1]
    ws, wss = discrete_derivatives(s, w)
    bad = [int(i) + 1 for i in np.flatnonzero(ws <= 0)]
    with np.errstate(divide="ignore", invalid="ignore"):
        res = w_t - rhs(s[1:-1], w[1:-1], ws, wss, setup)
    res = np.where(ws > 0, res, np.nan)
    return DiscreteResidual(s[1:-1], res, bad)


def j_terms(params: SubsolutionParams, setup: ProblemSetup, xi, c, side: int = LEFT,
            j2_sign: float = 1.0):
    """Diffusive and chemotactic parts J1, J2 of P on the inner core.

    J1 is evaluated after factoring ``B^{1/n-1}`` out of its root, which
    keeps it finite as B -> 0.
    """
    n, chi, mu = setup.n, setup.chi, setup.mu
    p = params.profile
    xi = np.asarray(xi, dtype=float)
    B, A = c.B, c.A
    f1 = p.phi_prime(xi)
    f2 = p.phi_second(xi, side)
    e = 1.0 - 1.0 / n
    num = -n * n * B**e * xi ** (2 * e) * f2
    den = np.sqrt(B ** (2.0 / n) * f1 * f1 + n * n * xi ** (2 * e) * f2 * f2)
    J1 = num / den
    x = A * p.phi(xi) - mu / n * B * xi
    y = x / (B * xi) ** e
    J2 = -j2_sign * n * chi * (B * xi) ** e * y / np.sqrt(1.0 + y * y)
    return J1, J2


def eval_P_subsolution(params: SubsolutionParams, setup: ProblemSetup, s, t,
                       side: int = LEFT, j2_sign: float = 1.0):
    """Exact P[w_lo](s, t) assembled region by region.

    Core: ``A' phi + (A phi'/B) (-xi B' + J1 + J2)``; shell: the affine
    profile inserted directly.  Points on the kink lines take ``side``.
    """
    s = np.asarray(s, dtype=float)
    t = np.asarray(t, dtype=float)
    s, t = np.broadcast_arrays(s, t)
    c = coeffs(params, setup, t)
    p = params.profile
    n = setup.n
    edge = params.K * np.sqrt(c.B)
    inner = s < edge if side == RIGHT else s <= edge
    xi = np.where(inner, s / c.B, 1.0)
    J1, J2 = j_terms(params, setup, xi, c, side, j2_sign)
    core = c.Aprime * p.phi(xi) + c.A * p.phi_prime(xi) / c.B * (-xi * c.Bprime + J1 + J2)
    w_out = c.D * s + c.E
    shell = c.Dprime * (s - setup.Rn) - j2_sign * taxis_term(s, w_out, c.D, n, setup.chi, setup.mu)
    return np.where(inner, core, shell)[()]


@dataclass
class RegionResult:
    region: str
    count: int
    max_residual: float
    worst_s: float
    worst_t: float
    passed: bool


@dataclass
class CertReport:
    passed: bool
    tol_sign: float
    grid: dict
    regions: list[RegionResult] = field(default_factory=list)

    def worst(self) -> RegionResult:
        return max(self.regions, key=lambda r: r.max_residual)

    def to_dict(self) -> dict:
        return {"passed": self.passed, "tol_sign": self.tol_sign, "grid": self.grid,
                "regions": [asdict(r) for r in self.regions]}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)


def _offset_nodes(lo: float, hi: float, k: int, log: bool) -> np.ndarray:
    # midpoints of a partition: never on the endpoints (kink lines)
    if log and lo > 0:
        edges = np.geomspace(lo, hi, k + 1)
        return np.sqrt(edges[:-1] * edges[1:])
    edges = np.linspace(lo, hi, k + 1)
    return 0.5 * (edges[:-1] + edges[1:])


def certification_grid(params: SubsolutionParams, setup: ProblemSetup,
                       s_nodes: int = 1000, t_nodes: int = 1000, t_frac: float = 0.99):
    """Sample points per region: returns {region: (s, t)} arrays.

    Times are midpoints of a uniform partition of [0, t_frac T_ext]; in each
    time slice the s-nodes are split evenly between the three regions and
    placed at cell midpoints, so they avoid s = B(t) and s = K sqrt(B(t)).
    """
    t = _offset_nodes(0.0, t_frac * params.T_ext, t_nodes, log=False)
    c = coeffs(params, setup, t)
    k = max(s_nodes // 3, 1)
    out = {r: ([], []) for r in REGIONS}
    for ti, Bi in zip(t, np.atleast_1d(c.B)):
        edge = params.K * np.sqrt(Bi)
        pieces = {
            "very_inner": _offset_nodes(Bi * 1e-6, Bi, k, log=True),
            "intermediate": _offset_nodes(Bi, edge, k, log=True),
            "outer": _offset_nodes(edge, setup.Rn, s_nodes - 2 * k, log=False),
        }
        for r, sv in pieces.items():
            out[r][0].append(sv)
            out[r][1].append(np.full_like(sv, ti))
    return {r: (np.concatenate(a), np.concatenate(b)) for r, (a, b) in out.items()}


def certify_subsolution(params: SubsolutionParams, setup: ProblemSetup,
                        s_nodes: int = 1000, t_nodes: int = 1000, t_frac: float = 0.99,
                        j2_sign: float = 1.0) -> CertReport:
    """Check P[w_lo] <= tol on every region of an offset tensor grid."""
    tol = 1e-8 * setup.w_total / params.T_ext
    grid = certification_grid(params, setup, s_nodes, t_nodes, t_frac)
    regions = []
    for name in REGIONS:
        s, t = grid[name]
        res = eval_P_subsolution(params, setup, s, t, j2_sign=j2_sign)
        res = np.where(np.isnan(res), np.inf, res)
        i = int(np.argmax(res))
        regions.append(RegionResult(name, int(s.size), float(res[i]), float(s[i]), float(t[i]),
                                    bool(res[i] <= tol)))
    spec = {"s_nodes": s_nodes, "t_nodes": t_nodes, "t_max": t_frac * params.T_ext,
            "T_ext": params.T_ext}
    return CertReport(all(r.passed for r in regions), tol, spec, regions)
