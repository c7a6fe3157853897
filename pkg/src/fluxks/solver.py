"""Explicit method-of-lines integration of the mass accumulation equation.

Interior nodes evolve by

    w_t = n s^{1-1/n} w_s [ g(q) + chi h(y) ],
    q = n s^{1-1/n} w_ss / w_s,   y = s^{1/n-1} (w - mu s/n),
    g(x) = h(x) = x / sqrt(1 + x^2),

which is the flux-limited diffusion plus flux-limited taxis written in w.
The diffusive part uses centered differences; the taxis part is centered
where the local cell Peclet number is below 2 and upwinded otherwise.
Both fluxes saturate, so the transport speed never exceeds
``n s^{1-1/n} (1 + chi)``; the step size is the smaller of that CFL bound
and the explicit diffusion limit computed from the current profile.
"""
from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field

import numba
import numpy as np
from scipy.integrate import trapezoid
from scipy.special import roots_legendre

from .problem import ProblemSetup, RadialState, accumulate
from .subsolution import SubsolutionParams, w_lower

OUTCOMES = ("bounded_at_horizon", "blew_up", "monitor_breach", "step_floor")


@dataclass(frozen=True)
class SolverConfig:
    s_nodes: int = 512
    grading: float | None = None
    cfl: float = 0.9
    t_end: float = 1.0
    blowup_threshold: float = 1e3
    collapse_fraction: float = 0.05
    monitor_tolerance: float = 1e-3
    scheme: str = "euler"
    trace_points: int = 2000
    dt_floor: float = 1e-14
    max_steps: int = 2_000_000_000
    stop_on_detect: bool = True

    def __post_init__(self):
        if self.s_nodes < 16:
            raise ValueError("s_nodes must be >= 16")
        if not 0 < self.cfl < 1:
            raise ValueError("cfl must lie in (0, 1)")
        if self.grading is not None and not 1.0 <= self.grading <= 2.0:
            raise ValueError("grading exponent must lie in [1, 2]")
        for name in ("t_end", "blowup_threshold", "collapse_fraction", "monitor_tolerance"):
            if not getattr(self, name) > 0:
                raise ValueError(f"{name} must be positive")
        if self.scheme not in ("euler", "heun"):
            raise ValueError("scheme must be 'euler' or 'heun'")

    def grading_for(self, n: int) -> float:
        if self.grading is not None:
            return self.grading
        return 1.0 if n == 1 else 1.5


def make_grid(setup: ProblemSetup, nodes: int, grading: float = 1.0) -> np.ndarray:
    """Nodes ``s_i = R^n (i/(N-1))^grading``, clustered at the origin."""
    x = np.linspace(0.0, 1.0, nodes)
    s = setup.Rn * x**grading
    s[-1] = setup.Rn
    return s


# ---------------------------------------------------------------------------
# initial data


def uniform_state(setup: ProblemSetup, s: np.ndarray, perturbation: float = 0.0) -> RadialState:
    """u0 = const * (1 + eps cos(pi r / R)), normalised to mass m."""
    if abs(perturbation) >= 1:
        raise ValueError("perturbation amplitude must be below 1 for positivity")
    r = np.linspace(0.0, setup.R, 20001)
    u = 1.0 + perturbation * np.cos(np.pi * r / setup.R)
    return _sample(accumulate(r, u, setup), s)


def concentrated_state(setup: ProblemSetup, s: np.ndarray, width: float = 0.1,
                       fraction: float = 0.9) -> RadialState:
    """Gaussian core of relative width ``width`` holding ``fraction`` of the mass."""
    n = setup.n
    r = np.linspace(0.0, setup.R, 200001)
    sig = width * setup.R
    bump = np.exp(-(r / sig) ** 2)
    bump_mass = trapezoid(r ** (n - 1) * bump, r)
    flat_mass = setup.R**n / n
    u = fraction * bump / bump_mass + (1 - fraction) / flat_mass
    return _sample(accumulate(r, u, setup), s)


def state_from_profile(setup: ProblemSetup, s: np.ndarray, r, u) -> RadialState:
    return _sample(accumulate(np.asarray(r, float), np.asarray(u, float), setup), s)


def _sample(fine: RadialState, s: np.ndarray) -> RadialState:
    w = np.interp(s, fine.s, fine.w)
    w[0], w[-1] = 0.0, fine.w[-1]
    return RadialState(s, np.maximum.accumulate(w), fine.t)


class ThresholdError(ValueError):
    pass


def _mollified(f, s, width, Rn):
    """``(f * rho_width)(s)`` for an odd extension of f about 0 and f frozen
    beyond R^n (the caller pins the last value)."""
    if width <= 0:
        return f(s)
    z, wq = roots_legendre(64)
    # bump kernel exp(-1/(1-z^2)), normalised on [-1, 1]
    rho = np.exp(-1.0 / (1.0 - z * z))
    rho /= np.sum(rho * wq)
    out = np.zeros_like(s)
    for zk, ck in zip(z, rho * wq):
        x = s - width * zk
        val = np.sign(x) * f(np.clip(np.abs(x), 0.0, Rn))
        out += ck * val
    return out


def threshold_profile(params: SubsolutionParams, setup: ProblemSetup, width: float | None = None,
                      margin: float = 0.05, floor: float = 1e-3):
    """Accumulated mass ``s -> w0(s)`` of the smoothed threshold data.

    ``n d_s w_lo(., 0)`` is mollified (bump kernel, half-width ``width`` in
    s, default B0/20), blended with a flat floor of relative weight
    ``floor`` and rescaled to mass ``m (1 + margin)``.
    """
    W = setup.w_total
    Rn = setup.Rn
    if width is None:
        width = 0.05 * params.B0

    def wl(x):
        return w_lower(params, setup, x, 0.0)

    end = _mollified(wl, np.array([Rn]), width, Rn)[0]

    def w0(x):
        x = np.asarray(x, dtype=float)
        # the odd extension frozen at R^n loses mass near the end; renormalise
        wm = _mollified(wl, x, width, Rn) * (W / end)
        return (1.0 + margin) * ((1.0 - floor) * wm + floor * W * x / Rn)

    return w0


def init_from_threshold(params: SubsolutionParams, setup: ProblemSetup, s: np.ndarray,
                        width: float | None = None, margin: float = 0.05,
                        floor: float = 1e-3, check_points: int = 1000) -> RadialState:
    """Initial state dominating ``w_lo(., 0)``, i.e. int_{B_r} u0 >= M(r).

    Domination of the smoothed profile (``threshold_profile``) is verified
    on a fine grid and at the solver nodes before sampling.
    """
    W = setup.w_total
    Rn = setup.Rn
    w0 = threshold_profile(params, setup, width, margin, floor)
    fine = np.unique(np.concatenate([
        np.geomspace(params.B0 * 1e-4, Rn, check_points), s,
        np.linspace(0.0, Rn, check_points)]))
    short = w_lower(params, setup, fine, 0.0) - w0(fine)
    if np.any(short > 1e-14 * W):
        i = int(np.argmax(short))
        raise ThresholdError(
            f"mollified data falls below the threshold at s={fine[i]:.3e} by {short[i]:.3e}; "
            "use a smaller smoothing width or a larger margin")
    w = w0(s)
    w[0] = 0.0
    w[-1] = (1.0 + margin) * W
    state = RadialState(s, np.maximum.accumulate(w), 0.0)
    object.__setattr__(state, "meta", {"margin": margin, "width": width, "floor": floor})
    return state


# ---------------------------------------------------------------------------
# kernels


def _geometry(s: np.ndarray, n: int, chi: float) -> np.ndarray:
    """Per-node stencil constants, rows:
    0 1/hm, 1 1/hp, 2 hp/(hm+hp), 3 hm/(hm+hp), 4 2/(hm+hp),
    5 n s^{1-1/n}, 6 s^{1/n-1}, 7 advective step limit, 8 hm hp / (2 c^2).
    """
    N = s.size
    G = np.zeros((9, N))
    hm = np.diff(s)[:-1]
    hp = np.diff(s)[1:]
    se = np.ones(N) if n == 1 else np.where(s > 0, s ** (1.0 - 1.0 / n), 0.0)
    c = n * se
    inner = slice(1, N - 1)
    G[0, inner] = 1.0 / hm
    G[1, inner] = 1.0 / hp
    G[2, inner] = hp / (hm + hp)
    G[3, inner] = hm / (hm + hp)
    G[4, inner] = 2.0 / (hm + hp)
    G[5] = c
    G[6, inner] = 1.0 / se[inner]
    G[7, inner] = np.minimum(hm, hp) / (c[inner] * (1.0 + chi))
    G[8, inner] = 0.5 * hm * hp / c[inner] ** 2
    return G


@numba.njit(cache=True, fastmath=True)
def _rhs(s, w, G, n, chi, mu, out):
    """Fill ``out`` with w_t at interior nodes; return the stable step size."""
    N = s.size
    dt = 1e300
    out[0] = 0.0
    out[N - 1] = 0.0
    mun = mu / n
    for i in range(1, N - 1):
        dm = (w[i] - w[i - 1]) * G[0, i]
        dp = (w[i + 1] - w[i]) * G[1, i]
        ws = G[2, i] * dm + G[3, i] * dp
        wss = (dp - dm) * G[4, i]
        c_i = G[5, i]
        diff = 0.0
        deff = 0.0
        r2 = 1.0
        ir = 1.0
        lim = G[7, i]
        if ws > 0.0:
            q = c_i * wss / ws
            r2 = 1.0 + q * q
            ir = 1.0 / math.sqrt(r2)
            diff = c_i * ws * q * ir
            deff = c_i * c_i * ir / r2
            # explicit diffusion limit hm hp / (2 deff)
            dlim = G[8, i] * r2 / ir
            if dlim < lim:
                lim = dlim
        y = (w[i] - mun * s[i]) * G[6, i]
        hy = chi * y / math.sqrt(1.0 + y * y)
        if abs(c_i * hy) * (s[i + 1] - s[i - 1]) <= 4.0 * deff:
            # diffusion dominated: centered, second order
            out[i] = diff + c_i * hy * ws
        else:
            # transport dominated: both fluxes carry the density on the
            # upwind side of the net velocity g(q) + chi h(y)
            vel = hy
            if ws > 0.0:
                vel += diff / (c_i * ws)
            wu = dp if vel > 0.0 else dm
            out[i] = c_i * wu * vel
            if ws > 0.0 and wu > ws:
                dlim = G[8, i] * r2 / ir * (ws / wu)
                if dlim < lim:
                    lim = dlim
        if lim < dt:
            dt = lim
    return dt


@numba.njit(cache=True)
def _phi(xi, lam, a, b):
    if xi <= 1.0:
        return lam * xi * xi
    return 1.0 - a / (xi - b)


@numba.njit(cache=True)
def _min_defect(s, w, t, mp, Rn, W):
    """min_i (w - w_lo)(s_i, t); mp = (lam, a, b, K, B0, kappa, n)."""
    lam, a, b, K, B0, kappa, n = mp[0], mp[1], mp[2], mp[3], mp[4], mp[5], mp[6]
    root = B0 ** (1.0 / (2.0 * n)) - kappa * t / (2.0 * n)
    if root <= 0.0:
        return np.nan
    B = root ** (2.0 * n)
    sq = math.sqrt(B)
    ab = a + b
    N = K * K + a * Rn - 2.0 * ab * K * sq + ab * b * B
    A = W * (K * K - 2.0 * b * K * sq + b * b * B) / N
    D = W * a / N
    E = W - Rn * D
    edge = K * sq
    best = 1e300
    for i in range(s.size):
        if s[i] <= edge:
            lo = A * _phi(s[i] / B, lam, a, b)
        else:
            lo = D * s[i] + E
        d = w[i] - lo
        if d < best:
            best = d
    return best


@numba.njit(cache=True)
def _sup_u(s, w, n):
    best = 0.0
    for i in range(s.size - 1):
        v = (w[i + 1] - w[i]) / (s[i + 1] - s[i])
        if v > best:
            best = v
    return n * best


@numba.njit(cache=True)
def _clamp(w, W):
    """Running max from the left, capped at W; returns the largest correction."""
    worst = 0.0
    for i in range(1, w.size):
        if w[i] < w[i - 1]:
            d = w[i - 1] - w[i]
            if d > worst:
                worst = d
            w[i] = w[i - 1]
        if w[i] > W:
            d = w[i] - W
            if d > worst:
                worst = d
            w[i] = W
    return worst


@numba.njit(cache=True)
def _advance(s, w, G, n, chi, mu, W, cfl, heun, k1, k2, tmp, dt_cap):
    dt = cfl * _rhs(s, w, G, n, chi, mu, k1)
    if dt > dt_cap:
        dt = dt_cap
    if heun:
        for i in range(w.size):
            tmp[i] = w[i] + dt * k1[i]
        _rhs(s, tmp, G, n, chi, mu, k2)
        for i in range(w.size):
            w[i] += 0.5 * dt * (k1[i] + k2[i])
    else:
        for i in range(w.size):
            w[i] += dt * k1[i]
    w[0] = 0.0
    w[w.size - 1] = W
    return dt, _clamp(w, W)


@numba.njit(cache=True)
def _run_kernel(s, w, G, n, chi, mu, W, t0, t_end, cfl, heun, u_detect, dt_floor,
                max_steps, monitor, mp, Rn, W_lo, T_ext, breach_level, trace_dt, trace,
                stop_on_detect):
    """Integrate in place.  Returns (code, t, t_detect, steps, n_trace, max_clamp)."""
    k1 = np.empty_like(w)
    k2 = np.empty_like(w)
    tmp = np.empty_like(w)
    t = t0
    steps = 0
    n_trace = 0
    max_clamp = 0.0
    cap = trace.shape[0]
    next_trace = t0
    code = 0
    t_detect = np.nan
    dt = 0.0
    while True:
        su = _sup_u(s, w, n)
        defect = np.nan
        if monitor and t < T_ext:
            defect = _min_defect(s, w, t, mp, Rn, W_lo)
        if su >= u_detect and t_detect != t_detect:
            t_detect = t
        if t_detect == t_detect and stop_on_detect:
            code = 1
        elif monitor and defect == defect and defect < breach_level:
            code = 2
        done = code != 0 or t >= t_end or steps >= max_steps
        if done and code == 0 and t_detect == t_detect:
            code = 1
        if (t >= next_trace or done) and n_trace < cap:
            trace[n_trace, 0] = t
            trace[n_trace, 1] = su
            trace[n_trace, 2] = defect
            trace[n_trace, 3] = W - w[0]
            trace[n_trace, 4] = dt
            n_trace += 1
            next_trace = t + trace_dt
        if done:
            break
        dt, cl = _advance(s, w, G, n, chi, mu, W, cfl, heun, k1, k2, tmp, t_end - t)
        if cl > max_clamp:
            max_clamp = cl
        if dt < dt_floor and t + dt < t_end:
            code = 3
            if t_detect != t_detect:
                t_detect = t
            break
        t += dt
        steps += 1
    return code, t, t_detect, steps, n_trace, max_clamp


def data_mu(state: RadialState, setup: ProblemSetup) -> float:
    """Mean density ``n w(R^n) / R^n`` of the data itself (differs from
    ``setup.mu`` when the initial mass carries a margin)."""
    return setup.n * float(state.w[-1]) / setup.Rn


def step(state: RadialState, setup: ProblemSetup, config: SolverConfig) -> RadialState:
    """One explicit step; boundary pins reasserted, monotonicity clamped."""
    s = state.s
    w = np.array(state.w, dtype=float)
    W = float(w[-1])
    G = _geometry(s, setup.n, setup.chi)
    k1, k2, tmp = (np.empty_like(w) for _ in range(3))
    dt, clamp = _advance(s, w, G, setup.n, setup.chi, data_mu(state, setup), W, config.cfl,
                         config.scheme == "heun", k1, k2, tmp, np.inf)
    if dt < config.dt_floor * config.t_end:
        raise FloatingPointError(f"step size {dt:.3e} below floor")
    out = RadialState(s, w, state.t + dt)
    object.__setattr__(out, "meta", {**state.meta, "dt": dt, "clamp": clamp})
    return out


# ---------------------------------------------------------------------------
# runs


@dataclass
class RunReport:
    outcome: str
    t_final: float
    t_detect: float | None
    steps: int
    sup_u0: float
    u_detect: float
    max_clamp: float
    T_ext: float | None
    detected_before_1p2_T_ext: bool | None
    collapse_cap: float
    breach_level: float | None
    trace: dict = field(repr=False, default_factory=dict)
    final_state: RadialState | None = field(repr=False, default=None)

    @property
    def collapsed_at_start(self) -> bool:
        """Initial data already as concentrated as the grid can represent."""
        return self.sup_u0 >= self.collapse_cap

    @property
    def comparison_held(self) -> bool | None:
        """Monitored defect stayed above the breach level on [0, min(t_final, T_ext))."""
        if self.breach_level is None:
            return None
        d = self.min_defect()
        return bool(math.isnan(d) or d >= self.breach_level)

    @property
    def blew_up(self) -> bool:
        return self.outcome in ("blew_up", "step_floor")

    def min_defect(self) -> float:
        d = self.trace.get("min_defect", np.array([]))
        d = d[np.isfinite(d)]
        return float(d.min()) if d.size else float("nan")

    def max_sup_u(self) -> float:
        return float(np.max(self.trace["sup_u"]))

    def max_mass_drift(self) -> float:
        mass = self.trace["mass"]
        return float(np.max(np.abs(mass - mass[0])) / mass[0])

    def to_dict(self) -> dict:
        d = {k: v for k, v in asdict(self).items() if k not in ("trace", "final_state")}
        d["min_defect"] = self.min_defect()
        d["max_sup_u"] = self.max_sup_u()
        d["collapsed_at_start"] = self.collapsed_at_start
        d["comparison_held"] = self.comparison_held
        return {k: (None if isinstance(v, float) and not math.isfinite(v) else v)
                for k, v in d.items()}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    def trace_csv(self) -> str:
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        cols = ("t", "sup_u", "min_defect", "mass", "dt")
        wr.writerow(cols)
        for row in zip(*(self.trace[c] for c in cols)):
            wr.writerow([repr(float(v)) for v in row])
        return buf.getvalue()


def detection_level(state: RadialState, setup: ProblemSetup, config: SolverConfig):
    """(sup u0, detection level, grid collapse cap).

    The level is ``blowup_threshold * sup u0`` capped by the density of
    ``collapse_fraction`` of the total mass packed into the narrowest cell,
    which is about as concentrated as the grid can follow an aggregate.
    Detection always requires growth: the level never drops below
    ``2 sup u0``, so data already collapsed at grid scale is not reported
    as blow-up at t = 0 (see ``RunReport.collapsed_at_start``).
    """
    n = setup.n
    su0 = float(_sup_u(state.s, np.asarray(state.w), n))
    cap = config.collapse_fraction * n * state.w[-1] / float(np.min(np.diff(state.s)))
    return su0, max(2.0 * su0, min(config.blowup_threshold * su0, cap)), cap


def run(state0: RadialState, setup: ProblemSetup, config: SolverConfig,
        params: SubsolutionParams | None = None) -> RunReport:
    """Integrate to ``t_end`` or until detection, step floor or monitor breach."""
    s = np.asarray(state0.s, dtype=float)
    w = np.array(state0.w, dtype=float)
    W = float(w[-1])
    if w[0] != 0.0:
        raise ValueError("initial state must satisfy w(0) = 0")
    G = _geometry(s, setup.n, setup.chi)
    su0, u_detect, cap = detection_level(state0, setup, config)
    monitor = params is not None
    if monitor:
        p = params.profile
        mp = np.array([p.lam, p.a_lam, p.b_lam, params.K, params.B0, params.kappa, setup.n],
                      dtype=float)
        T_ext = params.T_ext
    else:
        mp = np.zeros(7)
        T_ext = np.inf
    trace = np.full((config.trace_points + 2, 5), np.nan)
    breach = -config.monitor_tolerance * setup.w_total
    code, t, t_det, steps, n_tr, clamp = _run_kernel(
        s, w, G, setup.n, setup.chi, data_mu(state0, setup), W, float(state0.t), float(config.t_end),
        config.cfl, config.scheme == "heun", u_detect, config.dt_floor * config.t_end,
        config.max_steps, monitor, mp, setup.Rn, setup.w_total, T_ext, breach,
        config.t_end / config.trace_points, trace, config.stop_on_detect)
    trace = trace[:n_tr]
    cols = ("t", "sup_u", "min_defect", "mass", "dt")
    tr = {c: trace[:, j].copy() for j, c in enumerate(cols)}
    tr["mass"] = setup.omega_n * tr["mass"]
    outcome = OUTCOMES[code]
    t_detect = None if not np.isfinite(t_det) else float(t_det)
    before = None
    if monitor:
        before = t_detect is not None and t_detect <= 1.2 * T_ext
    return RunReport(outcome, float(t), t_detect, int(steps), su0, u_detect, float(clamp),
                     T_ext if monitor else None, before, float(cap),
                     breach if monitor else None, tr, RadialState(s, w, float(t)))
