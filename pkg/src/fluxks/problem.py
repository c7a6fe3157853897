"""Problem definition and the mass-accumulation transform.

A radial density ``u(r)`` on the ball ``B_R(0) in R^n`` is encoded by

    w(s) = int_0^{s^{1/n}} r^{n-1} u(r) dr,   s in [0, R^n],

so that ``u = n * w_s`` and ``w(R^n) = m / omega_n``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_trapezoid
from scipy.special import gamma


def sphere_measure(n: int) -> float:
    """(n-1)-dimensional measure of the unit sphere in R^n."""
    return 2.0 * math.pi ** (n / 2.0) / gamma(n / 2.0)


@dataclass(frozen=True)
class ProblemSetup:
    n: int
    R: float
    chi: float
    m: float
    omega_n: float
    mu: float
    m_crit: float

    @property
    def Rn(self) -> float:
        return self.R**self.n

    @property
    def volume(self) -> float:
        return self.omega_n * self.Rn / self.n

    @property
    def w_total(self) -> float:
        """Boundary value ``m / omega_n`` of the accumulated mass."""
        return self.m / self.omega_n


def make_setup(n: int, R: float, chi: float, m: float) -> ProblemSetup:
    if int(n) != n or n < 1:
        raise ValueError(f"dimension n must be an integer >= 1, got {n!r}")
    if not R > 0:
        raise ValueError(f"radius R must be positive, got {R!r}")
    if not chi > 0:
        raise ValueError(f"sensitivity chi must be positive, got {chi!r}")
    if not m > 0:
        raise ValueError(f"mass m must be positive, got {m!r}")
    n = int(n)
    omega = sphere_measure(n)
    mu = m * n / (omega * R**n)
    m_crit = 1.0 / math.sqrt(chi**2 - 1.0) if chi > 1 else math.inf
    return ProblemSetup(n=n, R=float(R), chi=float(chi), m=float(m),
                        omega_n=omega, mu=mu, m_crit=m_crit)


@dataclass(frozen=True)
class RadialState:
    """Mass accumulation profile ``w`` sampled on ``s_grid`` at time ``t``."""

    s: np.ndarray
    w: np.ndarray
    t: float = 0.0
    meta: dict = field(default_factory=dict, compare=False)

    def __post_init__(self):
        s = np.asarray(self.s, dtype=float)
        w = np.asarray(self.w, dtype=float)
        if s.ndim != 1 or s.shape != w.shape:
            raise ValueError("s and w must be 1-d arrays of equal length")
        if s.size < 3:
            raise ValueError("a radial state needs at least 3 nodes")
        if np.any(np.diff(s) <= 0):
            raise ValueError("s grid must be strictly increasing")
        if np.any(np.diff(w) < 0):
            raise ValueError("w must be nondecreasing in s")
        s.setflags(write=False)
        w.setflags(write=False)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "w", w)

    def check_pins(self, setup: ProblemSetup) -> None:
        if self.s[0] != 0.0 or self.w[0] != 0.0:
            raise ValueError("state must start at s=0 with w=0")
        if self.w[-1] <= 0:
            raise ValueError("state carries no mass")


def accumulate(r: np.ndarray, u: np.ndarray, setup: ProblemSetup,
               t: float = 0.0) -> RadialState:
    """Mass accumulation function of a sampled radial density.

    The trapezoid integral of ``r^{n-1} u`` is rescaled so the last node
    carries exactly ``m / omega_n``.
    """
    r = np.asarray(r, dtype=float)
    u = np.asarray(u, dtype=float)
    if r.shape != u.shape or r.ndim != 1:
        raise ValueError("r and u must be 1-d arrays of equal length")
    if np.any(u < 0):
        bad = int(np.flatnonzero(u < 0)[0])
        raise ValueError(f"negative density sample u[{bad}] = {u[bad]:.3e} at r = {r[bad]:.6g}")
    if r[0] != 0.0 or not math.isclose(r[-1], setup.R, rel_tol=1e-12):
        raise ValueError("r grid must cover [0, R]")
    n = setup.n
    w = cumulative_trapezoid(r ** (n - 1) * u, r, initial=0.0)
    if w[-1] <= 0:
        raise ValueError("density has zero total mass")
    w = w * (setup.w_total / w[-1])
    w[-1] = setup.w_total
    return RadialState(r**n, np.maximum.accumulate(w), t)


def _cell_density(state: RadialState, n: int) -> np.ndarray:
    return n * np.diff(state.w) / np.diff(state.s)


def reconstruct_u_v(state: RadialState, setup: ProblemSetup):
    """Density ``u`` and signal ``v`` (gauge ``v(R)=0``) on the r-grid.

    Returns ``(r, u, v)``.  ``u = n w_s`` uses second-order differences
    (one-sided at the ends); ``v_r = r^{1-n} (mu s / n - w)``.
    """
    s, w = state.s, state.w
    if s.size < 3:
        raise ValueError("need at least 3 nodes")
    n = setup.n
    r = s ** (1.0 / n)
    u = n * np.gradient(w, s, edge_order=2)
    u = np.maximum(u, 0.0)
    flux = setup.mu * s / n - w
    v_r = np.zeros_like(s)
    pos = r > 0
    v_r[pos] = flux[pos] / r[pos] ** (n - 1)
    # v(R) = 0: v(r) = -int_r^R v_r
    cum = cumulative_trapezoid(v_r, r, initial=0.0)
    v = cum - cum[-1]
    return r, u, v


def total_mass(state: RadialState, setup: ProblemSetup) -> float:
    """``int_Omega u dx`` with ``u`` taken cellwise constant, ``n dw/ds``."""
    dens = _cell_density(state, setup.n)
    return float(setup.omega_n * np.sum(dens * np.diff(state.s)) / setup.n)
