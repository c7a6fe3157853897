"""Composite blow-up subsolution: parabola-like core glued to an affine shell.

For a shrinking width ``B(t)`` the comparison function is

    w_lo(s, t) = A(t) phi(s / B(t))     for s <= K sqrt(B(t)),
               = D(t) s + E(t)          beyond,

with A, D, E fixed by C^1 matching at ``s = K sqrt(B)`` and the pin
``w_lo(R^n, t) = m / omega_n``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .problem import ProblemSetup
from .profile import LEFT, PhiProfile


class ExtinctionError(ValueError):
    """Requested time is at or beyond the extinction time of B."""


class ConstraintViolation(ValueError):
    pass


@dataclass(frozen=True)
class SubsolutionParams:
    profile: PhiProfile
    K: float
    delta: float
    B0: float
    kappa: float
    n: int
    T_ext: float
    A_T: float
    c1: float

    @property
    def lam(self) -> float:
        return self.profile.lam


def make_params(setup: ProblemSetup, profile: PhiProfile, K: float, delta: float,
                B0: float, kappa: float, c1: float = float("nan")) -> SubsolutionParams:
    if not K > 1:
        raise ValueError("K must exceed 1")
    if not 0 < B0 < 1:
        raise ValueError("B0 must lie in (0, 1)")
    if not kappa > 0:
        raise ValueError("kappa must be positive")
    n = setup.n
    T_ext = 2.0 * n / kappa * B0 ** (1.0 / (2 * n))
    A_T = setup.w_total / (1.0 + profile.a_lam * setup.Rn / K**2)
    return SubsolutionParams(profile, float(K), float(delta), float(B0), float(kappa),
                             n, T_ext, A_T, float(c1))


def B_of_t(params: SubsolutionParams, n: int, t):
    """Closed-form solution of B' = -kappa B^{1-1/(2n)}, B(0) = B0.

    Returns ``(B, B')``.
    """
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("t must be nonnegative")
    if np.any(t >= params.T_ext):
        raise ExtinctionError(f"t must stay below the extinction time {params.T_ext:.6g}")
    root = params.B0 ** (1.0 / (2 * n)) - params.kappa * t / (2 * n)
    B = root ** (2 * n)
    Bp = -params.kappa * root ** (2 * n - 1)
    return B[()], Bp[()]


@dataclass(frozen=True)
class TimeCoeffs:
    t: np.ndarray
    B: np.ndarray
    Bprime: np.ndarray
    N: np.ndarray
    A: np.ndarray
    D: np.ndarray
    E: np.ndarray
    Aprime: np.ndarray
    Dprime: np.ndarray
    Eprime: np.ndarray


def coeffs(params: SubsolutionParams, setup: ProblemSetup, t) -> TimeCoeffs:
    B, Bp = B_of_t(params, setup.n, t)
    return coeffs_from_B(params, setup, B, Bp, t)


def coeffs_from_B(params: SubsolutionParams, setup: ProblemSetup, B, Bp, t=np.nan) -> TimeCoeffs:
    a, b = params.profile.a_lam, params.profile.b_lam
    ab = a + b
    K, Rn, W = params.K, setup.Rn, setup.w_total
    B = np.asarray(B, dtype=float)
    Bp = np.asarray(Bp, dtype=float)
    sq = np.sqrt(B)
    N = K * K + a * Rn - 2.0 * ab * K * sq + ab * b * B
    if np.any(N <= 0):
        raise ConstraintViolation("N(t) <= 0: width B exceeds the smallness bound K^2/(4(a+b)^2)")
    A = W * (K * K - 2.0 * b * K * sq + b * b * B) / N
    D = W * a / N
    E = W - Rn * D
    lever = (K / sq - b) * Bp / (N * N)
    Aprime = W * (a * K * K - a * b * Rn) * lever
    Dprime = W * a * ab * lever
    Eprime = -Rn * Dprime
    return TimeCoeffs(np.asarray(t, dtype=float)[()], B[()], Bp[()], N[()], A[()], D[()],
                      E[()], Aprime[()], Dprime[()], Eprime[()])


def _split(params, c, s):
    s = np.asarray(s, dtype=float)
    edge = params.K * np.sqrt(c.B)
    return s, edge, s <= edge


def w_lower(params: SubsolutionParams, setup: ProblemSetup, s, t):
    c = coeffs(params, setup, t)
    return w_lower_c(params, c, s)


def w_lower_c(params: SubsolutionParams, c: TimeCoeffs, s):
    s, edge, inner = _split(params, c, s)
    xi = np.where(inner, s / c.B, 1.0)
    return np.where(inner, c.A * params.profile.phi(xi), c.D * s + c.E)[()]


def w_lower_s(params: SubsolutionParams, setup: ProblemSetup, s, t):
    c = coeffs(params, setup, t)
    s, edge, inner = _split(params, c, s)
    xi = np.where(inner, s / c.B, 1.0)
    return np.where(inner, c.A / c.B * params.profile.phi_prime(xi), c.D + 0.0 * s)[()]


def w_lower_ss(params: SubsolutionParams, setup: ProblemSetup, s, t, side: int = LEFT):
    """Second s-derivative; on the kink lines ``side`` picks the one-sided value."""
    c = coeffs(params, setup, t)
    s = np.asarray(s, dtype=float)
    edge = params.K * np.sqrt(c.B)
    inner = s < edge if side > 0 else s <= edge
    xi = np.where(inner, s / c.B, 1.0)
    return np.where(inner, c.A / c.B**2 * params.profile.phi_second(xi, side), 0.0 * s)[()]


def w_lower_t(params: SubsolutionParams, setup: ProblemSetup, s, t):
    c = coeffs(params, setup, t)
    s, edge, inner = _split(params, c, s)
    xi = np.where(inner, s / c.B, 1.0)
    p = params.profile
    win_t = c.Aprime * p.phi(xi) - c.A * xi * c.Bprime / c.B * p.phi_prime(xi)
    wout_t = c.Dprime * (s - setup.Rn)
    return np.where(inner, win_t, wout_t)[()]


def matching_residuals(params: SubsolutionParams, setup: ProblemSetup, t):
    """Relative gaps of value, slope and time derivative across s = K sqrt(B(t)).

    Each gap is normalised by the sum of magnitudes of the terms entering it.
    """
    c = coeffs(params, setup, t)
    p = params.profile
    K, Rn = params.K, setup.Rn
    sq = np.sqrt(c.B)
    xi = K / sq
    lhs_v = c.A * p.phi(xi)
    rhs_v = c.D * K * sq + c.E
    value_gap = np.abs(lhs_v - rhs_v) / (np.abs(lhs_v) + np.abs(c.D * K * sq) + np.abs(c.E))

    lhs_s = c.A / c.B * p.phi_prime(xi)
    slope_gap = np.abs(lhs_s - c.D) / (np.abs(lhs_s) + np.abs(c.D))

    Eprime = c.Eprime
    t1 = c.Aprime * p.phi(xi)
    t2 = K * c.A * c.Bprime / sq**3 * p.phi_prime(xi)
    t3 = c.Dprime * K * sq
    scale = np.abs(t1) + np.abs(t2) + np.abs(t3) + np.abs(Eprime)
    tderiv_gap = np.abs(t1 - t2 - t3 - Eprime) / scale
    return value_gap[()], slope_gap[()], tderiv_gap[()]


def slope_witness(params: SubsolutionParams, setup: ProblemSetup, t):
    """lam A(t) / B(t): lower bound on sup u forced by comparison with w_lo."""
    c = coeffs(params, setup, t)
    return (params.lam * c.A / c.B)[()]
