"""Shape function phi of the blow-up subsolution and its calculus helpers."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

LEFT, RIGHT = -1, 1


@dataclass(frozen=True)
class PhiProfile:
    """phi(xi) = lam xi^2 on [0, 1], 1 - a/(xi - b) beyond.

    ``a = (1-lam)^2 / (2 lam)`` and ``b = (3 lam - 1) / (2 lam)`` make phi
    C^1 at xi = 1 with phi(1) = lam, phi'(1) = 2 lam.
    """

    lam: float

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise ValueError(f"lambda must lie in (0, 1), got {self.lam!r}")

    @property
    def a_lam(self) -> float:
        return (1.0 - self.lam) ** 2 / (2.0 * self.lam)

    @property
    def b_lam(self) -> float:
        return (3.0 * self.lam - 1.0) / (2.0 * self.lam)

    @property
    def ab(self) -> float:
        """a_lam + b_lam, equal to (lam + 1) / 2."""
        return self.a_lam + self.b_lam

    def _gap(self, xi):
        # xi - b, written so that 1 - b = (1 - lam)/(2 lam) carries no cancellation
        return (np.maximum(xi, 1.0) - 1.0) + (1.0 - self.lam) / (2.0 * self.lam)

    def phi(self, xi):
        xi = _check_xi(xi)
        outer = 1.0 - self.a_lam / self._gap(xi)
        return np.where(xi <= 1.0, self.lam * xi * xi, outer)[()]

    def phi_prime(self, xi):
        xi = _check_xi(xi)
        outer = self.a_lam / self._gap(xi) ** 2
        return np.where(xi < 1.0, 2.0 * self.lam * xi, outer)[()]

    def phi_second(self, xi, side: int = LEFT):
        """phi''; at the kink xi = 1 the one-sided value is picked by ``side``."""
        xi = _check_xi(xi)
        lam = self.lam
        outer = -2.0 * self.a_lam / self._gap(xi) ** 3
        inner = xi < 1.0 if side == RIGHT else xi <= 1.0
        return np.where(inner, 2.0 * lam, outer)[()]

    def psi(self, xi):
        """psi(xi) = xi (xi - b) / (xi - a - b) for xi >= 1."""
        xi = np.asarray(xi, dtype=float)
        if np.any(xi < 1.0):
            raise ValueError("psi is defined for xi >= 1 only")
        b = self.b_lam
        return (xi * (xi - b) / (xi - self.ab))[()]

    def psi_critical_points(self) -> tuple[float, float]:
        ab = self.ab
        root = np.sqrt(ab * ab - ab * self.b_lam)
        return ab - root, ab + root


def _check_xi(xi):
    xi = np.asarray(xi, dtype=float)
    if np.any(xi < 0):
        raise ValueError("phi is defined for xi >= 0 only")
    return xi


def make_profile(lam: float) -> PhiProfile:
    return PhiProfile(float(lam))


def psi_bound(p: PhiProfile, K: float, B: float) -> float:
    """Upper bound max{1/lam, 2K/sqrt(B)} of psi on [1, K/sqrt(B)].

    Valid only when ``B <= K^2 / (4 (a+b)^2)``.
    """
    if not K > 1:
        raise ValueError(f"K must exceed 1, got {K!r}")
    if not 0 < B < 1:
        raise ValueError(f"B must lie in (0, 1), got {B!r}")
    limit = K * K / (4.0 * p.ab**2)
    if B > limit:
        raise ValueError(
            f"smallness violated: B = {B:.6g} > K^2/(4(a+b)^2) = {limit:.6g}")
    return max(1.0 / p.lam, 2.0 * K / np.sqrt(B))
