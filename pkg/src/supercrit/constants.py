"""Exponent algebra for Delta u + u^p = 0 in the supercritical range."""

import math
from dataclasses import dataclass
from enum import Enum


class DomainError(ValueError):
    """Raised when (n, p) falls outside the supercritical setting."""


class Regime(str, Enum):
    MODE1_OK = "mode1_ok"
    SYMMETRIC_REQUIRED = "symmetric_required"
    ABOVE_JOSEPH_LUNDGREN = "above_joseph_lundgren"


@dataclass(frozen=True)
class Exponents:
    """Every constant derived from the dimension ``n`` and the power ``p``.

    ``lambda2`` is ``None`` when its discriminant is negative; ``p_c`` is
    ``math.inf`` for n <= 10.
    """

    n: int
    p: float
    m: float
    alpha: float
    beta: float
    L: float
    p_serrin: float
    p_mode1: float
    p_c: float
    lambda2: float | None
    sigma: float

    @property
    def equilibrium(self):
        """Attracting equilibrium beta^(1/(p-1)) of the Fowler ODE (equals L)."""
        return self.L

    @property
    def lambda2_discriminant(self):
        return self.alpha**2 - 8.0 * (self.n - 2 - self.m)


def joseph_lundgren(n):
    if n <= 10:
        return math.inf
    return ((n - 2) ** 2 - 4 * n + 4 * math.sqrt(n * n - (n - 2) ** 2)) / ((n - 2) * (n - 10))


def derive_exponents(n, p, sigma_override=None):
    if int(n) != n or n < 4:
        raise DomainError(f"dimension n={n} unsupported (need an integer n >= 4)")
    n = int(n)
    p = float(p)
    p_serrin = (n + 2) / (n - 2)
    if not p > p_serrin:
        raise DomainError(
            f"subcritical/critical regime unsupported: p={p} <= (n+2)/(n-2)={p_serrin}"
        )
    m = 2.0 / (p - 1.0)
    alpha = n - 2 - 2.0 * m
    beta = m * (n - 2 - m)
    L = beta ** (1.0 / (p - 1.0))
    disc = alpha**2 - 8.0 * (n - 2 - m)
    lambda2 = (alpha + math.sqrt(disc)) / 2.0 if disc >= 0 else None
    sigma = m if sigma_override is None else float(sigma_override)
    if not 0 < sigma < n - 2:
        raise DomainError(f"sigma={sigma} must lie in (0, n-2)=(0, {n - 2})")
    return Exponents(
        n=n,
        p=p,
        m=m,
        alpha=alpha,
        beta=beta,
        L=L,
        p_serrin=p_serrin,
        p_mode1=(n + 1) / (n - 3),
        p_c=joseph_lundgren(n),
        lambda2=lambda2,
        sigma=sigma,
    )


def classify_regime(e):
    """Which part of the exponent range (n, p) sits in.

    ``above_joseph_lundgren`` takes precedence: it is returned whenever
    p >= p_c, and in that case p > (n+1)/(n-3) holds as well.
    """
    if e.p >= e.p_c:
        return Regime.ABOVE_JOSEPH_LUNDGREN
    if e.p > e.p_mode1:
        return Regime.MODE1_OK
    return Regime.SYMMETRIC_REQUIRED


def mode1_solvable(e):
    return e.p > e.p_mode1


def mode_eigenvalue(n, k):
    if k < 0:
        raise ValueError("mode index must be >= 0")
    return float(k * (n - 2 + k))
