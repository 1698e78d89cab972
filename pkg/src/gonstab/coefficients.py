"""Closed-form scalar coefficients of the (1+n)-gon central configuration.

Ring bodies have unit mass and sit on the unit circle at angles
``theta_k = 2*pi*k/n``; the central body has mass ``m``.  All sums run over
``j = 1..n-1`` with vertex ``n`` (angle ``2*pi``) as the reference body.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError

N_MAX = 10**6


@dataclass(frozen=True)
class Scenario:
    n: int
    m: float
    e: float = 0.0

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise DomainError(f"n must be an integer >= 2, got {self.n!r}")
        if self.n > N_MAX:
            raise DomainError(f"n is capped at {N_MAX}")
        if not (self.m >= 0 and math.isfinite(self.m)):
            raise DomainError(f"central mass must be finite and >= 0, got {self.m!r}")
        if not (0.0 <= self.e < 1.0):
            raise DomainError(f"eccentricity must lie in [0, 1), got {self.e!r}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "m", float(self.m))
        object.__setattr__(self, "e", float(self.e))

    @property
    def n_blocks(self) -> int:
        return self.n // 2


@dataclass(frozen=True)
class GlobalCoefficients:
    sigma_n: float
    lam: float
    d_check: float
    d_hat: float
    q_max: float
    a0: float
    b0: float


@dataclass(frozen=True)
class BlockCoefficients:
    l: int
    P: float
    S: float
    Q: float
    a: float
    b: float


def _check_n(n):
    if int(n) != n or n < 2:
        raise DomainError(f"n must be an integer >= 2, got {n!r}")
    if n > N_MAX:
        raise DomainError(f"n is capped at {N_MAX}")
    return int(n)


def _check_mode(n, l):
    if int(l) != l or not 1 <= l <= n // 2:
        raise DomainError(f"mode index l must satisfy 1 <= l <= {n // 2}, got {l!r}")
    return int(l)


def pairwise_distance(n: int, j: int) -> float:
    """Distance from vertex n to vertex j on the unit circle."""
    n = _check_n(n)
    if int(j) != j or not 1 <= j <= n - 1:
        raise DomainError(f"vertex index j must satisfy 1 <= j <= {n - 1}, got {j!r}")
    return 2.0 * math.sin(math.pi * j / n)


def _ring_arrays(n):
    j = np.arange(1, n)
    d = 2.0 * np.sin(np.pi * j / n)
    return j, 2.0 * np.pi * j / n, 2.0 * d**3


def sigma_n(n: int) -> float:
    n = _check_n(n)
    i = np.arange(1, n)
    # np.sum uses pairwise accumulation on contiguous float arrays
    return float(0.5 * np.sum(1.0 / np.sin(np.pi * i / n)))


def trig_sums(n: int, l: int) -> tuple[float, float, float]:
    """Return the mode-l sums ``(P_l, S_l, Q_l)``."""
    n = _check_n(n)
    l = _check_mode(n, l)
    j, th, den = _ring_arrays(n)
    thl = th * l
    P = np.sum((1.0 - np.cos(thl) * np.cos(th)) / den)
    S = np.sum(np.sin(thl) * np.sin(th) / den)
    Q = np.sum((np.cos(th) - np.cos(thl)) / den)
    if l == 1:
        # cos(theta_{j1}) = cos(theta_j) exactly; avoid rounding noise
        Q = 0.0
    return float(P), float(S), float(Q)


def q_max(n: int, upper: int | None = None) -> float:
    """Largest Q_l over 2 <= l <= upper (default floor(n/2)); 0 on an empty range.

    Pass ``upper=(n - 1) // 2`` for the odd-block-only convention.
    """
    n = _check_n(n)
    upper = n // 2 if upper is None else min(int(upper), n // 2)
    if upper < 2:
        return 0.0
    return max(trig_sums(n, l)[2] for l in range(2, upper + 1))


def global_coefficients(scenario: Scenario, q_upper: int | None = None) -> GlobalCoefficients:
    n, m = scenario.n, scenario.m
    s = sigma_n(n)
    two_p1 = 2.0 * trig_sums(n, 1)[0]
    return GlobalCoefficients(
        sigma_n=s,
        lam=0.5 * s + m,
        d_check=min(two_p1, n / 2),
        d_hat=max(two_p1, n / 2),
        q_max=q_max(n, q_upper),
        a0=s + 2.0 * m,
        b0=-0.5 * s - m,
    )


def block_coefficients(scenario: Scenario, l: int) -> BlockCoefficients:
    P, S, Q = trig_sums(scenario.n, l)
    m = scenario.m
    return BlockCoefficients(l=int(l), P=P, S=S, Q=Q, a=P - 3.0 * Q + 2.0 * m, b=P + 3.0 * Q - m)


@dataclass(frozen=True)
class IdentityReport:
    n: int
    p1_residual: float
    four_dcheck_ge_sigma: bool
    second_inequality: bool
    harmonic_sum: float | None

    @property
    def inequalities_hold(self) -> bool:
        return self.four_dcheck_ge_sigma and self.second_inequality


def consistency_identities(n: int) -> IdentityReport:
    """Residual of the 2P_1 closed form and the two sufficient inequalities for block 1.

    The inequalities are ``4*d_check >= sigma_n`` and
    ``(4/3)*d_check + (2/3)*sigma_n > n``.  For n >= 28 the partial harmonic
    sum ``sum_{i < floor(n/2)} 1/(pi*i)`` is also returned.
    """
    n = _check_n(n)
    if n < 3:
        raise DomainError("consistency identities need n >= 3")
    s = sigma_n(n)
    two_p1 = 2.0 * trig_sums(n, 1)[0]
    dc = min(two_p1, n / 2)
    resid = abs(two_p1 - s + 0.5 / math.tan(math.pi / (2 * n)))
    harmonic = None
    if n >= 28:
        i = np.arange(1, n // 2)
        harmonic = float(np.sum(1.0 / (np.pi * i)))
    return IdentityReport(
        n=n,
        p1_residual=resid,
        four_dcheck_ge_sigma=bool(4 * dc >= s),
        second_inequality=bool(4 * dc / 3 + 2 * s / 3 > n),
        harmonic_sum=harmonic,
    )
