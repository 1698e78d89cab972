"""Reduced symmetric blocks R_l, two-parameter comparison blocks and B(theta)."""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.linalg import block_diag

from .coefficients import Scenario, block_coefficients, global_coefficients, trig_sums
from .errors import DomainError
from .reduction import J2, closed_form_block, symplectic_rotation

N2 = np.diag([1.0, -1.0])


@dataclass(frozen=True)
class ReducedBlock:
    l: int
    R: np.ndarray

    @property
    def dim(self) -> int:
        return self.R.shape[0]


@dataclass(frozen=True)
class TwoParamBlock:
    """R = (1 + alpha) I + beta * diag(1, -1).  beta keeps its sign."""

    alpha: float
    beta: float

    @property
    def R(self) -> np.ndarray:
        return (1.0 + self.alpha) * np.eye(2) + self.beta * N2

    @property
    def dim(self) -> int:
        return 2

    def normalized(self) -> "TwoParamBlock":
        # A(alpha, beta) and A(alpha, -beta) are similar
        return TwoParamBlock(self.alpha, abs(self.beta))


def _check_block(scenario, l):
    if int(l) != l or not 1 <= l <= scenario.n // 2:
        raise DomainError(f"block index must satisfy 1 <= l <= {scenario.n // 2}, got {l!r}")
    return int(l)


def block_ids(n: int) -> list[int]:
    return list(range(1, n // 2 + 1))


def reduced_block(scenario: Scenario, l: int) -> ReducedBlock:
    l = _check_block(scenario, l)
    lam = global_coefficients(scenario).lam
    U = closed_form_block(scenario, l)
    return ReducedBlock(l, np.eye(U.shape[0]) + U / lam)


def bounding_blocks(scenario: Scenario, l: int) -> tuple[list[TwoParamBlock], list[TwoParamBlock]]:
    """Decoupled lower/upper comparison blocks for mode l.

    Block 1 splits (after a 45-degree similarity) into a +beta and a -beta
    piece; blocks 2 <= l < n/2 split into two equal copies.  For even n the
    last block is already two-parametric and serves as both bounds.
    """
    l = _check_block(scenario, l)
    n, m = scenario.n, scenario.m
    g = global_coefficients(scenario)
    lam = g.lam
    if n == 2:
        blk = TwoParamBlock((m + 2.0) / (2.0 * lam), 3.0 * (m + 2.0) / (2.0 * lam))
        return [blk], [blk]
    if l == 1:
        beta = 3.0 * math.sqrt(m * (m + n)) / (2.0 * lam)
        lo = (g.d_check + m / 2.0) / lam
        hi = (g.d_hat + m / 2.0) / lam
        lower = [TwoParamBlock(lo, beta), TwoParamBlock(lo, -beta)]
        upper = [TwoParamBlock(hi, beta), TwoParamBlock(hi, -beta)]
        return lower, upper
    bc = block_coefficients(scenario, l)
    beta = (bc.a - bc.b) / (2.0 * lam)
    if 2 * l == n:
        blk = TwoParamBlock((bc.a + bc.b) / (2.0 * lam), beta)
        return [blk], [blk]
    lower = TwoParamBlock((bc.a + bc.b - 2.0 * bc.S) / (2.0 * lam), beta)
    upper = TwoParamBlock((bc.a + bc.b + 2.0 * bc.S) / (2.0 * lam), beta)
    return [lower, lower], [upper, upper]


def bounding_matrices(scenario: Scenario, l: int) -> tuple[np.ndarray, np.ndarray]:
    """Lower/upper comparison matrices in the same frame as ``reduced_block``."""
    l = _check_block(scenario, l)
    n, m = scenario.n, scenario.m
    g = global_coefficients(scenario)
    lam = g.lam
    if n == 2:
        R = bounding_blocks(scenario, 1)[0][0].R
        return R, R
    if l == 1:
        c = 1.5 * math.sqrt(m * (m + n))
        off = np.block([[np.zeros((2, 2)), c * N2], [c * N2, np.zeros((2, 2))]])
        lower = np.eye(4) + ((g.d_check + m / 2.0) * np.eye(4) + off) / lam
        upper = np.eye(4) + ((g.d_hat + m / 2.0) * np.eye(4) + off) / lam
        return lower, upper
    lower, upper = bounding_blocks(scenario, l)
    if 2 * l == n:
        return lower[0].R, upper[0].R
    return block_diag(lower[0].R, lower[1].R), block_diag(upper[0].R, upper[1].R)


# 45-degree similarity that splits block 1 into its +/- beta pieces
T_SPLIT = np.block([[np.eye(2), np.eye(2)], [-np.eye(2), np.eye(2)]]) / math.sqrt(2.0)


def r_e(e: float, theta):
    """Normalized inverse radius 1 / (1 + e cos theta)."""
    if not 0.0 <= e < 1.0:
        raise DomainError(f"eccentricity must lie in [0, 1), got {e!r}")
    return 1.0 / (1.0 + e * np.cos(theta))


def j_matrix(d: int) -> np.ndarray:
    """The rotation generator for a d-dimensional configuration block."""
    if d % 2:
        raise DomainError("configuration blocks have even dimension")
    return symplectic_rotation(d // 2)


def standard_j(dim: int) -> np.ndarray:
    """J = [[0, -I], [I, 0]] of size ``dim``."""
    h = dim // 2
    return np.block([[np.zeros((h, h)), -np.eye(h)], [np.eye(h), np.zeros((h, h))]])


@dataclass(frozen=True)
class CoefficientPath:
    R: np.ndarray
    e: float

    def __post_init__(self):
        R = np.asarray(self.R, dtype=float)
        if R.ndim != 2 or R.shape[0] != R.shape[1] or not np.allclose(R, R.T, atol=1e-12):
            raise DomainError("R must be a square symmetric matrix")
        if not 0.0 <= self.e < 1.0:
            raise DomainError(f"eccentricity must lie in [0, 1), got {self.e!r}")
        object.__setattr__(self, "R", R)

    @property
    def d(self) -> int:
        return self.R.shape[0]

    def B(self, theta: float) -> np.ndarray:
        d = self.d
        Jd = j_matrix(d)
        I = np.eye(d)
        return np.block([[I, -Jd], [Jd, I - r_e(self.e, theta) * self.R]])

    def JB(self, theta: float) -> np.ndarray:
        return standard_j(2 * self.d) @ self.B(theta)


def coefficient_path(block, e: float) -> CoefficientPath:
    R = block.R if hasattr(block, "R") else np.asarray(block, dtype=float)
    return CoefficientPath(R, e)


def symplectic_sum(M1: np.ndarray, M2: np.ndarray) -> np.ndarray:
    """Interleave two phase-space matrices so that the (q, p) halves stay aligned."""
    a, b = M1.shape[0] // 2, M2.shape[0] // 2
    out = np.zeros((2 * (a + b), 2 * (a + b)), dtype=np.result_type(M1, M2))
    idx1 = np.r_[0:a, a + b : 2 * a + b]
    idx2 = np.r_[a : a + b, 2 * a + b : 2 * (a + b)]
    out[np.ix_(idx1, idx1)] = M1
    out[np.ix_(idx2, idx2)] = M2
    return out


def assemble_full(scenario: Scenario) -> tuple[np.ndarray, list[tuple[int, slice]]]:
    """Block-diagonal R over all modes plus the slice occupied by each mode."""
    mats, spans, start = [], [], 0
    for l in block_ids(scenario.n):
        R = reduced_block(scenario, l).R
        mats.append(R)
        spans.append((l, slice(start, start + R.shape[0])))
        start += R.shape[0]
    return block_diag(*mats), spans


def full_B(scenario: Scenario, theta: float) -> np.ndarray:
    """Essential-part B(theta) as the symplectic sum of the per-mode B_l(theta)."""
    out = None
    for l in block_ids(scenario.n):
        Bl = coefficient_path(reduced_block(scenario, l), scenario.e).B(theta)
        out = Bl if out is None else symplectic_sum(out, Bl)
    return out


def essential_dimension(n: int) -> int:
    return 4 * ((n - 1) // 2) + 2 * (n % 2 == 0)


def limit_block(n: int, l: int) -> np.ndarray:
    """Entrywise m -> infinity limit of R_l."""
    if n == 2:
        return np.eye(2) + np.diag([2.0, -1.0])
    if l == 1:
        # basis order (v, Jv, w, Jw)
        return np.eye(4) + np.array(
            [[0.5, 0, 1.5, 0], [0, 0.5, 0, -1.5], [1.5, 0, 0.5, 0], [0, -1.5, 0, 0.5]]
        )
    if 2 * l == n:
        return np.eye(2) + np.diag([2.0, -1.0])
    return np.eye(4) + np.diag([2.0, -1.0, 2.0, -1.0])


__all__ = [
    "J2",
    "N2",
    "T_SPLIT",
    "ReducedBlock",
    "TwoParamBlock",
    "CoefficientPath",
    "reduced_block",
    "bounding_blocks",
    "bounding_matrices",
    "r_e",
    "coefficient_path",
    "assemble_full",
    "full_B",
    "symplectic_sum",
    "essential_dimension",
    "limit_block",
    "block_ids",
    "trig_sums",
]
