"""Configuration, potential Hessian and the M-orthogonal reduction basis.

State vectors are ordered ``(x_0, x_1, ..., x_n)`` with two planar
coordinates per body; body 0 is the central mass.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .coefficients import Scenario, block_coefficients, global_coefficients, sigma_n, trig_sums
from .errors import CollisionError, DomainError, VerificationFailure

J2 = np.array([[0.0, -1.0], [1.0, 0.0]])

CC_TOL = 1e-9
BASIS_TOL = 1e-10
BLOCK_TOL = 1e-9


def symplectic_rotation(k: int) -> np.ndarray:
    """Block-diagonal diag(J2, ..., J2) of size 2k."""
    return np.kron(np.eye(k), J2)


def planar_rotation(theta: float) -> np.ndarray:
    c, s = math.cos(theta), math.sin(theta)
    return np.array([[c, -s], [s, c]])


@dataclass(frozen=True)
class GonConfiguration:
    n: int
    m: float
    positions: np.ndarray  # (n+1, 2)
    masses: np.ndarray  # (n+1,)

    @property
    def mass_matrix(self) -> np.ndarray:
        return np.diag(np.repeat(self.masses, 2))

    @property
    def flat(self) -> np.ndarray:
        return self.positions.reshape(-1)


def potential_gradient(positions: np.ndarray, masses: np.ndarray) -> np.ndarray:
    """Gradient of U = sum m_i m_j / d_ij, shape (N, 2)."""
    diff = positions[None, :, :] - positions[:, None, :]  # q_j - q_i
    d = np.linalg.norm(diff, axis=-1)
    np.fill_diagonal(d, np.inf)
    w = masses[:, None] * masses[None, :] / d**3
    return np.einsum("ij,ijk->ik", w, diff)


def central_configuration_residual(config: GonConfiguration) -> float:
    lam = 0.5 * sigma_n(config.n) + config.m
    grad = potential_gradient(config.positions, config.masses)
    res = lam * config.masses[:, None] * config.positions + grad
    return float(np.max(np.linalg.norm(res, axis=1)))


def build_configuration(n: int, m: float) -> GonConfiguration:
    scen = Scenario(n, m)
    k = np.arange(1, scen.n + 1)
    th = 2.0 * np.pi * k / scen.n
    pos = np.zeros((scen.n + 1, 2))
    pos[1:, 0] = np.cos(th)
    pos[1:, 1] = np.sin(th)
    masses = np.ones(scen.n + 1)
    masses[0] = scen.m
    config = GonConfiguration(scen.n, scen.m, pos, masses)
    res = central_configuration_residual(config)
    if not res <= CC_TOL:
        raise AssertionError(f"central-configuration residual {res:.3e} exceeds {CC_TOL}")
    return config


def potential_hessian(config: GonConfiguration) -> np.ndarray:
    pos, ms = config.positions, config.masses
    N = len(ms)
    H = np.zeros((2 * N, 2 * N))
    eye = np.eye(2)
    for i in range(N):
        for j in range(i + 1, N):
            r = pos[i] - pos[j]
            d = float(np.hypot(*r))
            if d < 1e-12:
                raise CollisionError(f"bodies {i} and {j} coincide (d = {d:.3e})")
            u = r / d
            B = ms[i] * ms[j] / d**3 * (3.0 * np.outer(u, u) - eye)
            si, sj = slice(2 * i, 2 * i + 2), slice(2 * j, 2 * j + 2)
            H[si, si] += B
            H[sj, sj] += B
            H[si, sj] -= B
            H[sj, si] -= B
    return H


def shift_symmetry(n: int) -> np.ndarray:
    """The rotate-and-relabel symmetry: central body rotated by -2pi/n,
    ring coordinates cyclically shifted then rotated by -2pi/n."""
    Rinv = planar_rotation(-2.0 * math.pi / n)
    S = np.kron(np.roll(np.eye(n), 1, axis=1), np.eye(2))
    Sh = np.zeros((2 * (n + 1), 2 * (n + 1)))
    Sh[:2, :2] = Rinv
    Sh[2:, 2:] = np.kron(np.eye(n), Rinv) @ S
    return Sh


@dataclass(frozen=True)
class ReductionBasis:
    n: int
    m: float
    A: np.ndarray
    column_labels: list = field(default_factory=list)  # (block id, vector name)
    block_columns: dict = field(default_factory=dict)  # block id -> list of column indices


def _ring_vector(n, values):
    """Stack per-vertex 2-vectors (shape (n, 2)) behind a zero central entry."""
    out = np.zeros(2 * (n + 1))
    out[2:] = np.asarray(values).reshape(-1)
    return out


def build_basis(n: int, m: float) -> ReductionBasis:
    if not m > 0:
        raise DomainError("the reduction basis needs m > 0 (v-hat(1) contains -n/m)")
    n = Scenario(n, m).n
    Jn = symplectic_rotation(n + 1)
    k = np.arange(1, n + 1)
    th = 2.0 * np.pi * k / n
    radial = np.column_stack([np.cos(th), np.sin(th)])

    a = _ring_vector(n, radial)
    c_hat = np.tile([1.0, 0.0], n + 1)
    v_hat = c_hat.copy()
    v_hat[0] = -n / m
    w_hat = _ring_vector(n, np.column_stack([np.cos(2 * th), np.sin(2 * th)]))

    cols, labels, blocks = [], [], {}

    def add(block, pairs):
        idx = []
        for name, vec in pairs:
            for lab, col in ((name, vec), ("J" + name, Jn @ vec)):
                idx.append(len(cols))
                cols.append(col)
                labels.append((block, lab))
        blocks[block] = idx

    add("cen", [("c", c_hat / math.sqrt(m + n))])
    add("kep", [("a", a / math.sqrt(n))])
    v1 = ("v1", math.sqrt(m / (n * n + m * n)) * v_hat)
    # for n = 2, w-hat lies in span(c-hat, v-hat)
    add(1, [v1] if n == 2 else [v1, ("w1", w_hat / math.sqrt(n))])
    for l in range(2, (n - 1) // 2 + 1):
        v = _ring_vector(n, np.cos(th * l)[:, None] * radial)
        w = _ring_vector(n, np.sin(th * l)[:, None] * radial)
        add(l, [(f"v{l}", math.sqrt(2.0 / n) * v), (f"w{l}", math.sqrt(2.0 / n) * w)])
    if n % 2 == 0 and n >= 4:
        l = n // 2
        v = _ring_vector(n, np.cos(th * l)[:, None] * radial)
        # cos(pi*k) = +-1 here, so v'Mv = n rather than n/2
        add(l, [(f"v{l}", v / math.sqrt(n))])
    A = np.column_stack(cols)
    return ReductionBasis(n=n, m=float(m), A=A, column_labels=labels, block_columns=blocks)


def closed_form_block(scenario: Scenario, l: int) -> np.ndarray:
    """Closed-form reduced Hessian block for mode l (l = 0 gives the Kepler block)."""
    n, m = scenario.n, scenario.m
    if l == 0:
        g = global_coefficients(scenario)
        return np.diag([g.a0, g.b0])
    if l == 1:
        P1 = trig_sums(n, 1)[0]
        c = 1.5 * math.sqrt(m * (m + n))
        e1, g1 = (n + m) / 2.0, m / 2.0 + 2.0 * P1
        if n == 2:
            # collinear case: radial stretch 4(m+n)/n, tangential -2(m+n)/n
            return (m + 2.0) * np.diag([2.0, -1.0])
        return np.array(
            [
                [e1, 0.0, c, 0.0],
                [0.0, e1, 0.0, -c],
                [c, 0.0, g1, 0.0],
                [0.0, -c, 0.0, g1],
            ]
        )
    bc = block_coefficients(scenario, l)
    if 2 * l == n:
        return np.diag([bc.a, bc.b])
    a, b, S = bc.a, bc.b, bc.S
    return np.array(
        [
            [a, 0.0, 0.0, S],
            [0.0, b, -S, 0.0],
            [0.0, -S, a, 0.0],
            [S, 0.0, 0.0, b],
        ]
    )


@dataclass
class BlockDiagonalReport:
    n: int
    m: float
    blocks: dict
    off_block_residual: float
    closed_form_residual: dict
    basis_residual: float
    commute_residual: float

    def worst(self):
        blk, res = max(self.closed_form_residual.items(), key=lambda kv: kv[1])
        return blk, res

    def to_dict(self, full: bool = False) -> dict:
        out = {
            "n": self.n,
            "m": self.m,
            "basis_residual": self.basis_residual,
            "commute_residual": self.commute_residual,
            "off_block_residual": self.off_block_residual,
            "closed_form_residual": {str(k): v for k, v in self.closed_form_residual.items()},
        }
        if full:
            out["blocks"] = {str(k): v.tolist() for k, v in self.blocks.items()}
        return out


def reduce_and_verify(n: int, m: float, raise_on_failure: bool = True) -> BlockDiagonalReport:
    """Compute AᵀU''(a)A and compare its blocks with the closed forms."""
    basis = build_basis(n, m)
    config = build_configuration(basis.n, m)
    A = basis.A
    M = config.mass_matrix
    Jn = symplectic_rotation(basis.n + 1)
    basis_res = float(np.max(np.abs(A.T @ M @ A - np.eye(A.shape[1]))))
    commute_res = float(np.max(np.abs(A @ Jn - Jn @ A)))

    U = A.T @ potential_hessian(config) @ A
    mask = np.ones_like(U, dtype=bool)
    blocks = {}
    for blk, idx in basis.block_columns.items():
        ix = np.ix_(idx, idx)
        blocks[blk] = U[ix].copy()
        mask[ix] = False
    off = float(np.max(np.abs(U[mask]))) if mask.any() else 0.0

    scen = Scenario(basis.n, m)
    closed = {}
    for blk, sub in blocks.items():
        if blk == "cen":
            continue
        ref = closed_form_block(scen, 0 if blk == "kep" else blk)
        closed[blk] = float(np.max(np.abs(sub - ref)))

    report = BlockDiagonalReport(
        n=basis.n,
        m=float(m),
        blocks=blocks,
        off_block_residual=off,
        closed_form_residual=closed,
        basis_residual=basis_res,
        commute_residual=commute_res,
    )
    if raise_on_failure:
        worst_basis = max(basis_res, commute_res)
        if worst_basis > BASIS_TOL:
            raise VerificationFailure(f"basis identities off by {worst_basis:.3e}", worst_basis, "basis")
        if off > BLOCK_TOL:
            raise VerificationFailure(f"off-block residual {off:.3e}", off, "off-block")
        blk, res = report.worst()
        if res > BLOCK_TOL:
            raise VerificationFailure(f"block {blk} deviates from closed form by {res:.3e}", res, blk)
    return report
