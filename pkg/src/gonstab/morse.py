"""Omega-Morse indices of A(R, e) = -d2/dtheta2 - 2 J d/dtheta + r_e(theta) R.

Discretization: Floquet-Fourier Galerkin in the basis exp(i (k + rho) theta),
k = -K..K.  Multiplication by r_e is exact in this basis up to truncation
because r_e has the geometric Fourier series c_k = (-b)^|k| / sqrt(1 - e^2).
"""
from __future__ import annotations

import cmath
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh, ldl, toeplitz

from .blocks import (
    T_SPLIT,
    TwoParamBlock,
    bounding_blocks,
    bounding_matrices,
    j_matrix,
    reduced_block,
)
from .coefficients import Scenario, sigma_n, trig_sums
from .errors import ConvergenceFailure, DomainError, PropertyViolation

K_DEFAULT = 64
RHO_GRID_DEFAULT = 64
NULL_REL = 1e-8


@dataclass(frozen=True)
class BoundaryTwist:
    rho: float

    def __post_init__(self):
        r = float(self.rho) % 1.0
        if r > 1.0 - 1e-15:
            r = 0.0
        object.__setattr__(self, "rho", r)

    @property
    def omega(self) -> complex:
        return cmath.exp(2j * math.pi * self.rho)

    @classmethod
    def from_omega(cls, omega: complex) -> "BoundaryTwist":
        omega = complex(omega)
        if abs(abs(omega) - 1.0) > 1e-12:
            raise DomainError(f"omega must lie on the unit circle, got {omega!r}")
        return cls(cmath.phase(omega) / (2.0 * math.pi))

    @property
    def centered_rho(self) -> float:
        # shifting rho by an integer relabels modes; centring keeps the window symmetric
        return self.rho - 1.0 if self.rho > 0.5 else self.rho


ONE = BoundaryTwist(0.0)
MINUS_ONE = BoundaryTwist(0.5)


def as_twist(w) -> BoundaryTwist:
    if isinstance(w, BoundaryTwist):
        return w
    return BoundaryTwist.from_omega(w)


@dataclass(frozen=True)
class IndexResult:
    phi: int
    nu: int
    min_eig: float
    K: int
    converged: bool
    eps_null: float = 0.0


def re_fourier_coefficients(e: float, K: int) -> np.ndarray:
    """c_0 .. c_{2K} of r_e(theta) = 1 / (1 + e cos theta)."""
    if not 0.0 <= e < 1.0:
        raise DomainError(f"eccentricity must lie in [0, 1), got {e!r}")
    k = np.arange(2 * K + 1)
    if e == 0.0:
        return (k == 0).astype(float)
    s = math.sqrt(1.0 - e * e)
    b = e / (1.0 + s)  # = (1 - s) / e without cancellation
    return (-b) ** k / s


def _as_R(R) -> np.ndarray:
    if isinstance(R, TwoParamBlock) or hasattr(R, "R"):
        R = R.R
    R = np.asarray(R, dtype=float)
    if R.ndim != 2 or R.shape[0] != R.shape[1] or R.shape[0] % 2:
        raise DomainError("R must be a square matrix of even size")
    if not np.allclose(R, R.T, rtol=0, atol=1e-12):
        raise DomainError("R must be symmetric")
    return R


def assemble_hermitian(R, e: float, twist, K: int = K_DEFAULT, orientation: int = 1) -> np.ndarray:
    """Galerkin matrix; ``orientation=-1`` flips J (only the self-test uses it)."""
    R = _as_R(R)
    twist = as_twist(twist)
    if K < 8:
        raise DomainError("K must be at least 8")
    d = R.shape[0]
    Jd = orientation * j_matrix(d)
    c = re_fourier_coefficients(e, K)
    H = np.kron(toeplitz(c), R).astype(complex)
    s = np.arange(-K, K + 1) + twist.centered_rho
    I = np.eye(d)
    for i, sk in enumerate(s):
        sl = slice(i * d, (i + 1) * d)
        H[sl, sl] += sk * sk * I - 2j * sk * Jd
    return H


def _eps_null(H: np.ndarray) -> float:
    return NULL_REL * (1.0 + float(np.max(np.abs(H))))


def _counts_eigh(H: np.ndarray, eps: float):
    low = eigh(H, eigvals_only=True, subset_by_value=(-np.inf, eps), driver="evr")
    if low.size:
        mn = float(low[0])
    else:
        mn = float(eigh(H, eigvals_only=True, subset_by_index=(0, 0))[0])
    return int(np.sum(low < -eps)), int(np.sum(np.abs(low) <= eps)), mn


def inertia_below(H: np.ndarray, shift: float) -> int:
    """Number of eigenvalues of H below ``shift`` via an LDL^H factorization."""
    _, D, _ = ldl(H - shift * np.eye(H.shape[0]), hermitian=True)
    count = 0
    i, n = 0, D.shape[0]
    while i < n:
        if i + 1 < n and abs(D[i + 1, i]) > 0:
            w = np.linalg.eigvalsh(D[i : i + 2, i : i + 2])
            count += int(np.sum(w < 0))
            i += 2
        else:
            count += int(D[i, i].real < 0)
            i += 1
    return count


def _counts_ldl(H: np.ndarray, eps: float):
    below = inertia_below(H, -eps)
    return below, inertia_below(H, eps) - below, float("nan")


BACKENDS = {"eigh": _counts_eigh, "ldl": _counts_ldl}


def index_and_nullity(R, e: float, twist=ONE, K: int = K_DEFAULT, backend: str = "eigh") -> IndexResult:
    """phi and nu of the discretized operator, checked under K -> 2K (-> 4K).

    The null threshold is fixed from the matrix at the base K.  Recomputing it
    at 2K would quadruple it (|H|_max grows like K^2) and could swallow small
    genuine eigenvalues that are already converged.
    """
    if backend not in BACKENDS:
        raise DomainError(f"unknown backend {backend!r}")
    twist = as_twist(twist)
    count = BACKENDS[backend]
    H = assemble_hermitian(R, e, twist, K)
    eps = _eps_null(H)
    a = count(H, eps)
    b = count(assemble_hermitian(R, e, twist, 2 * K), eps)
    if a[:2] == b[:2]:
        return IndexResult(a[0], a[1], a[2], K, True, eps)
    c = count(assemble_hermitian(R, e, twist, 4 * K), eps)
    if b[:2] == c[:2]:
        return IndexResult(b[0], b[1], b[2], 2 * K, True, eps)
    raise ConvergenceFailure(
        f"index counts differ at K={K}, {2 * K}, {4 * K}: {a[:2]}, {b[:2]}, {c[:2]}"
    )


def min_eigenvalue(R, e: float, twist, K: int = K_DEFAULT) -> tuple[float, float]:
    H = assemble_hermitian(R, e, twist, K)
    return float(eigh(H, eigvals_only=True, subset_by_index=(0, 0))[0]), _eps_null(H)


@dataclass(frozen=True)
class PositivityCertificate:
    """Sampled-certificate: positivity on a finite rho grid, not a proof."""

    is_positive_all_omega: bool
    min_margin: float
    worst_rho: float
    n_samples: int
    label: str = "sampled-certificate"


def rho_samples(grid_size: int) -> np.ndarray:
    """rho in {0, 1/2} and a uniform grid, folded onto [0, 1/2].

    A(R, e) is real, so the spectra at rho and 1 - rho coincide.
    """
    grid = np.arange(grid_size) / grid_size
    folded = np.minimum(grid, 1.0 - grid)
    return np.unique(np.concatenate([[0.0, 0.5], folded]))


def positivity_certificate(
    R, e: float, rho_grid_size: int = RHO_GRID_DEFAULT, K: int = K_DEFAULT, threads: int | None = None
) -> PositivityCertificate:
    if rho_grid_size < 16:
        raise DomainError("rho grid needs at least 16 points")
    R = _as_R(R)
    rhos = rho_samples(rho_grid_size)

    def margin(rho):
        mn, eps = min_eigenvalue(R, e, BoundaryTwist(rho), K)
        return mn - eps

    if threads and threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            margins = list(pool.map(margin, rhos))
    else:
        margins = [margin(r) for r in rhos]
    margins = np.asarray(margins)
    i = int(np.argmin(margins))  # ties resolve to the smallest rho
    return PositivityCertificate(bool(np.all(margins > 0)), float(margins[i]), float(rhos[i]), len(rhos))


# -- e = 0 degenerate curves ----------------------------------------------

CURVES = {
    "one_a": (1.0, lambda a: a + 1.0),
    "one_b": (1.0, lambda a: np.sqrt(a * a + 4.0 * a)),
    "minus_one_a": (-1.0, lambda a: np.sqrt(a * a + 2.5 * a + 9.0 / 16.0)),
    "minus_one_b": (-1.0, lambda a: np.sqrt(a * a + 6.5 * a + 25.0 / 16.0)),
}


def hyperbolic_region(alpha, beta):
    alpha = np.asarray(alpha, dtype=float)
    beta = np.asarray(beta, dtype=float)
    r = 2.0 * np.sqrt(alpha)
    return (beta < r) | ((beta >= r) & (beta < alpha + 1.0) & (alpha > 1.0))


def expected_nullity(curve: str, alpha: float) -> int:
    """Nullity on a degenerate curve at e = 0 (3 at the crossing alpha = 1/2)."""
    if curve.startswith("one"):
        if abs(alpha - 0.5) < 1e-12:
            return 3
        return 1 if curve == "one_a" else 2
    return 2


@dataclass
class DegenerateCurves:
    alpha: np.ndarray
    values: dict  # curve id -> beta array
    nullity: dict  # curve id -> computed nu at e = 0
    expected: dict
    hyperbolic: dict = field(default_factory=dict)

    @property
    def all_match(self) -> bool:
        return all(np.array_equal(self.nullity[c], self.expected[c]) for c in self.values)

    def rows(self):
        for c in self.values:
            for a, b, nu, ex in zip(self.alpha, self.values[c], self.nullity[c], self.expected[c]):
                yield float(a), c, float(b), bool(nu == ex)


def degenerate_curves(alpha_grid, K: int = 16) -> DegenerateCurves:
    alpha = np.asarray(alpha_grid, dtype=float)
    if np.any(alpha < 0):
        raise DomainError("alpha grid must be nonnegative")
    values, nullity, expected, hyper = {}, {}, {}, {}
    for cid, (omega, f) in CURVES.items():
        beta = f(alpha)
        values[cid] = beta
        tw = ONE if omega > 0 else MINUS_ONE
        nullity[cid] = np.array([index_and_nullity(TwoParamBlock(a, b), 0.0, tw, K).nu for a, b in zip(alpha, beta)])
        expected[cid] = np.array([expected_nullity(cid, a) for a in alpha])
        hyper[cid] = hyperbolic_region(alpha, beta)
    return DegenerateCurves(alpha, values, nullity, expected, hyper)


# -- comparison and monotonicity --------------------------------------------


@dataclass
class ComparisonReport:
    phi_upper: int
    phi_block: int
    phi_lower: int
    phi_upper_split: int
    phi_lower_split: int
    sandwich_ok: bool
    monotone_ok: bool

    @property
    def ok(self) -> bool:
        return self.sandwich_ok and self.monotone_ok


MONO_ALPHAS = (0.25, 0.5, 1.0)
MONO_BETAS = (0.5, 1.0, 1.5, 2.0)


def monotonicity_grid(e: float, twist, K: int = 32) -> np.ndarray:
    """phi on the small (alpha, beta) grid; rows alpha, columns beta."""
    return np.array(
        [[index_and_nullity(TwoParamBlock(a, b), e, twist, K).phi for b in MONO_BETAS] for a in MONO_ALPHAS]
    )


def comparison_checks(scenario: Scenario, l: int, e: float, omega=1.0, K: int = K_DEFAULT) -> ComparisonReport:
    tw = as_twist(omega)
    R = reduced_block(scenario, l).R
    lower, upper = bounding_matrices(scenario, l)
    lo_blocks, up_blocks = bounding_blocks(scenario, l)
    phi = index_and_nullity(R, e, tw, K).phi
    phi_lo = index_and_nullity(lower, e, tw, K).phi
    phi_up = index_and_nullity(upper, e, tw, K).phi
    # the decoupled pieces must add up to the coupled comparison operator
    lo_split = sum(index_and_nullity(b, e, tw, K).phi for b in lo_blocks)
    up_split = sum(index_and_nullity(b, e, tw, K).phi for b in up_blocks)
    if R.shape[0] == 2:
        lo_split, up_split = phi_lo, phi_up
    sandwich = phi_up <= phi <= phi_lo and lo_split == phi_lo and up_split == phi_up
    if not sandwich:
        raise PropertyViolation(
            "index sandwich violated",
            dict(n=scenario.n, m=scenario.m, l=l, e=e, rho=tw.rho, upper=phi_up, block=phi, lower=phi_lo,
                 lower_split=lo_split, upper_split=up_split),
        )
    grid = monotonicity_grid(e, tw)
    # nonincreasing in alpha (down the rows), nondecreasing in beta (along the columns)
    mono = bool(np.all(np.diff(grid, axis=0) <= 0) and np.all(np.diff(grid, axis=1) >= 0))
    if not mono:
        raise PropertyViolation("monotonicity violated on the spot-check grid", dict(e=e, rho=tw.rho, grid=grid.tolist()))
    return ComparisonReport(phi_up, phi, phi_lo, up_split, lo_split, sandwich, mono)


def comparison_hypothesis(alpha0, beta0, e0, alpha, beta, e) -> bool:
    """Arithmetic hypothesis under which phi(alpha, beta, e) <= phi(alpha0, beta0, e0)."""
    if not (e >= e0 and beta0 > 0):
        return False
    ratio = beta / beta0 * (1.0 + e0) / (1.0 + e)
    return ratio < 1.0 and beta * (e - e0) / (beta0 * (1.0 + e)) < alpha - beta / beta0 * alpha0


# -- the n = 8 perturbation family -------------------------------------------


def eta_family(n: int, eta: float):
    """alpha, beta, gamma of the split block-1 family, eta = 1/m."""
    s = sigma_n(n)
    P1 = trig_sums(n, 1)[0]
    den = s * eta + 2.0
    return (
        (4.0 * P1 * eta + 1.0) / den,
        3.0 * math.sqrt(1.0 + n * eta) / den,
        (n / 2.0 - 2.0 * P1) * eta / den,
    )


def eta_derivatives(n: int) -> tuple[float, float, float]:
    """Quotient-rule derivatives of (alpha, beta, gamma) at eta = 0."""
    s = sigma_n(n)
    P1 = trig_sums(n, 1)[0]
    return (8.0 * P1 - s) / 4.0, 3.0 * (n - s) / 4.0, (n / 2.0 - 2.0 * P1) / 2.0


def eta_block(n: int, eta: float) -> np.ndarray:
    """R of the split block-1 family in the decoupled frame."""
    a, b, g = eta_family(n, eta)
    N = np.diag([1.0, -1.0])
    I2 = np.eye(2)
    return (1.0 + a) * np.eye(4) + b * np.block([[-N, 0 * N], [0 * N, N]]) + g * np.block([[I2, I2], [I2, I2]])


@dataclass
class PerturbationReport:
    analytic: tuple
    fd_derivatives: tuple
    slopes: np.ndarray
    kernel_dim: int
    projected: np.ndarray | None = None


def perturbation_derivative_n8(e: float, eta_step: float = 1e-4, K: int = K_DEFAULT, count: int = 6) -> PerturbationReport:
    """Slopes of the kernel-emerging eigenvalues of the eta family at eta = 0."""
    if not 0.0 < eta_step <= 1e-3:
        raise DomainError("eta_step must lie in (0, 1e-3]")
    n = 8
    analytic = eta_derivatives(n)
    fd = tuple(
        (x1 - x0) / (2 * eta_step) for x0, x1 in zip(eta_family(n, -eta_step), eta_family(n, eta_step))
    )

    H0 = assemble_hermitian(eta_block(n, 0.0), e, ONE, K)
    H1 = assemble_hermitian(eta_block(n, eta_step), e, ONE, K)
    w0, V0 = eigh(H0, subset_by_index=(0, count - 1))
    w1 = eigh(H1, eigvals_only=True, subset_by_index=(0, count - 1))
    eps = _eps_null(H0)
    kernel = int(np.sum(np.abs(w0) <= eps))
    slopes = (w1 - w0) / eta_step
    # first-order perturbation theory on the kernel: eigenvalues of V^H H'(0) V
    dH = (assemble_hermitian(eta_block(n, eta_step), e, ONE, K) - assemble_hermitian(eta_block(n, -eta_step), e, ONE, K)) / (2 * eta_step)
    Vk = V0[:, np.abs(w0) <= eps]
    projected = np.linalg.eigvalsh(Vk.conj().T @ dH @ Vk) if Vk.shape[1] else None
    report = PerturbationReport(analytic, fd, np.sort(slopes), kernel, projected)
    if np.any(slopes <= 0):
        raise PropertyViolation("a kernel-emerging eigenvalue does not increase", report)
    return report


def split_frame_residual(n: int, m: float) -> float:
    """|T^t R_1 T - eta_block(n, 1/m)|, tying the eta family to the reduced block."""
    R1 = reduced_block(Scenario(n, m), 1).R
    return float(np.max(np.abs(T_SPLIT.T @ R1 @ T_SPLIT - eta_block(n, 1.0 / m))))


def both_readings(phi_one: int, phi_minus_one: int, n: int, block_dim: int) -> dict:
    """The two readings of the |phi_1 - phi_-1| hyperbolicity test."""
    gap = abs(phi_one - phi_minus_one)
    return {"gap": gap, "equals_n": gap == n, "equals_block_dim": gap == block_dim}


# -- orientation self-test ------------------------------------------------------


def kernel_phase_points(R, e: float, twist, K: int = K_DEFAULT, orientation: int = 1) -> np.ndarray:
    """Columns z(0) = (y' + J y, y)(0) for a basis of the discrete kernel.

    J here is always the +1 orientation used by B(theta), so a kernel computed
    with the other orientation produces phase points that the flow rejects.
    """
    R = _as_R(R)
    twist = as_twist(twist)
    d = R.shape[0]
    H = assemble_hermitian(R, e, twist, K, orientation)
    eps = _eps_null(H)
    w, V = eigh(H)
    V = V[:, np.abs(w) <= eps]
    s = np.arange(-K, K + 1) + twist.centered_rho
    coeffs = V.reshape(2 * K + 1, d, -1)
    y0 = coeffs.sum(axis=0)
    dy0 = np.einsum("k,kdj->dj", 1j * s, coeffs)
    return np.vstack([dy0 + j_matrix(d) @ y0, y0])


@dataclass
class OrientationReport:
    residual: float
    flipped_residual: float
    kernel_dim: int

    @property
    def passed(self) -> bool:
        return self.kernel_dim > 0 and self.residual <= 1e-6 and self.flipped_residual >= 1e-3


def orientation_residual(gamma: np.ndarray, Z: np.ndarray, omega: complex) -> float:
    Z = Z / np.linalg.norm(Z, axis=0, keepdims=True)
    return float(np.max(np.abs(gamma @ Z - omega * Z))) if Z.shape[1] else float("nan")


def orientation_selftest(e: float = 0.5, K: int = 32, rel_tol: float = 1e-12) -> OrientationReport:
    """Kernel functions of A must be Floquet solutions of z' = J B z.

    Index counts cannot detect the sign of J (time reversal maps one sign to
    the other), but kernel functions can.
    """
    from .blocks import coefficient_path
    from .monodromy import integrate_monodromy

    R = TwoParamBlock(0.5, 1.5).R
    gamma = integrate_monodromy(coefficient_path(R, e), rel_tol).gamma_2pi
    good = kernel_phase_points(R, e, ONE, K, +1)
    bad = kernel_phase_points(R, e, ONE, K, -1)
    return OrientationReport(
        orientation_residual(gamma, good, 1.0), orientation_residual(gamma, bad, 1.0), good.shape[1]
    )
