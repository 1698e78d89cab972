"""Monodromy matrices, Floquet multipliers, Krein signatures and verdicts."""
from __future__ import annotations

import cmath
import math
from dataclasses import dataclass, field
from enum import Enum

import numpy as np
from scipy.integrate import solve_ivp
from scipy.linalg import expm

from .blocks import CoefficientPath, block_ids, coefficient_path, reduced_block, standard_j
from .coefficients import Scenario
from .errors import DomainError, IntegrationFailure

TOL_CIRCLE = 1e-7
TOL_SEMISIMPLE = 1e-9
CLUSTER_TOL = 1e-7
E_CAP = 0.99
# scipy clamps rtol below 100 * eps
SOLVER_RTOL_FLOOR = 100.0 * np.finfo(float).eps * 1.05


class Verdict(str, Enum):
    LINEARLY_STABLE = "LinearlyStable"
    SPECTRALLY_STABLE = "SpectrallyStableNotLinearlyStable"
    HYPERBOLIC = "Hyperbolic"
    MIXED = "Mixed"
    ON_BOUNDARY = "OnBoundary"


@dataclass(frozen=True)
class KreinDatum:
    multiplier: complex
    signature: tuple[int, int]  # (positive, negative)

    @property
    def definite(self) -> bool:
        return self.signature[0] * self.signature[1] == 0


@dataclass
class MonodromyReport:
    gamma_2pi: np.ndarray
    multipliers: np.ndarray
    symplectic_residual: float
    rel_tol: float
    nfev: int = 0
    verdict: Verdict | None = None
    krein: list = field(default_factory=list)

    @property
    def dim(self) -> int:
        return self.gamma_2pi.shape[0]

    @property
    def residual_budget(self) -> float:
        # rounding alone contributes eps * |gamma|^2, so the budget scales with it
        return 100.0 * self.rel_tol * max(1.0, float(np.linalg.norm(self.gamma_2pi, 2))) ** 2

    @property
    def within_budget(self) -> bool:
        return self.symplectic_residual <= self.residual_budget

    @property
    def max_log_multiplier(self) -> float:
        return float(np.max(np.abs(np.log(np.abs(self.multipliers)))))

    def to_dict(self) -> dict:
        return {
            "multipliers": [
                {"re": float(z.real), "im": float(z.imag), "abs": float(abs(z))} for z in self.multipliers
            ],
            "symplectic_residual": self.symplectic_residual,
            "det_residual": abs(float(np.linalg.det(self.gamma_2pi)) - 1.0),
            "verdict": None if self.verdict is None else self.verdict.value,
            "krein": [
                {"re": k.multiplier.real, "im": k.multiplier.imag, "signature": list(k.signature)}
                for k in self.krein
            ],
        }


def symplectic_residual(gamma: np.ndarray) -> float:
    J = standard_j(gamma.shape[0])
    return float(np.max(np.abs(gamma.T @ J @ gamma - J)))


def integrate_monodromy(path: CoefficientPath, rel_tol: float = 1e-11) -> MonodromyReport:
    """Integrate gamma' = J B(theta) gamma over [0, 2pi] from the identity.

    ``rel_tol`` is the target for the end point.  The embedded pair runs a
    decade tighter (floored at scipy's limit) because local errors accumulate.
    """
    if not 1e-13 <= rel_tol <= 1e-6:
        raise DomainError(f"rel_tol must lie in [1e-13, 1e-6], got {rel_tol!r}")
    d = path.d
    dim = 2 * d
    # J B(theta) = C0 + r_e(theta) C1, both constant
    J = standard_j(dim)
    D = np.zeros((dim, dim))
    D[d:, d:] = -path.R
    C1 = J @ D
    C0 = path.JB(0.0) - C1 / (1.0 + path.e)
    e = path.e

    def rhs(theta, y):
        r = 1.0 / (1.0 + e * math.cos(theta))
        Y = y.reshape(dim, dim)
        return ((C0 + r * C1) @ Y).ravel()

    try:
        sol = solve_ivp(
            rhs,
            (0.0, 2.0 * math.pi),
            np.eye(dim).ravel(),
            method="DOP853",
            rtol=max(rel_tol / 10.0, SOLVER_RTOL_FLOOR),
            atol=rel_tol / 10.0,
        )
    except (ValueError, FloatingPointError) as exc:  # pragma: no cover - scipy internals
        raise IntegrationFailure(str(exc)) from exc
    if sol.status != 0:
        raise IntegrationFailure(f"step control failed: {sol.message}")
    gamma = sol.y[:, -1].reshape(dim, dim)
    return MonodromyReport(
        gamma_2pi=gamma,
        multipliers=np.linalg.eigvals(gamma),
        symplectic_residual=symplectic_residual(gamma),
        rel_tol=rel_tol,
        nfev=int(sol.nfev),
    )


def exact_e0_monodromy(path: CoefficientPath) -> np.ndarray:
    """exp(2 pi J B), exact when the path is theta-independent."""
    if path.e != 0.0:
        raise DomainError("the exponential formula needs e = 0")
    return expm(2.0 * math.pi * path.JB(0.0))


def e0_spectrum(alpha: float, beta: float) -> np.ndarray:
    """Eigenvalues of J B for the two-parameter block at e = 0."""
    if alpha < 0 or beta < 0:
        raise DomainError("alpha and beta must be nonnegative")
    root = cmath.sqrt(beta * beta - 4.0 * alpha)
    out = []
    for s in (1.0, -1.0):
        w = cmath.sqrt(alpha - 1.0 + s * root)
        out.extend([w, -w])
    return np.array(out, dtype=complex)


# -- characteristic polynomial cross-check ---------------------------------


def faddeev_leverrier(A: np.ndarray) -> np.ndarray:
    """Coefficients c_0..c_n of det(lambda I - A), leading coefficient first."""
    n = A.shape[0]
    coeffs = np.zeros(n + 1, dtype=np.result_type(A, float))
    coeffs[0] = 1.0
    M = np.zeros_like(A, dtype=coeffs.dtype)
    I = np.eye(n)
    for k in range(1, n + 1):
        M = A @ M + coeffs[k - 1] * I
        coeffs[k] = -np.trace(A @ M) / k
    return coeffs


def _polish(coeffs, z, steps=2):
    dp = np.polyder(coeffs)
    for _ in range(steps):
        dv = np.polyval(dp, z)
        if dv == 0:
            break
        z = z - np.polyval(coeffs, z) / dv
    return z


def charpoly_multipliers(gamma: np.ndarray) -> np.ndarray:
    """Roots of the characteristic polynomial with one Newton polish each."""
    c = faddeev_leverrier(gamma)
    return np.array([_polish(c, z, 1) for z in np.roots(c)])


def reciprocal_multipliers(gamma: np.ndarray) -> np.ndarray:
    """Multipliers of a 4x4 symplectic matrix via mu = lambda + 1/lambda."""
    if gamma.shape != (4, 4):
        raise DomainError("the reciprocal reduction is implemented for 4x4 blocks")
    c = faddeev_leverrier(gamma)
    # palindromic: l^4 + c1 l^3 + c2 l^2 + c1 l + 1  ->  mu^2 + c1 mu + (c2 - 2)
    c1 = 0.5 * (c[1] + c[3])
    c2 = c[2]
    disc = cmath.sqrt(c1 * c1 - 4.0 * (c2 - 2.0))
    out = []
    for mu in ((-c1 + disc) / 2.0, (-c1 - disc) / 2.0):
        s = cmath.sqrt(mu * mu - 4.0)
        out.extend([(mu + s) / 2.0, (mu - s) / 2.0])
    return np.array(out, dtype=complex)


def match_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Largest distance in the optimal pairing of two small multisets."""
    from scipy.optimize import linear_sum_assignment

    cost = np.abs(np.asarray(a)[:, None] - np.asarray(b)[None, :])
    r, c = linear_sum_assignment(cost)
    return float(cost[r, c].max())


# -- classification -------------------------------------------------------


def cluster(values: np.ndarray, tol: float = CLUSTER_TOL) -> list[list[int]]:
    """Group indices of values closer than tol * max(1, |z|) (single linkage)."""
    n = len(values)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    for i in range(n):
        for j in range(i + 1, n):
            if abs(values[i] - values[j]) <= tol * max(1.0, abs(values[i])):
                parent[find(i)] = find(j)
    groups: dict[int, list[int]] = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return list(groups.values())


def kernel_dimension(gamma: np.ndarray, omega: complex, tol: float | None = None) -> int:
    """dim ker(gamma - omega I) by an SVD rank test."""
    if tol is None:
        tol = TOL_SEMISIMPLE * max(1.0, np.linalg.norm(gamma, 2))
    s = np.linalg.svd(gamma - omega * np.eye(gamma.shape[0]), compute_uv=False)
    return int(np.sum(s <= tol))


def krein_signature(gamma: np.ndarray, vectors: np.ndarray) -> tuple[int, int]:
    """Inertia of <-iJ xi, xi> restricted to span(vectors)."""
    dim = gamma.shape[0]
    U, sv, _ = np.linalg.svd(vectors, full_matrices=False)
    V = U[:, sv > 1e-8 * sv[0]]
    J = standard_j(dim)
    H = V.conj().T @ (-1j * J) @ V
    w = np.linalg.eigvalsh(0.5 * (H + H.conj().T))
    scale = max(1e-300, float(np.max(np.abs(w))))
    return int(np.sum(w > 1e-8 * scale)), int(np.sum(w < -1e-8 * scale))


def classify(
    report: MonodromyReport,
    tol_circle: float = TOL_CIRCLE,
    tol_semisimple: float | None = None,
) -> tuple[Verdict, list[KreinDatum]]:
    gamma = report.gamma_2pi
    lam, vecs = np.linalg.eig(gamma)
    gnorm = max(1.0, float(np.linalg.norm(gamma, 2)))
    if tol_semisimple is None:
        tol_semisimple = TOL_SEMISIMPLE * gnorm
    on_circle = np.abs(np.abs(lam) - 1.0) <= tol_circle

    near_pm1 = bool(np.any(np.minimum(np.abs(lam - 1.0), np.abs(lam + 1.0)) <= tol_circle))
    # Jordan blocks at +-1 split by ~sqrt(eps); a rank test at the integration
    # error scale still sees them without flagging near-degenerate stable cases
    guard = max(report.rel_tol, np.finfo(float).eps) * gnorm
    near_pm1 |= kernel_dimension(gamma, 1.0, guard) > 0
    near_pm1 |= kernel_dimension(gamma, -1.0, guard) > 0

    krein = []
    semisimple = True
    for idx in cluster(lam):
        z = complex(np.mean(lam[idx]))
        if len(idx) > 1 and kernel_dimension(gamma, z, tol_semisimple) < len(idx):
            semisimple = False
        if np.all(on_circle[idx]) and z.imag >= -tol_circle:
            krein.append(KreinDatum(z, krein_signature(gamma, vecs[:, idx])))

    if not np.any(on_circle):
        verdict = Verdict.HYPERBOLIC
    elif near_pm1:
        verdict = Verdict.ON_BOUNDARY
    elif np.all(on_circle):
        verdict = Verdict.LINEARLY_STABLE if semisimple else Verdict.SPECTRALLY_STABLE
    else:
        verdict = Verdict.MIXED
    report.verdict = verdict
    report.krein = krein
    return verdict, krein


@dataclass
class GonVerdict:
    scenario: Scenario
    blocks: dict  # l -> MonodromyReport
    overall: str

    def to_dict(self) -> dict:
        return {
            "n": self.scenario.n,
            "m": self.scenario.m,
            "e": self.scenario.e,
            "overall": self.overall,
            "blocks": {str(l): r.to_dict() for l, r in self.blocks.items()},
        }


def overall_verdict(verdicts) -> str:
    verdicts = list(verdicts)
    if all(v is Verdict.LINEARLY_STABLE for v in verdicts):
        return "LinearlyStable"
    if all(v is Verdict.HYPERBOLIC for v in verdicts):
        return "Hyperbolic"
    if any(v in (Verdict.HYPERBOLIC, Verdict.MIXED) for v in verdicts):
        return "Unstable"
    return "Degenerate"


def block_report(scenario: Scenario, l: int, rel_tol: float = 1e-11) -> MonodromyReport:
    path = coefficient_path(reduced_block(scenario, l), scenario.e)
    try:
        rep = integrate_monodromy(path, rel_tol)
    except IntegrationFailure as exc:
        raise IntegrationFailure(str(exc), block=l) from exc
    classify(rep)
    return rep


def gon_verdict(scenario: Scenario, rel_tol: float = 1e-11, blocks=None) -> GonVerdict:
    ids = block_ids(scenario.n) if blocks is None else list(blocks)
    reports = {l: block_report(scenario, l, rel_tol) for l in ids}
    return GonVerdict(scenario, reports, overall_verdict(r.verdict for r in reports.values()))
