import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gonstab.errors import CollisionError, DomainError, VerificationFailure
from gonstab.reduction import (
    GonConfiguration,
    build_basis,
    build_configuration,
    central_configuration_residual,
    potential_gradient,
    potential_hessian,
    reduce_and_verify,
    shift_symmetry,
    symplectic_rotation,
)


@pytest.mark.parametrize("n,m", [(3, 0.0722), (8, 100.0), (2, 0.0), (12, 1e6)])
def test_central_configuration(n, m):
    assert central_configuration_residual(build_configuration(n, m)) <= 1e-9


def test_hessian_matches_finite_differences():
    cfg = build_configuration(5, 1.0)
    H = potential_hessian(cfg)
    x0, h = cfg.flat, 1e-5
    fd = np.empty_like(H)
    for i in range(x0.size):
        xp, xm = x0.copy(), x0.copy()
        xp[i] += h
        xm[i] -= h
        gp = potential_gradient(xp.reshape(-1, 2), cfg.masses).reshape(-1)
        gm = potential_gradient(xm.reshape(-1, 2), cfg.masses).reshape(-1)
        fd[:, i] = (gp - gm) / (2 * h)
    assert np.max(np.abs(fd - H)) <= 1e-6
    assert np.allclose(H, H.T, atol=1e-14)


def test_collision_detected():
    pos = np.array([[0.0, 0.0], [1.0, 0.0], [1.0, 0.0]])
    with pytest.raises(CollisionError):
        potential_hessian(GonConfiguration(2, 1.0, pos, np.ones(3)))


@pytest.mark.parametrize("n,m", [(4, 1.0), (5, 2.0), (6, 0.3), (9, 50.0)])
def test_basis_identities(n, m):
    basis = build_basis(n, m)
    M = build_configuration(n, m).mass_matrix
    A = basis.A
    Jn = symplectic_rotation(n + 1)
    assert np.max(np.abs(A.T @ M @ A - np.eye(A.shape[1]))) <= 1e-10
    assert np.max(np.abs(A @ Jn - Jn @ A)) <= 1e-10


def test_basis_needs_positive_mass():
    with pytest.raises(DomainError):
        build_basis(4, 0.0)


@pytest.mark.parametrize("n,m,blocks", [(2, 0.3, {"kep", 1}), (4, 1.0, {"kep", 1, 2}), (7, 0.5, {"kep", 1, 2, 3})])
def test_reduce_examples(n, m, blocks):
    rep = reduce_and_verify(n, m)
    assert set(rep.closed_form_residual) == blocks
    assert max(rep.closed_form_residual.values()) <= 1e-9


@settings(max_examples=25, deadline=None)
@given(st.integers(2, 16), st.floats(1e-3, 1e4))
def test_reduction_property(n, m):
    rep = reduce_and_verify(n, m, raise_on_failure=False)
    assert rep.off_block_residual <= 1e-9
    assert rep.worst()[1] <= 1e-9


def test_hessian_commutes_with_shift():
    cfg = build_configuration(7, 2.0)
    H = potential_hessian(cfg)
    S = shift_symmetry(7)
    assert np.max(np.abs(S @ H - H @ S)) <= 1e-12
    assert np.allclose(S.T @ S, np.eye(S.shape[0]))


def test_failure_carries_residual(monkeypatch):
    import gonstab.reduction as red

    monkeypatch.setattr(red, "closed_form_block", lambda scen, l: np.zeros((2, 2)) if l in (0,) or 2 * l == scen.n else np.zeros((4, 4)))
    with pytest.raises(VerificationFailure) as info:
        red.reduce_and_verify(4, 1.0)
    assert info.value.residual > 1e-9
    assert info.value.block in ("kep", 1, 2)
