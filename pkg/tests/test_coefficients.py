import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gonstab.coefficients import (
    Scenario,
    block_coefficients,
    consistency_identities,
    global_coefficients,
    pairwise_distance,
    q_max,
    sigma_n,
    trig_sums,
)
from gonstab.errors import DomainError
from gonstab.reduction import build_configuration


@pytest.mark.parametrize("n,j,want", [(4, 1, 1.41421356), (6, 2, 1.73205081)])
def test_pairwise_distance_examples(n, j, want):
    assert pairwise_distance(n, j) == pytest.approx(want, abs=1e-8)


@given(st.integers(2, 60), st.data())
def test_pairwise_distance_matches_positions(n, data):
    j = data.draw(st.integers(1, n - 1))
    pos = build_configuration(n, 1.0).positions
    # ring body k sits at row k; row 0 is the centre
    assert pairwise_distance(n, j) == pytest.approx(np.linalg.norm(pos[n] - pos[j]), abs=1e-12)


@pytest.mark.parametrize("n,want", [(4, 1.9142), (8, 5.6097), (27, 29.4038)])
def test_sigma_examples(n, want):
    assert sigma_n(n) == pytest.approx(want, abs=5e-5)


def test_sigma3_closed_form():
    assert sigma_n(3) == pytest.approx(2 / math.sqrt(3), abs=1e-15)


def test_trig_sums_examples():
    P, S, Q = trig_sums(3, 1)
    assert (P, S, Q) == pytest.approx((0.144338, 0.144338, 0.0), abs=1e-6)
    assert P / 2 == pytest.approx(0.0722, abs=5e-5)
    P, S, Q = trig_sums(4, 2)
    assert (P, Q) == pytest.approx((0.478553, 0.228553), abs=1e-6)


@pytest.mark.parametrize("n", [3, 5, 8, 13, 28, 101])
def test_two_p1_identity(n):
    rep = consistency_identities(n)
    assert rep.p1_residual <= 1e-12
    P1 = trig_sums(n, 1)[0]
    assert 2 * P1 == pytest.approx(sigma_n(n) - 0.5 / math.tan(math.pi / (2 * n)), abs=1e-12)


def test_p1_n8():
    assert trig_sums(8, 1)[0] == pytest.approx(1.54804, abs=1e-5)


def test_global_examples():
    assert global_coefficients(Scenario(4, 0)).d_check == pytest.approx(0.7071, abs=5e-5)
    assert global_coefficients(Scenario(12, 0)).d_check == 6.0
    assert global_coefficients(Scenario(3, 1)).lam == pytest.approx(1.57735, abs=1e-5)


def test_block_examples():
    b = block_coefficients(Scenario(4, 0), 2)
    assert (b.a, b.b) == pytest.approx((-0.207106, 1.164214), abs=1e-6)
    b = block_coefficients(Scenario(4, 10), 2)
    assert b.a + b.b == pytest.approx(10.957107, abs=1e-6)


@settings(max_examples=60)
@given(st.integers(3, 40), st.floats(0, 1e4), st.data())
def test_block_identities(n, m, data):
    l = data.draw(st.integers(1, n // 2))
    b = block_coefficients(Scenario(n, m), l)
    assert b.a + b.b == pytest.approx(2 * b.P + m, rel=1e-12, abs=1e-12)
    assert b.b - b.a == pytest.approx(6 * b.Q - 3 * m, rel=1e-12, abs=1e-10)
    if 2 * l == n:
        assert abs(b.S) <= 1e-12


def test_q_max_range():
    assert q_max(3) == 0.0
    assert q_max(8, upper=3) <= q_max(8)


@pytest.mark.parametrize("n", range(9, 28))
def test_inequalities_hold_9_to_27(n):
    assert consistency_identities(n).inequalities_hold


def test_inequalities_fail_n8():
    assert not consistency_identities(8).inequalities_hold


def test_harmonic_sum_n28():
    assert consistency_identities(28).harmonic_sum == pytest.approx(1.0123, abs=5e-5)


@pytest.mark.parametrize("bad", [dict(n=1, m=1), dict(n=4, m=-1), dict(n=4, m=math.nan), dict(n=4, m=1, e=1.0), dict(n=2.5, m=1)])
def test_scenario_rejects(bad):
    with pytest.raises(DomainError):
        Scenario(**bad)


def test_mode_index_rejected():
    with pytest.raises(DomainError):
        trig_sums(6, 4)
    with pytest.raises(DomainError):
        pairwise_distance(5, 5)
