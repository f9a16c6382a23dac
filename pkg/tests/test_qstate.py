import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellframe.qstate import (
    InvalidStateError,
    Outcome,
    collapse_after_A,
    correlation,
    eigenvector,
    joint_probability,
    joint_table,
    make_state,
    marginal_plus,
)

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def spin(theta):
    return math.cos(theta) * SZ + math.sin(theta) * SX


def pauli_correlation(amps, a, b):
    """<psi| sigma(a) x sigma(b) |psi> built from Pauli matrices only."""
    psi = np.asarray(amps, dtype=complex)
    return float(np.real(psi.conj() @ np.kron(spin(a), spin(b)) @ psi))


angles = st.floats(-10.0, 10.0, allow_nan=False)
component = st.floats(-1.0, 1.0, allow_nan=False)
amplitudes = st.lists(st.tuples(component, component), min_size=4, max_size=4).filter(
    lambda z: sum(x * x + y * y for x, y in z) > 1e-3)


def state_from(z):
    return make_state("raw", [complex(x, y) for x, y in z])


def test_singlet_amplitudes():
    s = make_state("singlet")
    np.testing.assert_allclose(s.amplitudes, [0, 0.70711, -0.70711, 0], atol=1e-5)


def test_raw_is_normalized():
    s = make_state("raw", (1, 0, 0, 1))
    np.testing.assert_allclose(s.amplitudes, [0.70711, 0, 0, 0.70711], atol=1e-5)


def test_zero_vector_rejected():
    with pytest.raises(InvalidStateError):
        make_state("raw", (0, 0, 0, 0))


def test_unknown_kind_rejected():
    with pytest.raises(InvalidStateError):
        make_state("bogus")


def test_superposition_matches_kron():
    up, down = (1, 0), (0, 1)
    s = make_state("superposition", (up, down, down, up))
    np.testing.assert_allclose(s.amplitudes, [0, 1 / math.sqrt(2), 1 / math.sqrt(2), 0])


@pytest.mark.parametrize("theta", [0.0, 0.3, math.pi / 2, 2.0, -1.1])
@pytest.mark.parametrize("outcome", [1, -1])
def test_eigenvectors_diagonalize_spin(theta, outcome):
    v = eigenvector(theta, outcome)
    np.testing.assert_allclose(spin(theta) @ v, outcome * v, atol=1e-12)


def test_equal_settings_anticorrelated():
    p = joint_probability(make_state("singlet"), 0.0, 0.0)
    assert p[1, 1] == pytest.approx(0, abs=1e-12)
    assert p[1, -1] == pytest.approx(0.5)
    assert p[-1, 1] == pytest.approx(0.5)
    assert p[-1, -1] == pytest.approx(0, abs=1e-12)


def test_orthogonal_settings_uniform():
    p = joint_probability(make_state("singlet"), 0.0, math.pi / 2)
    np.testing.assert_allclose(p.as_array(), 0.25)


def test_quarter_pi_table():
    p = joint_probability(make_state("singlet"), 0.0, math.pi / 4)
    assert p.correlation == pytest.approx(-0.70711, abs=1e-5)
    assert p[1, 1] == pytest.approx((1 - 0.70711) / 4, abs=1e-5)
    assert p[-1, -1] == pytest.approx((1 - 0.70711) / 4, abs=1e-5)


@pytest.mark.parametrize("b, expected", [(0.0, -1.0), (math.pi / 2, 0.0), (math.pi / 3, -0.5)])
def test_singlet_correlation_values(b, expected):
    assert correlation(make_state("singlet"), 0.0, b) == pytest.approx(expected, abs=1e-12)


def test_collapse_singlet_prepares_opposite_state():
    c = collapse_after_A(make_state("singlet"), 0.0, 1)
    assert c.probability == pytest.approx(0.5)
    overlap = abs(np.vdot(eigenvector(0.0, -1), c.state_b)) ** 2
    assert overlap == pytest.approx(1.0)


def test_collapse_zero_branch_is_undefined():
    c = collapse_after_A(make_state("raw", (1, 0, 0, 0)), 0.0, -1)
    assert c.probability == 0.0
    assert not c.defined


def test_collapse_then_measure_b_is_certain():
    c = collapse_after_A(make_state("singlet"), math.pi / 4, 1)
    assert c.probability == pytest.approx(0.5)
    p_minus = abs(np.vdot(eigenvector(math.pi / 4, -1), c.state_b)) ** 2
    assert p_minus == pytest.approx(1.0)


def test_no_detection_has_no_product():
    with pytest.raises(ValueError):
        Outcome.NO_DETECTION * Outcome.PLUS
    assert Outcome.PLUS * Outcome.MINUS == -1


@settings(max_examples=200, deadline=None)
@given(a=angles, b=angles)
def test_singlet_is_minus_cosine(a, b):
    assert correlation(make_state("singlet"), a, b) == pytest.approx(-math.cos(a - b), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(z=amplitudes, a=angles, b=angles)
def test_table_normalized_and_matches_pauli(z, a, b):
    s = state_from(z)
    t = joint_table(s, a, b)
    assert np.all(t >= 0)
    assert t.sum() == pytest.approx(1.0, abs=1e-12)
    assert correlation(s, a, b) == pytest.approx(pauli_correlation(s.amplitudes, a, b), abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(z=amplitudes, a=angles, b1=angles, b2=angles)
def test_no_signaling(z, a, b1, b2):
    s = state_from(z)
    p1 = joint_probability(s, a, b1).marginal_a
    p2 = joint_probability(s, a, b2).marginal_a
    assert p1 == pytest.approx(p2, abs=1e-12)
    assert p1 == pytest.approx(marginal_plus(s, a, "A"), abs=1e-12)
    q1 = joint_probability(s, b1, a).marginal_b
    q2 = joint_probability(s, b2, a).marginal_b
    assert q1 == pytest.approx(q2, abs=1e-12)


@settings(max_examples=200, deadline=None)
@given(z=amplitudes, a=angles, b=angles, oa=st.sampled_from([1, -1]), ob=st.sampled_from([1, -1]))
def test_collapse_consistent_with_joint(z, a, b, oa, ob):
    s = state_from(z)
    c = collapse_after_A(s, a, oa)
    joint = joint_probability(s, a, b)[oa, ob]
    if not c.defined:
        assert joint == pytest.approx(0.0, abs=1e-12)
        return
    cond = abs(np.vdot(eigenvector(b, ob), c.state_b)) ** 2
    assert c.probability * cond == pytest.approx(joint, abs=1e-12)
