import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from bellframe.bell import (
    LOCAL_BOUND,
    QUANTUM_BOUND,
    SettingQuad,
    best_quad_indices,
    chsh_value,
    correlation_grid,
    optimize_settings,
    per_trial_value,
    quantum_chsh,
)
from bellframe.qstate import correlation, make_state

SX = np.array([[0, 1], [1, 0]], dtype=complex)
SZ = np.array([[1, 0], [0, -1]], dtype=complex)


def horodecki_max(state):
    """Largest |S| over settings in the x-z plane: 2 * norm of the 2x2 correlation tensor."""
    psi = state.amplitudes
    ops = (SZ, SX)
    t = np.array([[np.real(psi.conj() @ np.kron(p, q) @ psi) for q in ops] for p in ops])
    return 2.0 * math.sqrt(float(np.sum(np.linalg.svd(t, compute_uv=False) ** 2)))


def test_algebraic_maximum():
    assert chsh_value(1, 1, 1, -1).s == 4


def test_quantum_values_flag_violation():
    r = chsh_value(-0.70711, -0.70711, -0.70711, 0.70711)
    # inputs are rounded to 5 decimals, so allow 4 * 5e-6
    assert r.s == pytest.approx(-2.82843, abs=2e-5)
    assert r.violates_local


def test_zero_correlations():
    r = chsh_value(0, 0, 0, 0)
    assert r.s == 0 and not r.violates_local


def test_out_of_range_correlation_rejected():
    with pytest.raises(ValueError):
        chsh_value(1.5, 0, 0, 0)


def test_z_score():
    r = chsh_value(-0.7, -0.7, -0.7, 0.7, stderr=0.1)
    assert r.z_score == pytest.approx((2.8 - 2.0) / 0.1)
    assert chsh_value(0, 0, 0, 0).z_score is None


@pytest.mark.parametrize("values", list(itertools.product((1, -1), repeat=4)))
def test_per_trial_value_is_two(values):
    assert abs(per_trial_value(*values)) == 2


def test_per_trial_examples():
    assert per_trial_value(1, 1, 1, 1) == 2
    assert per_trial_value(1, 1, 1, -1) == 2
    assert per_trial_value(-1, 1, 1, 1) == -2


def test_per_trial_rejects_zero():
    with pytest.raises(ValueError):
        per_trial_value(0, 1, 1, 1)


def test_singlet_optimal_quad(optimal_quad):
    assert quantum_chsh(make_state("singlet"), optimal_quad).s == pytest.approx(-2.82843, abs=1e-5)


def test_singlet_all_zero_quad():
    assert quantum_chsh(make_state("singlet"), SettingQuad(0, 0, 0, 0)).s == pytest.approx(-2.0)


def test_quad_canonicalizes():
    q = SettingQuad(0.0, 0.0, -math.pi / 4, 2 * math.pi + 0.1)
    assert q.b == pytest.approx(7 * math.pi / 4)
    assert q.b_prime == pytest.approx(0.1)


def test_correlation_grid_matches_pointwise():
    s = make_state("raw", (0.3, 1j, -0.5, 0.2))
    grid = np.linspace(0, 2 * math.pi, 7)
    e = correlation_grid(s, grid, grid[:5])
    for i, a in enumerate(grid):
        for j, b in enumerate(grid[:5]):
            assert e[i, j] == pytest.approx(correlation(s, a, b), abs=1e-12)


def test_best_quad_matches_brute_force():
    rng = np.random.default_rng(3)
    e = rng.uniform(-1, 1, (5, 5))
    best = max(abs(e[a, b] + e[a, bp] + e[ap, b] - e[ap, bp])
               for a, ap, b, bp in itertools.product(range(5), repeat=4))
    idx, val = best_quad_indices(e)
    a, ap, b, bp = idx
    assert val == pytest.approx(best)
    assert abs(e[a, b] + e[a, bp] + e[ap, b] - e[ap, bp]) == pytest.approx(best)


def test_optimize_singlet():
    quad, res = optimize_settings(make_state("singlet"), 64)
    assert res.abs_s == pytest.approx(2.82843, abs=1e-4)
    assert quantum_chsh(make_state("singlet"), quad).abs_s == pytest.approx(res.abs_s)


def test_optimize_product_state():
    _, res = optimize_settings(make_state("raw", (1, 0, 0, 0)), 64)
    assert res.abs_s <= LOCAL_BOUND + 1e-9
    assert not res.violates_local


def test_optimize_partially_entangled():
    s = make_state("raw", (0, 1, -0.5, 0))
    _, res = optimize_settings(s, 64)
    assert res.abs_s > 2
    assert res.abs_s == pytest.approx(horodecki_max(s), abs=1e-6)


def test_resolution_floor():
    with pytest.raises(ValueError):
        optimize_settings(make_state("singlet"), 4)


real = st.floats(-1, 1, allow_nan=False)
angle = st.floats(0, 2 * math.pi, allow_nan=False)


@settings(max_examples=150, deadline=None)
@given(z=st.lists(real, min_size=8, max_size=8).filter(lambda z: sum(x * x for x in z) > 1e-3),
       q=st.tuples(angle, angle, angle, angle))
def test_quantum_ceiling(z, q):
    s = make_state("raw", [complex(z[i], z[i + 4]) for i in range(4)])
    assert quantum_chsh(s, SettingQuad(*q)).abs_s <= QUANTUM_BOUND + 1e-9


@settings(max_examples=100, deadline=None)
@given(a=st.tuples(real, real), b=st.tuples(real, real), q=st.tuples(angle, angle, angle, angle))
def test_product_states_never_violate(a, b, q):
    if min(a[0] ** 2 + a[1] ** 2, b[0] ** 2 + b[1] ** 2) < 1e-3:
        return
    s = make_state("raw", np.kron(a, b))
    assert quantum_chsh(s, SettingQuad(*q)).abs_s <= LOCAL_BOUND + 1e-9


@pytest.mark.parametrize("z", [(0.2, 0.9, -0.3, 0.1), (1, 0, 0, 0.4), (0.5, -0.5, 0.5, 0.5)])
def test_optimizer_reaches_horodecki_value(z):
    s = make_state("raw", z)
    _, res = optimize_settings(s, 32)
    assert res.abs_s == pytest.approx(max(horodecki_max(s), 2.0), abs=1e-6)
