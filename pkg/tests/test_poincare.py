import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schottky_lax.errors import (ConvergenceCriterionViolated, IndexOutOfRange, NearPole,
                                 TailNotMet)
from schottky_lax.liealg import casimir, gl, sl
from schottky_lax.moebius import INFINITY, SchottkyData, Word, enumerate_words, loxodromic
from schottky_lax.phasespace import PhasePoint, holonomy
from schottky_lax.poincare import (TruncationPolicy, basepoint_derivative, kernel_weight,
                                   lax_series, max_length_within, poincare_kernel, r_derivative_g,
                                   r_matrix, residue_at_circle, residue_at_infinity, s_matrix,
                                   tail_estimate, xi, xi_based_at, xi_derivative_g,
                                   xi_derivative_xi)

Z = 0.4 + 1.9j
W = -0.7 - 1.3j


def brute_xi(z, p, s, length):
    """Direct word-by-word sum, independent of the vectorized engine."""
    out = np.zeros((p.n, p.n), dtype=complex)
    for w in enumerate_words(s.genus, length):
        h = holonomy(w, p)
        hi = np.linalg.inv(h)
        for i in range(s.genus):
            out += kernel_weight(w, i, z, s) * hi @ p.xi[i] @ h
    return out


def test_kernel_weight_identity_word(small):
    s, p, _ = small
    pole = s.generators[0].inverse().apply(INFINITY)
    assert abs(kernel_weight(Word(), 0, Z, s) - 1 / (Z - pole)) < 1e-15
    with pytest.raises(NearPole):
        kernel_weight(Word(), 0, pole, s)


def test_length_zero_is_sum_of_simple_poles(small2):
    s, p, t = small2
    v = xi(Z, p, s, t.fixed(0))
    poles = [g.inverse().apply(INFINITY) for g in s.generators]
    expect = sum(p.xi[i] / (Z - poles[i]) for i in range(2))
    assert np.allclose(v.value, expect, atol=1e-14)
    assert v.shells_used == 1 and not v.converged


def test_xi_matches_brute_force(small2):
    s, p, t = small2
    assert np.allclose(xi(Z, p, s, t.fixed(3)).value, brute_xi(Z, p, s, 3), atol=1e-13)


def test_zero_xi_gives_zero(small):
    s, p, t = small
    q = PhasePoint(p.g, np.zeros_like(p.xi), p.algebra)
    assert np.abs(xi(Z, q, s, t).value).max() == 0


def test_kernel_is_linear_and_sums_to_xi(small2, rng):
    s, p, t = small2
    x, y = p.algebra.random_element(rng), p.algebra.random_element(rng)
    a, b = 0.3 - 1j, 2.0
    lhs = poincare_kernel(Z, 1, a * x + b * y, p, s, t).value
    rhs = a * poincare_kernel(Z, 1, x, p, s, t).value + b * poincare_kernel(Z, 1, y, p, s, t).value
    assert np.allclose(lhs, rhs, atol=1e-13)
    total = sum(poincare_kernel(Z, i, p.xi[i], p, s, t).value for i in range(2))
    assert np.allclose(total, xi(Z, p, s, t).value, atol=1e-13)


def test_xi_derivative_xi_is_kernel_on_basis(small2):
    s, p, t = small2
    for a in range(p.algebra.dim):
        d = xi_derivative_xi(Z, 1, a, p, s, t).value
        assert np.allclose(d, poincare_kernel(Z, 1, p.algebra.basis[a], p, s, t).value)
    with pytest.raises(IndexOutOfRange):
        xi_derivative_xi(Z, 2, 0, p, s, t)
    with pytest.raises(IndexOutOfRange):
        poincare_kernel(Z, -1, p.algebra.basis[0], p, s, t)


def test_xi_derivative_g_matches_finite_difference(small2, rng):
    s, p, t = small2
    h = 1e-6
    for j in range(2):
        x = p.algebra.random_element(rng)
        an = xi_derivative_g(Z, j, x, p, s, t).value
        fd = (xi(Z, p.perturb_g(j, x, h), s, t).value - xi(Z, p.perturb_g(j, x, -h), s, t).value) / (2 * h)
        assert np.linalg.norm(an - fd) <= 1e-6 * max(1.0, np.linalg.norm(an))


def test_r_derivative_g_matches_finite_difference(small2, rng):
    s, p, t = small2
    h = 1e-6
    x = p.algebra.random_element(rng)
    an = r_derivative_g(Z, W, 1, x, p, s, t).value
    fd = (r_matrix(Z, W, p.perturb_g(1, x, h), s, t).value
          - r_matrix(Z, W, p.perturb_g(1, x, -h), s, t).value) / (2 * h)
    assert np.linalg.norm(an - fd) <= 1e-6 * max(1.0, np.linalg.norm(an))


def test_r_at_length_zero_is_casimir_pole(small2):
    s, p, t = small2
    r = r_matrix(Z, W, p, s, t.fixed(0)).value
    assert np.allclose(r, casimir(sl(2)) / (Z - W), atol=1e-14)
    q = PhasePoint(np.array([np.eye(2)] * 2), np.zeros((2, 2, 2)), gl(2))
    assert np.allclose(r_matrix(Z, W, q, s, t.fixed(0)).value, casimir(gl(2)) / (Z - W), atol=1e-14)


def test_s_matrix_swaps_roles_of_r(small2):
    """s(z, w) for the identity word is P / (z - w) as well."""
    s, p, t = small2
    assert np.allclose(s_matrix(Z, W, p, s, t.fixed(0)).value, casimir(sl(2)) / (Z - W), atol=1e-14)


def test_residue_of_r_at_infinity_is_minus_casimir(small):
    s, p, t = small
    eng = lax_series(s, p, t)
    res = residue_at_infinity(lambda z: eng.r_matrix(z, np.full(z.shape, W)).value, 30.0)
    assert np.allclose(res, -casimir(gl(2)), atol=1e-9)


def test_residue_round_trip_recovers_xi(small):
    s, p, t = small
    eng = lax_series(s, p, t)
    got = residue_at_circle(0, lambda z: eng.xi(z).value, s)
    assert np.allclose(got, p.xi[0], atol=1e-9)


def test_residue_at_infinity_is_moment_map(small):
    from schottky_lax.phasespace import moment_map
    s, p, t = small
    eng = lax_series(s, p, t)
    got = residue_at_infinity(lambda z: eng.xi(z).value, 30.0)
    assert np.allclose(got, moment_map(p), atol=1e-9)


def test_basepoint_series_derivative(small, rng):
    s, p, t = small
    z0 = 3.0 + 0.5j
    h = 1e-5
    an = basepoint_derivative(Z, z0, p, s, t).value
    fd = (xi_based_at(Z, z0 + h, p, s, t).value - xi_based_at(Z, z0 - h, p, s, t).value) / (2 * h)
    assert np.linalg.norm(an - fd) <= 1e-6 * max(1.0, np.linalg.norm(an))


def test_tail_estimate_rules():
    assert tail_estimate([1.0])[0] == np.inf
    tail, r = tail_estimate([1.0, 0.5, 0.25])
    assert r == 0.5 and tail == 0.25
    assert tail_estimate([1.0, 2.0])[0] == np.inf
    assert tail_estimate([0.0, 0.0]) == (0.0, 0.0)


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(1e-8, 1e3), min_size=2, max_size=8))
def test_tail_estimate_nonnegative_and_geometric(norms):
    tail, r = tail_estimate(norms)
    assert tail >= 0
    if r < 1:
        assert tail == pytest.approx(norms[-1] * r / (1 - r))


def test_converged_series_meets_target(small):
    s, p, t = small
    v = xi(Z, p, s, t)
    assert v.converged and v.tail_estimate <= t.target_tail
    assert v.measured_ratio < 1 and len(v.shell_norms) == v.shells_used
    assert all(b <= a for a, b in zip(v.shell_norms[1:], v.shell_norms[2:]))


def test_capacity_limits_length():
    assert max_length_within(2, 40, 400_000) == 11
    assert max_length_within(1, 3, 10) == 3


def test_convergence_criterion_violated():
    s = SchottkyData.from_generators([loxodromic(1, -1, 0.5)])
    p = PhasePoint(np.array([np.diag([3.0, 1 / 3])]), np.zeros((1, 2, 2)), gl(2))
    with pytest.raises(ConvergenceCriterionViolated):
        xi(Z, p, s)


def test_tail_not_met_when_capped(small2):
    s, p, _ = small2
    with pytest.raises(TailNotMet):
        xi(Z, p, s, TruncationPolicy(target_tail=1e-30, capacity=50))


def test_near_pole(small):
    s, p, t = small
    with pytest.raises(NearPole):
        xi(s.pole_points[0], p, s, t)


def test_genus_mismatch(small, small2):
    with pytest.raises(ValueError):
        lax_series(small[0], small2[1], small[2])


def test_policy_round_trip_and_validation():
    t = TruncationPolicy(12, 1e-9, 1000, 1e-7)
    assert TruncationPolicy.from_json(t.to_json()) == t
    assert t.fixed(3).max_word_length == 3 and t.fixed(3).target_tail == 0
    assert TruncationPolicy(target_tail=1e-9).derivative_target == pytest.approx(1e-8)
    with pytest.raises(ValueError):
        TruncationPolicy(max_word_length=-1)
