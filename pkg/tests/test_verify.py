import json
import math

import numpy as np
import pytest

from schottky_lax import verify
from schottky_lax.moebius import Circle, fundamental_domain_points
from schottky_lax.phasespace import PhasePoint, project_to_zero_moment
from schottky_lax.poincare import lax_series


@pytest.fixture
def pts(small):
    return fundamental_domain_points(small[0], 6, np.random.default_rng(7))


def test_report_budget_is_capped_at_tolerance():
    r = verify.CheckReport("x", 0.5, 1e-6, tail_budget=10.0)
    assert r.tail_budget == 1e-6 and r.details["tailDominated"] and not r.passed
    r = verify.CheckReport("x", 1.5e-6, 1e-6, tail_budget=1e-6)
    assert r.passed and "tailDominated" not in r.details


def test_report_json_line():
    r = verify.CheckReport("x", math.inf, 1e-6, details={"z": 1 + 2j, "a": np.arange(2)})
    obj = json.loads(r.to_line())
    assert obj["pass"] is False and obj["residual"] == "inf"
    assert obj["details"]["z"] == [1.0, 2.0] and obj["details"]["a"] == [0, 1]
    assert set(obj) == {"check", "pass", "residual", "tolerance", "tailBudget", "samples",
                        "runtimeMs", "details"}


@pytest.mark.parametrize("check", [
    verify.check_convergence, verify.check_twist, verify.check_pairing, verify.check_infinity,
    verify.check_antisymmetry, verify.check_equivariance, verify.check_inhomogeneous,
])
def test_structural_checks_pass_on_small(small, check):
    s, p, t = small
    r = check(p, s, t, rng=np.random.default_rng(1)) if "rng" in check.__code__.co_varnames else check(p, s, t)
    assert r.passed, r.to_line()


def test_bracket_check(small):
    s, p, t = small
    r = verify.check_bracket(p, s, t, pairs=3, fd_pairs=1, swap_pairs=1, rng=np.random.default_rng(2))
    assert r.passed, r.to_line()


def test_bracket_defect_vanishes_both_ways(small, pts):
    s, p, t = small
    for a, b in ((pts[0], pts[1]), (pts[1], pts[0])):
        assert np.abs(verify.bracket_defect(a, b, p, s, t)).max() < 1e-8


def test_bracket_defect_detects_wrong_truncation(small, pts):
    s, p, t = small
    assert np.abs(verify.bracket_defect(pts[0], pts[1], p, s, t.fixed(1))).max() > 1e-6


def test_lemma3(small):
    s, p, t = small
    r = verify.check_lemma3_contours(p, s, t, nodes=64)
    assert r.passed, r.to_line()


def test_involution(small, pts):
    s, p, t = small
    r = verify.check_involution(pts[0], pts[1], 2, 2, p, s, t)
    assert r.passed, r.to_line()
    r = verify.check_involution(pts[2], pts[3], 1, 3, p, s, t, cross_check=False)
    assert r.passed, r.to_line()


def test_spectral_invariant_is_conjugation_invariant(small, pts):
    s, p, t = small
    v = verify.spectral_invariant(pts[0], 2, p, s, t)
    x = lax_series(s, p, t).xi(pts[0]).value[0]
    assert abs(v - np.trace(x @ x)) < 1e-12


def test_dybe(small, pts):
    s, p, t = small
    r = verify.check_dybe(pts[0], pts[1], pts[2], p, s, t)
    assert r.passed, r.to_line()
    assert r.details["jacobiConsistent"]


def test_dybe_identity_at_length_zero(small, pts):
    s, p, t = small
    r = verify.check_dybe(pts[0], pts[1], pts[2], p, s, t.fixed(0), jacobi=False)
    assert r.residual < 1e-12


def test_other_dybe_candidates_do_not_vanish(small, pts):
    s, p, t = small
    ex, _, _ = verify.dybe_expressions(lax_series(s, p, t), np.array(pts[:3]))
    assert np.abs(ex["resolved"]).max() < 1e-6
    for name in ("allPlus", "swappedArguments", "sType"):
        assert np.abs(ex[name]).max() > 1e-3


def test_basepoint_modes(small, pts):
    s, p, t = small
    a, b = 3.0 + 0.5j, 3.0 - 0.5j
    r = verify.check_basepoint(pts[0], a, b, project_to_zero_moment(p), s, t)
    assert r.details["mode"] == "moment-zero" and r.passed, r.to_line()
    r = verify.check_basepoint(pts[0], a, b, p, s, t)
    assert r.details["mode"] == "generic" and r.passed, r.to_line()


def test_basepoint_segment_through_disc_fails(small, pts):
    from schottky_lax.errors import LeavesFundamentalDomain
    s, p, t = small
    c = s.discs[0].center
    with pytest.raises(LeavesFundamentalDomain):
        verify.check_basepoint(pts[0], c - 2, c + 2, p, s, t)


def test_oracle(small):
    s, p, t = small
    r = verify.check_oracle(p, s, t, probes=8, rng=np.random.default_rng(3))
    assert r.passed, r.to_line()


def test_trivial_xi_passes(small):
    s, p, t = small
    q = PhasePoint(p.g, np.zeros_like(p.xi), p.algebra)
    for check in (verify.check_twist, verify.check_pairing, verify.check_infinity):
        r = check(q, s, t)
        assert r.passed and r.residual < 1e-14


def test_wrong_pairing_circle_fails(small):
    s, p, t = small
    c = s.discs[0]
    r = verify.check_pairing(p, s, t, circles=[Circle(c.center + 3 * c.radius, c.radius)])
    assert not r.passed


def test_twist_fails_at_short_truncation(small):
    s, p, t = small
    assert not verify.check_twist(p, s, t.fixed(1)).passed


def test_bracket_report_records_sign_convention(small):
    s, p, t = small
    r = verify.check_bracket(p, s, t, pairs=1, fd_pairs=0, swap_pairs=0)
    assert r.details["xiXiSign"] == -1.0
    assert r.details["oppositeSignDefect"] > 1e-3 > r.residual
