import numpy as np
import pytest

from schottky_lax.errors import LeavesFundamentalDomain, PoleCollision, QuadratureNotConverged
from schottky_lax.moebius import Circle, SchottkyData, loxodromic
from schottky_lax.quadrature import ContourSpec, contour_integral, deformed_circle, double_contour_integral

unit = ContourSpec(Circle(0, 1), nodes=32)


def test_simple_pole_has_unit_residue():
    r = contour_integral(unit, lambda z: 1 / z)
    assert abs(r.value - 1) < 1e-14


def test_entire_function_integrates_to_zero():
    assert abs(contour_integral(unit, lambda z: z).value) < 1e-14


def test_double_pole_residue():
    r = contour_integral(unit, lambda z: np.exp(z) / z ** 2)
    assert abs(r.value - 1) < 1e-12


def test_orientation_flips_sign():
    cw = ContourSpec(Circle(0, 1), nodes=32, orientation=-1)
    assert abs(contour_integral(cw, lambda z: 1 / z).value + 1) < 1e-14


def test_off_center_circle_and_matrix_values():
    c = ContourSpec(Circle(2 + 1j, 0.5), nodes=32)
    f = lambda z: np.stack([1 / (z - 2 - 1j), 3 / (z - 2.2 - 1j) + 1 / (z - 5)], axis=-1)
    assert np.allclose(contour_integral(c, f).value, [1, 3], atol=1e-12)


def test_pointwise_evaluation():
    r = contour_integral(unit, lambda z: 1 / (z - 0.3), vectorized=False)
    assert abs(r.value - 1) < 1e-12


def test_adaptive_refinement_near_pole():
    r = contour_integral(unit, lambda z: 1 / (z - 0.95))
    assert r.nodes > 32 and abs(r.value - 1) < 1e-10
    fixed = contour_integral(unit, lambda z: 1 / (z - 0.95), adaptive=False)
    assert fixed.nodes == 32 and abs(fixed.value - 1) > 1e-10


def test_not_converged():
    with pytest.raises(QuadratureNotConverged):
        contour_integral(unit, lambda z: 1 / (z - 0.9999), max_nodes=256)


def test_double_integral_product_of_residues():
    ci = ContourSpec(Circle(0, 1), nodes=32)
    cj = ContourSpec(Circle(5, 1), nodes=32)
    k = lambda z, w: 2 / (z[:, None] * (w[None, :] - 5))
    assert abs(double_contour_integral(ci, cj, k).value - 2) < 1e-12
    flipped = ContourSpec(Circle(5, 1), nodes=32, orientation=-1)
    assert abs(double_contour_integral(ci, flipped, k).value + 2) < 1e-12


def test_double_integral_pole_collision():
    from schottky_lax.errors import NearPole

    def k(z, w):
        raise NearPole("boom")
    with pytest.raises(PoleCollision):
        double_contour_integral(unit, unit, k)


def test_contour_spec_validation():
    with pytest.raises(ValueError):
        ContourSpec(Circle(0, 1), nodes=4)
    with pytest.raises(ValueError):
        ContourSpec(Circle(0, 1), orientation=2)


def test_deformed_circle():
    s = SchottkyData.from_generators([loxodromic(1, -1, 0.16)])
    c = s.discs[0]
    d = deformed_circle(c, 0.05, s)
    assert abs(d.radius - 1.05 * c.radius) < 1e-15 and d.center == c.center
    with pytest.raises(LeavesFundamentalDomain):
        deformed_circle(c, 10.0, s)
    with pytest.raises(ValueError):
        deformed_circle(c, 0.0, s)
