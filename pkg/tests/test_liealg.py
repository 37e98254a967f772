import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from schottky_lax.errors import SingularGroupElement
from schottky_lax.liealg import (adjoint, adjoint_operator_norm, as_operator, casimir, commutator,
                                 embed, embed_single, gl, sl, tensor, tensor_act, tensor_commutator,
                                 tensor_swap)


def rand(rng, n):
    return rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n))


@pytest.mark.parametrize("alg", [gl(2), gl(3), sl(2), sl(3)])
def test_dual_basis(alg):
    gram = np.einsum("aij,bji->ab", alg.basis, alg.dual)
    assert np.allclose(gram, np.eye(alg.dim), atol=1e-12)
    if alg.kind == "sl":
        assert np.allclose(np.trace(alg.basis, axis1=1, axis2=2), 0)
        assert alg.dim == alg.n ** 2 - 1


@pytest.mark.parametrize("alg", [gl(2), sl(3)])
def test_dual_resolution(alg, rng):
    x = alg.project(rand(rng, alg.n))
    assert np.allclose(alg.from_coordinates(alg.coordinates(x)), x, atol=1e-12)


def test_casimir_gl2_is_swap(rng):
    p = as_operator(casimir(gl(2)))
    x, y = rng.normal(size=2), rng.normal(size=2)
    assert np.allclose(p @ np.kron(x, y), np.kron(y, x))


def test_casimir_sl2_contraction():
    h = np.diag([1.0, -1.0])
    p = casimir(sl(2))
    assert abs(np.einsum("ijkl,ji,lk->", p, h, h) - 2) < 1e-14


@pytest.mark.parametrize("alg", [gl(3), sl(2), sl(3)])
def test_casimir_invariance_and_symmetry(alg):
    p = casimir(alg)
    for x in alg.basis:
        assert np.abs(tensor_commutator(p, x, 1) + tensor_commutator(p, x, 2)).max() < 1e-12
    assert np.allclose(tensor_swap(p), p)


def test_casimir_is_sum_of_basis_dual(rng):
    for alg in (gl(2), sl(3)):
        direct = sum(tensor(a, b) for a, b in zip(alg.basis, alg.dual))
        assert np.allclose(direct, casimir(alg))


def test_adjoint_properties(rng):
    g, x, y = rand(rng, 3), rand(rng, 3), rand(rng, 3)
    assert np.allclose(adjoint(np.eye(3), x), x)
    assert np.allclose(adjoint(g, adjoint(np.linalg.inv(g), x)), x, atol=1e-12)
    assert np.allclose(adjoint(g, commutator(x, y)), commutator(adjoint(g, x), adjoint(g, y)), atol=1e-10)
    with pytest.raises(SingularGroupElement):
        adjoint(np.array([[1.0, 2.0], [2.0, 4.0]]), x[:2, :2])


def test_adjoint_operator_norm_examples(rng):
    assert abs(adjoint_operator_norm(np.eye(2)) - 1) < 1e-12
    u, _ = np.linalg.qr(rand(rng, 3))
    assert abs(adjoint_operator_norm(u) - 1) < 1e-12
    assert abs(adjoint_operator_norm(np.diag([2, 0.5])) - 4) < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2 ** 32 - 1))
def test_adjoint_norm_submultiplicative(seed):
    rng = np.random.default_rng(seed)
    g, h = rand(rng, 2), rand(rng, 2)
    assert adjoint_operator_norm(g @ h) <= adjoint_operator_norm(g) * adjoint_operator_norm(h) + 1e-10


def test_tensor_act_and_swap_examples(rng):
    g = rand(rng, 2)
    for alg in (gl(2), sl(2)):
        p = casimir(alg)
        x = alg.project(rand(rng, 2))
        assert np.allclose(tensor_commutator(p, x, 1), -tensor_commutator(p, x, 2))
        assert np.allclose(tensor_act(2, g, p), tensor_act(1, np.linalg.inv(g), p))


def test_tensor_commutator_is_operator_commutator(rng):
    t = rng.normal(size=(2,) * 4) + 0j
    x = rand(rng, 2)
    op = as_operator(t)
    for side, big in ((1, np.kron(x, np.eye(2))), (2, np.kron(np.eye(2), x))):
        assert np.allclose(as_operator(tensor_commutator(t, x, side)), op @ big - big @ op)


def test_embed_slots(rng):
    t = rng.normal(size=(2,) * 4) + 0j
    x, y = rand(rng, 2), rand(rng, 2)
    assert np.allclose(embed(tensor(x, y), (0, 1)), np.kron(np.kron(x, y), np.eye(2)))
    assert np.allclose(embed(tensor(x, y), (2, 0)), np.kron(np.kron(y, np.eye(2)), x))
    assert np.allclose(embed_single(x, 1), np.kron(np.kron(np.eye(2), x), np.eye(2)))
    with pytest.raises(ValueError):
        embed(t, (1, 1))
