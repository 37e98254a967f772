"""Phase space G^l x g^l: holonomy, observables, Poisson bracket and moment map.

The cotangent bundle of G is left-trivialized and g* is identified with g by the
trace form. With these identifications the bracket is

    {F, H} = sum_j <grad_j F, d_j H> - <d_j F, grad_j H> - <xi_j, [d_j F, d_j H]>

where grad_j is the left-invariant gradient in g_j and d_j the gradient in xi_j.
It gives {g_i (x), xi_j} = delta_ij g_i (x) P and {xi_i (x), xi_j} = -delta_ij [P, xi_i (x) 1].
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import expm

from . import liealg
from .errors import DerivativeUnavailable, SingularGroupElement
from .liealg import AlgebraSpec
from .moebius import SchottkyData, Word

# sign of the <xi, [dF, dH]> term; the opposite sign breaks the Jacobi identity
XI_SIGN = -1.0


@dataclass(frozen=True, eq=False)
class PhasePoint:
    g: np.ndarray
    xi: np.ndarray
    algebra: AlgebraSpec
    g_inv: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        g = np.array(self.g, dtype=complex)
        xi = np.array(self.xi, dtype=complex)
        if g.ndim != 3 or g.shape != xi.shape or g.shape[1:] != (self.algebra.n,) * 2:
            raise ValueError(f"g and xi must both have shape (l, {self.algebra.n}, {self.algebra.n})")
        for gi in g:
            if not np.all(np.isfinite(gi)) or np.linalg.cond(gi) > liealg.COND_LIMIT:
                raise SingularGroupElement("group element is singular or ill-conditioned")
        if self.algebra.kind == "sl":
            if np.any(np.abs(np.linalg.det(g) - 1) > 1e-10):
                raise ValueError("sl phase point needs det g_i = 1")
            if np.any(np.abs(np.trace(xi, axis1=1, axis2=2)) > 1e-12):
                raise ValueError("sl phase point needs traceless xi_i")
        g.setflags(write=False)
        xi.setflags(write=False)
        gi = np.linalg.inv(g)
        gi.setflags(write=False)
        object.__setattr__(self, "g", g)
        object.__setattr__(self, "xi", xi)
        object.__setattr__(self, "g_inv", gi)

    @property
    def genus(self) -> int:
        return self.g.shape[0]

    @property
    def n(self) -> int:
        return self.algebra.n

    def replace(self, g=None, xi=None) -> "PhasePoint":
        return PhasePoint(self.g if g is None else g, self.xi if xi is None else xi, self.algebra)

    def perturb_g(self, j: int, x: np.ndarray, t: float) -> "PhasePoint":
        """g_j -> g_j exp(t x)."""
        g = self.g.copy()
        g[j] = g[j] @ expm(t * np.asarray(x, dtype=complex))
        return PhasePoint(g, self.xi, self.algebra)

    def perturb_xi(self, j: int, x: np.ndarray, t: float) -> "PhasePoint":
        xi = self.xi.copy()
        xi[j] = xi[j] + t * np.asarray(x, dtype=complex)
        return PhasePoint(self.g, xi, self.algebra)

    def to_json(self) -> dict:
        def enc(m):
            return [[[float(v.real), float(v.imag)] for v in row] for row in m]
        return {"g": [enc(m) for m in self.g], "xi": [enc(m) for m in self.xi]}

    @classmethod
    def from_json(cls, obj, algebra: AlgebraSpec) -> "PhasePoint":
        if isinstance(obj, str):
            obj = json.loads(obj)

        def dec(m):
            return [[complex(re, im) for re, im in row] for row in m]
        return cls(np.array([dec(m) for m in obj["g"]]), np.array([dec(m) for m in obj["xi"]]), algebra)


def holonomy(w: Word, p: PhasePoint) -> np.ndarray:
    m = np.eye(p.n, dtype=complex)
    for i, e in w:
        m = m @ (p.g[i] if e == 1 else p.g_inv[i])
    return m


def holonomy_derivative(w: Word, p: PhasePoint, j: int, x: np.ndarray) -> np.ndarray:
    """d/dt of holonomy(w) under g_j -> g_j exp(t x), by the product rule."""
    letters = list(w)
    mats = [p.g[i] if e == 1 else p.g_inv[i] for i, e in letters]
    n = p.n
    out = np.zeros((n, n), dtype=complex)
    prefix = np.eye(n, dtype=complex)
    suffixes = [np.eye(n, dtype=complex)]
    for m in reversed(mats):
        suffixes.append(m @ suffixes[-1])
    suffixes.reverse()
    for k, (i, e) in enumerate(letters):
        if i == j:
            if e == 1:
                out += prefix @ p.g[j] @ x @ suffixes[k + 1]
            else:
                out -= prefix @ x @ p.g_inv[j] @ suffixes[k + 1]
        prefix = prefix @ mats[k]
    return out


def moment_map(p: PhasePoint) -> np.ndarray:
    return np.einsum("iab,ibc,icd->ad", p.g, p.xi, p.g_inv) - p.xi.sum(axis=0)


def project_to_zero_moment(p: PhasePoint) -> PhasePoint:
    """Orthogonal projection of (xi_i) onto the kernel of the moment map, in basis coordinates.

    Ad g_i - 1 is always singular, so no single xi_i can be solved for; a least-squares
    projection over all of them is used instead.
    """
    alg = p.algebra
    cols = []
    for i in range(p.genus):
        for e in alg.basis:
            cols.append((p.g[i] @ e @ p.g_inv[i] - e).ravel())
    m = np.array(cols).T
    c = alg.coordinates(p.xi).ravel()
    c = c - np.linalg.pinv(m, rcond=1e-12) @ (m @ c)
    xi = alg.from_coordinates(c.reshape(p.genus, alg.dim))
    return p.replace(xi=alg.project(xi))


def contraction_factor(p: PhasePoint, s: SchottkyData) -> float:
    q = np.abs(s.multipliers)
    return float(sum(qi * (liealg.adjoint_operator_norm(g, p.algebra)
                           + liealg.adjoint_operator_norm(gi, p.algebra))
                     for qi, g, gi in zip(q, p.g, p.g_inv)))


# -- observables -------------------------------------------------------------

def _pair(a, b):
    """Trace pairing tr(a b) over the last two axes, outer product over leading ones."""
    n = a.shape[-1]
    sa, sb = a.shape[:-2], b.shape[:-2]
    out = np.einsum("xij,yji->xy", a.reshape(-1, n, n), b.reshape(-1, n, n))
    return out.reshape(sa + sb)


class Observable:
    """Function on phase space with left-invariant g-gradients and xi-gradients.

    value has shape `shape`; g_gradient(p, j) and xi_gradient(p, j) return arrays of
    shape shape + (n, n) holding y with dF = tr(y x).
    """

    shape: tuple = ()

    def value(self, p: PhasePoint):
        raise NotImplementedError

    def g_gradient(self, p: PhasePoint, j: int) -> np.ndarray:
        raise DerivativeUnavailable(f"{type(self).__name__} has no analytic g-gradient")

    def xi_gradient(self, p: PhasePoint, j: int) -> np.ndarray:
        raise DerivativeUnavailable(f"{type(self).__name__} has no analytic xi-gradient")

    def g_derivative(self, p: PhasePoint, j: int, x: np.ndarray):
        return np.einsum("...ij,ji->...", self.g_gradient(p, j), x)

    def xi_derivative(self, p: PhasePoint, j: int, x: np.ndarray):
        return np.einsum("...ij,ji->...", self.xi_gradient(p, j), x)

    def __call__(self, p):
        return self.value(p)

    def __add__(self, other):
        return SumObservable([self, other])

    def __mul__(self, other):
        if np.isscalar(other):
            return SumObservable([self], [other])
        return ProductObservable(self, other)

    __rmul__ = __mul__

    def __sub__(self, other):
        return SumObservable([self, other], [1.0, -1.0])


class FunctionObservable(Observable):
    """Evaluation only; gradients are unavailable."""

    def __init__(self, f, shape=()):
        self.f = f
        self.shape = tuple(shape)

    def value(self, p):
        return self.f(p)


class FiniteDifferenceObservable(Observable):
    """Wraps an evaluation-only observable with central-difference gradients."""

    def __init__(self, f, shape=(), step: float = 1e-5):
        self.f = f
        self.shape = tuple(shape)
        self.step = step

    def value(self, p):
        return np.asarray(self.f(p))

    def g_gradient(self, p, j):
        h = self.step
        d = [(np.asarray(self.f(p.perturb_g(j, e, h))) - np.asarray(self.f(p.perturb_g(j, e, -h)))) / (2 * h)
             for e in p.algebra.basis]
        return p.algebra.gradient(np.moveaxis(np.array(d), 0, -1))

    def xi_gradient(self, p, j):
        h = self.step
        d = [(np.asarray(self.f(p.perturb_xi(j, e, h))) - np.asarray(self.f(p.perturb_xi(j, e, -h)))) / (2 * h)
             for e in p.algebra.basis]
        return p.algebra.gradient(np.moveaxis(np.array(d), 0, -1))


class AffineObservable(Observable):
    """c + sum_j tr(A_j g_j) + tr(B_j xi_j)."""

    def __init__(self, a, b, c=0.0, algebra: AlgebraSpec | None = None):
        self.a = np.asarray(a, dtype=complex)
        self.b = np.asarray(b, dtype=complex)
        if algebra is not None:
            self.b = algebra.project(self.b)
        self.c = complex(c)

    @classmethod
    def g_entry(cls, l, n, i, row, col):
        """(g_i)_{row, col}."""
        a = np.zeros((l, n, n), dtype=complex)
        a[i, col, row] = 1
        return cls(a, np.zeros_like(a))

    @classmethod
    def xi_pairing(cls, l, i, x, algebra=None):
        """tr(xi_i x)."""
        x = np.asarray(x, dtype=complex)
        b = np.zeros((l,) + x.shape, dtype=complex)
        b[i] = x
        return cls(np.zeros_like(b), b, algebra=algebra)

    def value(self, p):
        return self.c + np.einsum("jab,jba->", self.a, p.g) + np.einsum("jab,jba->", self.b, p.xi)

    def g_gradient(self, p, j):
        return p.algebra.project(self.a[j] @ p.g[j])

    def xi_gradient(self, p, j):
        return p.algebra.project(self.b[j])


class SumObservable(Observable):
    def __init__(self, terms, coeffs=None):
        self.terms = list(terms)
        self.coeffs = [1.0] * len(self.terms) if coeffs is None else list(coeffs)
        self.shape = self.terms[0].shape

    def _combine(self, fn):
        return sum(c * fn(t) for c, t in zip(self.coeffs, self.terms))

    def value(self, p):
        return self._combine(lambda t: t.value(p))

    def g_gradient(self, p, j):
        return self._combine(lambda t: t.g_gradient(p, j))

    def xi_gradient(self, p, j):
        return self._combine(lambda t: t.xi_gradient(p, j))


class ProductObservable(Observable):
    """Product of two scalar observables."""

    def __init__(self, f, h):
        if f.shape or h.shape:
            raise ValueError("products are defined for scalar observables")
        self.f, self.h = f, h

    def value(self, p):
        return self.f.value(p) * self.h.value(p)

    def g_gradient(self, p, j):
        return self.f.value(p) * self.h.g_gradient(p, j) + self.h.value(p) * self.f.g_gradient(p, j)

    def xi_gradient(self, p, j):
        return self.f.value(p) * self.h.xi_gradient(p, j) + self.h.value(p) * self.f.xi_gradient(p, j)


class ConstantObservable(Observable):
    def __init__(self, c=0.0):
        self.c = complex(c)

    def value(self, p):
        return self.c

    def g_gradient(self, p, j):
        return np.zeros((p.n, p.n), dtype=complex)

    def xi_gradient(self, p, j):
        return np.zeros((p.n, p.n), dtype=complex)


class TraceFunctionObservable(Observable):
    """tr(X^k) for a matrix-valued observable X."""

    def __init__(self, inner: Observable, k: int):
        if len(inner.shape) != 2:
            raise ValueError("inner observable must be matrix valued")
        self.inner, self.k = inner, int(k)

    def _outer(self, p):
        x = self.inner.value(p)
        return self.k * np.linalg.matrix_power(x, self.k - 1)

    def value(self, p):
        return np.trace(np.linalg.matrix_power(self.inner.value(p), self.k))

    def g_gradient(self, p, j):
        return np.einsum("ba,abij->ij", self._outer(p), self.inner.g_gradient(p, j))

    def xi_gradient(self, p, j):
        return np.einsum("ba,abij->ij", self._outer(p), self.inner.xi_gradient(p, j))


def gradient_bracket(p: PhasePoint, gf, df, gh, dh, xi_sign: float = XI_SIGN):
    """The bracket assembled from per-factor gradient stacks.

    gf[j], df[j] have shape sF + (n, n) and gh[j], dh[j] shape sH + (n, n); the result
    has shape sF + sH.
    """
    n = p.n
    total = 0
    for j in range(p.genus):
        a = df[j].reshape(-1, n, n)
        b = dh[j].reshape(-1, n, n)
        xa = p.xi[j] @ a
        lie = (np.einsum("xjk,ykj->xy", xa, b) - np.einsum("ykj,xjk->xy", p.xi[j] @ b, a))
        lie = lie.reshape(df[j].shape[:-2] + dh[j].shape[:-2])
        total = total + _pair(gf[j], dh[j]) - _pair(df[j], gh[j]) + xi_sign * lie
    return total


def _bracket(f: Observable, h: Observable, p: PhasePoint, xi_sign: float):
    js = range(p.genus)
    total = gradient_bracket(p, [f.g_gradient(p, j) for j in js], [f.xi_gradient(p, j) for j in js],
                             [h.g_gradient(p, j) for j in js], [h.xi_gradient(p, j) for j in js],
                             xi_sign)
    return total[()] if np.ndim(total) == 0 else total


def poisson_bracket(f: Observable, h: Observable, p: PhasePoint):
    """{F, H} with analytic gradients; the result has shape F.shape + H.shape."""
    return _bracket(f, h, p, XI_SIGN)


def poisson_bracket_fd(f, h, p: PhasePoint, step: float = 1e-5):
    """The same bracket with every derivative taken by central differences of the values."""
    if step <= 0:
        raise ValueError("step must be positive")
    fv = f.value if isinstance(f, Observable) else f
    hv = h.value if isinstance(h, Observable) else h
    return poisson_bracket(FiniteDifferenceObservable(fv, np.shape(fv(p)), step),
                           FiniteDifferenceObservable(hv, np.shape(hv(p)), step), p)


def bracket_observable(f: Observable, h: Observable) -> Observable:
    """{F, H} as an Observable with analytic gradients, for sums/products of affine observables."""
    if isinstance(f, ConstantObservable) or isinstance(h, ConstantObservable):
        return ConstantObservable(0.0)
    if isinstance(f, SumObservable):
        return SumObservable([bracket_observable(t, h) for t in f.terms], f.coeffs)
    if isinstance(h, SumObservable):
        return SumObservable([bracket_observable(f, t) for t in h.terms], h.coeffs)
    if isinstance(f, ProductObservable):
        return SumObservable([ProductObservable(f.f, bracket_observable(f.h, h)),
                              ProductObservable(f.h, bracket_observable(f.f, h))])
    if isinstance(h, ProductObservable):
        return SumObservable([ProductObservable(h.f, bracket_observable(f, h.h)),
                              ProductObservable(h.h, bracket_observable(f, h.f))])
    if isinstance(f, AffineObservable) and isinstance(h, AffineObservable):
        a = np.einsum("jab,jbc->jac", h.b, f.a) - np.einsum("jab,jbc->jac", f.b, h.a)
        b = XI_SIGN * (np.einsum("jab,jbc->jac", f.b, h.b) - np.einsum("jab,jbc->jac", h.b, f.b))
        return AffineObservable(a, b)
    raise DerivativeUnavailable("bracket_observable needs sums and products of affine observables")


def random_point(algebra: AlgebraSpec, genus: int, rng, g_scale: float = 0.1,
                 xi_norm: float = 1.0) -> PhasePoint:
    """g_i = exp(g_scale X_i) near identity, xi_i of Frobenius norm xi_norm."""
    g = np.array([expm(algebra.random_element(rng, g_scale)) for _ in range(genus)])
    if algebra.kind == "sl":
        g = g / np.linalg.det(g)[:, None, None] ** (1 / algebra.n)
    xi = np.array([algebra.random_element(rng) for _ in range(genus)])
    xi *= xi_norm / np.linalg.norm(xi, axis=(1, 2))[:, None, None]
    return PhasePoint(g, algebra.project(xi), algebra)
