"""Poincare series over the Schottky group: the Lax form xi(z), the r- and s-matrices,
the basepoint variant, and their analytic derivatives along left translations of g_j.

Every series is summed shell by shell (words of equal length) with compensated
accumulation. After each shell the geometric tail last * r / (1 - r) is estimated from
the measured ratio r of consecutive shell norms, and summation stops once it drops
below the policy's target.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from functools import lru_cache

import numpy as np

from .errors import (ConvergenceCriterionViolated, IndexOutOfRange, NearPole, TailNotMet)
from .moebius import (DEFAULT_CAPACITY, INFINITY, Circle, SchottkyData, Word, word_count,
                      word_table, word_to_map)
from .phasespace import Observable, PhasePoint, contraction_factor
from .quadrature import ContourSpec, contour_integral

CHUNK = 8192
NEAR_POLE = 1e-8


@dataclass(frozen=True)
class TruncationPolicy:
    max_word_length: int = 40
    target_tail: float = 1e-10
    capacity: int = DEFAULT_CAPACITY
    # g-derivative terms grow linearly with word length, so their tail is looser
    derivative_tail: float | None = None

    def __post_init__(self):
        if self.max_word_length < 0:
            raise ValueError("max_word_length must be >= 0")
        if self.target_tail < 0:
            raise ValueError("target_tail must be >= 0")

    @classmethod
    def from_json(cls, obj) -> "TruncationPolicy":
        d = obj.get("derivativeTail")
        return cls(int(obj.get("maxWordLength", 40)), float(obj.get("targetTail", 1e-10)),
                   int(obj.get("capacity", DEFAULT_CAPACITY)), None if d is None else float(d))

    def to_json(self) -> dict:
        out = {"maxWordLength": self.max_word_length, "targetTail": self.target_tail,
               "capacity": self.capacity}
        if self.derivative_tail is not None:
            out["derivativeTail"] = self.derivative_tail
        return out

    def fixed(self, length: int) -> "TruncationPolicy":
        """Sum exactly the words of length <= length."""
        return replace(self, max_word_length=length, target_tail=0.0, derivative_tail=0.0)

    @property
    def derivative_target(self) -> float:
        return 10 * self.target_tail if self.derivative_tail is None else self.derivative_tail

    def for_derivatives(self) -> "TruncationPolicy":
        return replace(self, target_tail=self.derivative_target)


@dataclass
class SeriesValue:
    value: np.ndarray
    tail_estimate: float
    shells_used: int
    measured_ratio: float
    converged: bool
    shell_norms: list = field(default_factory=list, repr=False)

    @property
    def max_length(self) -> int:
        return self.shells_used - 1


def _ratio(a, b):
    if b == 0:
        return 0.0 if a == 0 else math.inf
    return a / b


def tail_estimate(norms):
    """(tail, ratio) from a list of shell norms."""
    if len(norms) < 2:
        return math.inf, math.nan
    ratios = [_ratio(norms[k + 1], norms[k]) for k in range(max(0, len(norms) - 3), len(norms) - 1)]
    r = max(ratios)
    if r >= 1:
        return math.inf, r
    return norms[-1] * r / (1 - r), r


def max_length_within(l: int, length: int, capacity: int) -> int:
    while length > 0 and word_count(l, length) > capacity:
        length -= 1
    return length


class LaxSeries:
    """All series for one (Schottky data, phase point, policy) triple."""

    def __init__(self, s: SchottkyData, p: PhasePoint, policy: TruncationPolicy):
        if p.genus != s.genus:
            raise ValueError("phase point and Schottky data disagree on the genus")
        self.s, self.p, self.policy = s, p, policy
        self.kappa = contraction_factor(p, s)
        if self.kappa >= 1:
            raise ConvergenceCriterionViolated(f"contraction factor {self.kappa:.4g} >= 1")
        self.length = max_length_within(s.genus, policy.max_word_length, policy.capacity)
        self.capped = self.length < policy.max_word_length
        self.table = word_table(s, self.length)
        self.poles = s.pole_points
        self.threshold = NEAR_POLE * s.min_radius
        self.alg = p.algebra
        self._holonomies()
        self._y = None

    # -- per-word data -------------------------------------------------------

    def _holonomies(self):
        t, p = self.table, self.p
        letters = np.empty((2 * p.genus, p.n, p.n), dtype=complex)
        letters[0::2], letters[1::2] = p.g, p.g_inv
        h = np.empty((len(t), p.n, p.n), dtype=complex)
        hi = np.empty_like(h)
        h[0] = hi[0] = np.eye(p.n)
        for q in range(1, self.length + 1):
            sl = t.shell(q)
            f, u = t.first[sl], t.tail[sl]
            h[sl] = letters[f] @ h[u]
            hi[sl] = hi[u] @ letters[f ^ 1]
        self.letters = letters
        self.h, self.h_inv = h, hi
        # Ad(g_w^-1) xi_i for every word and generator
        self.x = np.einsum("wab,ibc,wcd->wiad", hi, p.xi, h)
        self.x_norm = np.linalg.norm(self.x, axis=(2, 3))
        self.h_norm = np.linalg.norm(h, axis=(1, 2)) * np.linalg.norm(hi, axis=(1, 2))

    def _y_letters(self):
        p, alg = self.p, self.alg
        dirs = p.genus * alg.dim
        c = np.zeros((2 * p.genus, dirs, p.n, p.n), dtype=complex)
        for j in range(p.genus):
            blk = slice(j * alg.dim, (j + 1) * alg.dim)
            c[2 * j, blk] = alg.basis
            c[2 * j + 1, blk] = -np.einsum("ab,kbc,cd->kad", p.g[j], alg.basis, p.g_inv[j])
        return c

    def y(self, sl: slice) -> np.ndarray:
        """g_w^-1 dg_w for the words in sl (one shell), all directions (j, e_a) flattened
        as d = j * dim + a; built shell by shell on demand."""
        t = self.table
        if self._y is None:
            self._c = self._y_letters()
            self._y = [np.zeros((1, self._c.shape[1], self.p.n, self.p.n), dtype=complex)]
        q = int(np.searchsorted(t.offsets, sl.start, side="right")) - 1
        while len(self._y) <= q:
            r = len(self._y)
            shell = t.shell(r)
            f = t.first[shell]
            u = t.tail[shell]
            prev = self._y[r - 1][u - t.offsets[r - 1]]
            self._y.append(prev + np.einsum("wab,wdbc,wce->wdae", self.h_inv[u], self._c[f], self.h[u]))
        base = t.offsets[q]
        return self._y[q][sl.start - base:sl.stop - base]

    def direction(self, j: int, x: np.ndarray) -> np.ndarray:
        """Weights over the flattened directions for the tangent vector x at factor j."""
        self._check_index(j)
        coords = np.zeros(self.p.genus * self.alg.dim, dtype=complex)
        coords[j * self.alg.dim:(j + 1) * self.alg.dim] = self.alg.coordinates(x)
        return coords

    def _check_index(self, i):
        if not 0 <= i < self.p.genus:
            raise IndexOutOfRange(f"generator index {i} outside 0..{self.p.genus - 1}")

    def _weights(self, sl, z, targets):
        """gamma'(z) / (gamma(z) - target) for words in sl: shape (Z, W, T).

        Written as 1 / ((c z + d)((a - t c) z + (b - t d))), whose zeros are the poles
        gamma^-1(inf) and gamma^-1(t).
        """
        t = self.table
        a, b, c, d = t.a[sl], t.b[sl], t.c[sl], t.d[sl]
        z = np.asarray(z)
        tg = np.asarray(targets)
        f1 = np.multiply.outer(z, c) + d
        e = a[:, None] - c[:, None] * tg[None]
        f = b[:, None] - d[:, None] * tg[None]
        f2 = z[:, None, None] * e[None] + f[None]
        near1 = np.abs(f1) < self.threshold * np.abs(c)
        near2 = np.abs(f2) < self.threshold * np.abs(e)
        if near1.any() or near2.any():
            zk, wk = np.nonzero(near1 | near2.any(axis=2))
            raise NearPole(f"point {z[zk[0]]} is within {self.threshold:.2g} of a pole "
                           f"of the term for {t.word(sl.start + wk[0])}")
        f2 *= f1[:, :, None]
        return np.reciprocal(f2, out=f2)

    # -- summation -----------------------------------------------------------

    def _run(self, chunk, shape, policy=None) -> SeriesValue:
        policy = policy or self.policy
        length = min(self.length, policy.max_word_length)
        total = np.zeros(shape, dtype=complex)
        comp = np.zeros(shape, dtype=complex)
        norms = []
        tail, ratio, converged = math.inf, math.nan, False
        for q in range(length + 1):
            sl = self.table.shell(q)
            shell = 0.0
            for start in range(sl.start, sl.stop, CHUNK):
                v, nrm = chunk(slice(start, min(start + CHUNK, sl.stop)))
                y = v - comp
                t = total + y
                comp = (t - total) - y
                total = t
                shell = shell + nrm
            norms.append(float(np.max(shell)))
            tail, ratio = tail_estimate(norms)
            if q >= 2 and tail <= policy.target_tail:
                converged = True
                break
        if not converged and self.capped and length == self.length:
            raise TailNotMet(f"capacity {policy.capacity} reached at length {length}; "
                             f"tail {tail:.3g} > {policy.target_tail:.3g}")
        return SeriesValue(total, tail, len(norms), ratio, converged, norms)

    # -- series --------------------------------------------------------------

    def xi(self, z) -> SeriesValue:
        """xi(z) at an array of points: value shape (Z, n, n)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n = self.p.n

        def chunk(sl):
            k = self._weights(sl, z, self.poles).reshape(z.size, -1)
            return ((k @ self.x[sl].reshape(k.shape[1], n * n)).reshape(z.size, n, n),
                    np.abs(k) @ self.x_norm[sl].ravel())
        return self._run(chunk, (z.size, n, n))

    def kernel(self, z, i: int, xs) -> SeriesValue:
        """sum_gamma Ad(g_gamma^-1) x K_gamma,i(z) for a stack xs (m, n, n): shape (Z, m, n, n)."""
        self._check_index(i)
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        xs = np.asarray(xs, dtype=complex)
        n = self.p.n

        def chunk(sl):
            k = self._weights(sl, z, self.poles[i:i + 1])[:, :, 0]
            ad = np.einsum("wab,mbc,wcd->wmad", self.h_inv[sl], xs, self.h[sl])
            return (np.einsum("zw,wmab->zmab", k, ad),
                    np.abs(k) @ np.linalg.norm(ad, axis=(2, 3)))
        return self._run(chunk, (z.size, len(xs), n, n))

    def kernels_all(self, z, xs) -> SeriesValue:
        """kernel(z, i, x) for every generator i and every x in xs: shape (Z, l, m, n, n)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        xs = np.asarray(xs, dtype=complex)
        n, l = self.p.n, self.p.genus

        def chunk(sl):
            k = self._weights(sl, z, self.poles)
            ad = np.einsum("wab,mbc,wcd->wmad", self.h_inv[sl], xs, self.h[sl])
            return (np.einsum("zwi,wmab->zimab", k, ad),
                    np.einsum("zwi,wm->zim", np.abs(k), np.linalg.norm(ad, axis=(2, 3))))
        return self._run(chunk, (z.size, l, len(xs), n, n))

    def xi_gradient_xi(self, z) -> SeriesValue:
        """d xi(z) / d(coordinate a of xi_j): shape (Z, l, dim, n, n)."""
        return self.kernels_all(z, self.alg.basis)

    def xi_gradient_g(self, z) -> SeriesValue:
        """Derivative of xi(z) along every direction (j, e_a): shape (Z, l*dim, n, n).

        The term Ad(g_w^-1) xi_i moves by [Ad(g_w^-1) xi_i, Y_w] with Y_w = g_w^-1 dg_w.
        """
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n, dirs = self.p.n, self.p.genus * self.alg.dim

        def chunk(sl):
            k = self._weights(sl, z, self.poles)
            s = np.einsum("zwi,wiab->zwab", k, self.x[sl])
            y = self.y(sl)
            terms = np.einsum("zwab,wdbc->zwdac", s, y) - np.einsum("wdab,zwbc->zwdac", y, s)
            nrm = np.linalg.norm(terms, axis=(3, 4)).sum(axis=1)
            return terms.sum(axis=1), nrm
        return self._run(chunk, (z.size, dirs, n, n), self.policy.for_derivatives())

    def _casimir_terms(self, sl):
        """Ad g_w^(2) P for the words in sl, as (W, n, n, n, n), without the sl shift."""
        return np.einsum("wkj,wil->wijkl", self.h[sl], self.h_inv[sl])

    def _sl_shift(self, weight_sum):
        n = self.p.n
        eye = np.eye(n)
        return -np.multiply.outer(weight_sum, np.einsum("ij,kl->ijkl", eye, eye)) / n

    def r_matrix(self, z, w) -> SeriesValue:
        """r(z, w) at paired points: shape (Z, n, n, n, n)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        n = self.p.n
        sl_kind = self.alg.kind == "sl"

        def chunk(sl):
            k = np.stack([self._weights(sl, z[m:m + 1], w[m:m + 1])[0, :, 0] for m in range(z.size)])
            val = np.einsum("zw,wkj,wil->zijkl", k, self.h[sl], self.h_inv[sl])
            if sl_kind:
                val = val + self._sl_shift(k.sum(axis=1))
            return val, np.abs(k) @ self.h_norm[sl]
        return self._run(chunk, (z.size,) + (n,) * 4)

    def r_grid(self, z, w) -> SeriesValue:
        """r(z_a, w_b) on the full grid: shape (Z, W, n, n, n, n)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        n = self.p.n
        sl_kind = self.alg.kind == "sl"

        def chunk(sl):
            k = self._weights(sl, z, w)  # (Z, words, W)
            terms = self._casimir_terms(sl).reshape(-1, n ** 4)
            val = np.matmul(k.transpose(0, 2, 1), terms).reshape((z.size, w.size) + (n,) * 4)
            if sl_kind:
                val = val + self._sl_shift(k.sum(axis=1))
            return val, np.einsum("zuw,u->zw", np.abs(k), self.h_norm[sl]).max(axis=1)
        return self._run(chunk, (z.size, w.size) + (n,) * 4)

    def s_matrix(self, z, w) -> SeriesValue:
        """s(z, w) = sum Ad g^(1) P gamma'(w) / (z - gamma(w)) at paired points."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        n = self.p.n
        sl_kind = self.alg.kind == "sl"
        t = self.table

        def chunk(sl):
            a, b, c, d = t.a[sl], t.b[sl], t.c[sl], t.d[sl]
            cw = c[None] * w[:, None] + d[None]
            den = cw * (z[:, None] * cw - (a[None] * w[:, None] + b[None]))
            if np.any(np.abs(den) < self.threshold * np.abs(cw)):
                raise NearPole("z lies on the orbit of w")
            k = 1.0 / den
            val = np.einsum("zw,wil,wkj->zijkl", k, self.h[sl], self.h_inv[sl])
            if sl_kind:
                val = val + self._sl_shift(k.sum(axis=1))
            return val, np.abs(k) @ self.h_norm[sl]
        return self._run(chunk, (z.size,) + (n,) * 4)

    def s_grid(self, z, w) -> SeriesValue:
        """s(z_a, w_b) on the full grid: shape (Z, W, n, n, n, n)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        n = self.p.n
        sl_kind = self.alg.kind == "sl"
        t = self.table

        def chunk(sl):
            a, b, c, d = t.a[sl], t.b[sl], t.c[sl], t.d[sl]
            cw = c[:, None] * w[None] + d[:, None]  # (words, W)
            gw = (a[:, None] * w[None] + b[:, None])
            den = cw[None] * (z[:, None, None] * cw[None] - gw[None])
            if np.any(np.abs(den) < self.threshold * np.abs(cw)[None]):
                raise NearPole("z lies on the orbit of w")
            k = 1.0 / den
            terms = np.einsum("wil,wkj->wijkl", self.h[sl], self.h_inv[sl]).reshape(-1, n ** 4)
            val = np.matmul(k.transpose(0, 2, 1), terms).reshape((z.size, w.size) + (n,) * 4)
            if sl_kind:
                val = val + self._sl_shift(k.sum(axis=1))
            return val, np.einsum("zuw,u->zw", np.abs(k), self.h_norm[sl]).max(axis=1)
        return self._run(chunk, (z.size, w.size) + (n,) * 4)

    def r_gradient_g(self, z, w) -> SeriesValue:
        """Derivative of r(z, w) along every direction (j, e_a): shape (Z, l*dim, n, n, n, n)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        n, dirs = self.p.n, self.p.genus * self.alg.dim

        def chunk(sl):
            k = np.stack([self._weights(sl, z[m:m + 1], w[m:m + 1])[0, :, 0] for m in range(z.size)])
            y = self.y(sl)
            hy = np.einsum("wab,wdbc->wdac", self.h[sl], y)
            yhi = np.einsum("wdab,wbc->wdac", y, self.h_inv[sl])
            val = (np.einsum("zw,wdkj,wil->zdijkl", k, hy, self.h_inv[sl])
                   - np.einsum("zw,wkj,wdil->zdijkl", k, self.h[sl], yhi))
            y_norm = np.linalg.norm(y, axis=(2, 3))
            return val, 2 * np.einsum("zw,w,wd->zd", np.abs(k), self.h_norm[sl], y_norm)
        return self._run(chunk, (z.size, dirs) + (n,) * 4, self.policy.for_derivatives())

    def xi_based_at(self, z, z0) -> SeriesValue:
        """sum Ad(g_gamma^-1) xi_i (K(z; gamma_i^-1(z0)) - K(z; z0)) with K(z; t) = gamma'(z)/(gamma(z) - t)."""
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        n = self.p.n
        z0 = complex(z0)
        targets = np.array([g.inverse().apply(z0) for g in self.s.generators] + [z0])
        l = self.p.genus

        def chunk(sl):
            k = self._weights(sl, z, targets)
            kk = k[:, :, :l] - k[:, :, l:]
            return (np.einsum("zwi,wiab->zab", kk, self.x[sl]),
                    np.einsum("zwi,wi->z", np.abs(kk), self.x_norm[sl]))
        return self._run(chunk, (z.size, n, n))

    def basepoint_derivative(self, z, z0, moment=None) -> SeriesValue:
        """d/dz0 of xi_based_at: sum_d Ad(g_d^-1) M (d^-1)'(z0) / (z - d^-1(z0))^2."""
        from .phasespace import moment_map
        z = np.atleast_1d(np.asarray(z, dtype=complex))
        m = moment_map(self.p) if moment is None else moment
        n = self.p.n
        t = self.table
        z0 = complex(z0)

        def chunk(sl):
            a, b, c, d = t.a[sl], t.b[sl], t.c[sl], t.d[sl]
            den0 = a - c * z0  # d^-1 = (d, -b, -c, a)
            u = (d * z0 - b) / den0
            k = (1.0 / den0 ** 2)[None] / (z[:, None] - u[None]) ** 2
            ad = np.einsum("wab,bc,wcd->wad", self.h_inv[sl], m, self.h[sl])
            return np.einsum("zw,wab->zab", k, ad), np.abs(k) @ self.h_norm[sl] * np.linalg.norm(m)
        return self._run(chunk, (z.size, n, n))

    def s_inhomogeneous(self, i: int, w) -> SeriesValue:
        """sum_gamma Ad g_(gamma_i gamma)^(1) P K_gamma,i(w) at points w: shape (W, n, n, n, n)."""
        self._check_index(i)
        w = np.atleast_1d(np.asarray(w, dtype=complex))
        kern = self.kernels_all(w, self.alg.dual)
        # Ad g_gamma^-1 e^a in factor 2 pairs with e_a in factor 1: Ad g_gamma^(1) P
        val = np.einsum("aij,zakl->zijkl", self.alg.basis, kern.value[:, i])
        gi, gii = self.p.g[i], self.p.g_inv[i]
        val = np.einsum("mi,zijkl,jn->zmnkl", gi, val, gii)
        return SeriesValue(val, kern.tail_estimate, kern.shells_used, kern.measured_ratio,
                           kern.converged, kern.shell_norms)


@lru_cache(maxsize=8)
def lax_series(s: SchottkyData, p: PhasePoint, policy: TruncationPolicy) -> LaxSeries:
    return LaxSeries(s, p, policy)


def _scalar(v: SeriesValue) -> SeriesValue:
    return replace(v, value=v.value[0])


# -- module-level operations --------------------------------------------------

def kernel_weight(w: Word, i: int, z, s: SchottkyData) -> complex:
    """gamma'(z) / (gamma(z) - gamma_i^-1(inf)) for gamma the map of w."""
    m = word_to_map(w, s)
    pole = s.pairs[i].gamma.inverse().apply(INFINITY)
    gz = m.apply(z)
    if gz is INFINITY or abs(gz - pole) < NEAR_POLE * s.min_radius:
        raise NearPole(f"z={z} maps onto the pole of generator {i}")
    return m.derivative(z) / (gz - pole)


def xi(z, p, s, t=TruncationPolicy()) -> SeriesValue:
    return _scalar(lax_series(s, p, t).xi(z))


def poincare_kernel(z, i, x, p, s, t=TruncationPolicy()) -> SeriesValue:
    v = lax_series(s, p, t).kernel(z, i, np.asarray(x)[None])
    return replace(v, value=v.value[0, 0])


def r_matrix(z, w, p, s, t=TruncationPolicy()) -> SeriesValue:
    return _scalar(lax_series(s, p, t).r_matrix(z, w))


def s_matrix(z, w, p, s, t=TruncationPolicy()) -> SeriesValue:
    return _scalar(lax_series(s, p, t).s_matrix(z, w))


def xi_derivative_xi(z, i, a, p, s, t=TruncationPolicy()) -> SeriesValue:
    """d xi(z) / d xi_i^a, i.e. poincare_kernel(z, i, e_a)."""
    if not 0 <= i < p.genus:
        raise IndexOutOfRange(f"generator index {i} outside 0..{p.genus - 1}")
    return poincare_kernel(z, i, p.algebra.basis[a], p, s, t)


def xi_derivative_g(z, j, x, p, s, t=TruncationPolicy()) -> SeriesValue:
    eng = lax_series(s, p, t)
    v = eng.xi_gradient_g(z)
    return replace(v, value=np.einsum("d,dab->ab", eng.direction(j, x), v.value[0]))


def r_derivative_g(z, w, j, x, p, s, t=TruncationPolicy()) -> SeriesValue:
    eng = lax_series(s, p, t)
    v = eng.r_gradient_g(z, w)
    return replace(v, value=np.einsum("d,dijkl->ijkl", eng.direction(j, x), v.value[0]))


def xi_based_at(z, z0, p, s, t=TruncationPolicy()) -> SeriesValue:
    return _scalar(lax_series(s, p, t).xi_based_at(z, z0))


def basepoint_derivative(z, z0, p, s, t=TruncationPolicy()) -> SeriesValue:
    return _scalar(lax_series(s, p, t).basepoint_derivative(z, z0))


def residue_at_circle(i: int, f, s: SchottkyData, nodes: int = 256, tol: float = 1e-10,
                      circle: Circle | None = None) -> np.ndarray:
    """(1/2 pi i) oint f(z) dz counterclockwise over the inner circle of generator i.

    f takes an array of points and returns values with the point axis first.
    """
    c = circle or s.pairs[i].inner
    return contour_integral(ContourSpec(c, nodes), f, tol=tol).value


def residue_at_infinity(f, radius: float, nodes: int = 256, tol: float = 1e-10,
                        adaptive: bool = True) -> np.ndarray:
    """Coefficient of dz_inf / z_inf at infinity: -(1/2 pi i) oint_{|z|=R} f(z) dz."""
    return -contour_integral(ContourSpec(Circle(0, radius), nodes), f, tol=tol, adaptive=adaptive).value


class XiObservable(Observable):
    """The matrix entries of xi(z) as phase-space functions, with analytic gradients."""

    def __init__(self, z, s: SchottkyData, policy: TruncationPolicy = TruncationPolicy()):
        self.z, self.s, self.policy = complex(z), s, policy
        self._cache = None

    shape = (None, None)  # matrix valued; n is fixed by the phase point

    def _eng(self, p):
        return lax_series(self.s, p, self.policy)

    def value(self, p):
        return self._eng(p).xi(self.z).value[0]

    def _gradients(self, p):
        """Both gradient series at p, kept for the most recent phase point."""
        if self._cache is None or self._cache[0] is not p:
            eng = self._eng(p)
            self._cache = (p, eng.xi_gradient_xi(self.z).value[0], eng.xi_gradient_g(self.z).value[0])
        return self._cache[1:]

    def xi_gradient(self, p, j):
        d = self._gradients(p)[0][j]  # (dim, n, n)
        return np.einsum("aij,akl->ijkl", d, p.algebra.dual)

    def g_gradient(self, p, j):
        dim = p.algebra.dim
        d = self._gradients(p)[1][j * dim:(j + 1) * dim]
        return np.einsum("aij,akl->ijkl", d, p.algebra.dual)


def xi_observable(z, s, policy=TruncationPolicy()) -> XiObservable:
    return XiObservable(z, s, policy)
