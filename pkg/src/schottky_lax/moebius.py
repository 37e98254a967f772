"""Moebius transformations, Schottky data and reduced words in the free group."""

from __future__ import annotations

import cmath
import itertools
import json
import math
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np

from .errors import CapacityExceeded, NotLoxodromic, ParabolicOrIdentity, PoleAtZ


class _PointAtInfinity:
    """The point at infinity of the Riemann sphere."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "INFINITY"

    def __reduce__(self):
        return (_PointAtInfinity, ())


INFINITY = _PointAtInfinity()

POLE_THRESHOLD = 1e-14


def is_infinity(z) -> bool:
    return z is INFINITY


@dataclass(frozen=True)
class MoebiusMap:
    """z -> (a z + b) / (c z + d), normalized to determinant 1 on construction."""

    a: complex
    b: complex
    c: complex
    d: complex

    def __post_init__(self):
        a, b, c, d = (complex(v) for v in (self.a, self.b, self.c, self.d))
        det = a * d - b * c
        if abs(det) == 0.0:
            raise ValueError("degenerate Moebius map (determinant 0)")
        s = cmath.sqrt(det)
        for name, v in zip("abcd", (a, b, c, d)):
            object.__setattr__(self, name, v / s)

    @classmethod
    def from_matrix(cls, m) -> "MoebiusMap":
        m = np.asarray(m, dtype=complex)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1])

    @classmethod
    def _product(cls, m) -> "MoebiusMap":
        """Wrap a product of determinant-1 matrices as is.

        Renormalizing would divide by a determinant computed with cancellation of order
        |m|^2, costing far more accuracy than the product itself.
        """
        out = object.__new__(cls)
        for name, v in zip("abcd", np.asarray(m, dtype=complex).ravel()):
            object.__setattr__(out, name, complex(v))
        return out

    @classmethod
    def identity(cls) -> "MoebiusMap":
        return cls(1, 0, 0, 1)

    @property
    def matrix(self) -> np.ndarray:
        return np.array([[self.a, self.b], [self.c, self.d]], dtype=complex)

    @property
    def trace(self) -> complex:
        return self.a + self.d

    def apply(self, z):
        if z is INFINITY:
            if self.c == 0:
                return INFINITY
            return self.a / self.c
        z = complex(z)
        den = self.c * z + self.d
        if abs(den) <= POLE_THRESHOLD * max(1.0, abs(self.a * z + self.b)):
            return INFINITY
        return (self.a * z + self.b) / den

    def derivative(self, z) -> complex:
        den = self.c * complex(z) + self.d
        if abs(den) < POLE_THRESHOLD:
            raise PoleAtZ(f"derivative undefined at the pole z={z}")
        return 1.0 / den**2

    def compose(self, other: "MoebiusMap") -> "MoebiusMap":
        """self o other."""
        return MoebiusMap._product(self.matrix @ other.matrix)

    __matmul__ = compose

    def inverse(self) -> "MoebiusMap":
        return MoebiusMap._product([[self.d, -self.b], [-self.c, self.a]])

    def _eigenvalues(self):
        t = self.trace
        disc = cmath.sqrt(t * t - 4)
        return (t + disc) / 2, (t - disc) / 2

    def fixed_points(self, tol: float = 1e-10):
        """Return (attracting, repelling) fixed points."""
        t = self.trace
        if abs(t * t - 4) < tol:
            raise ParabolicOrIdentity("trace^2 = 4: parabolic or identity")
        a, b, c, d = self.a, self.b, self.c, self.d
        if abs(c) < 1e-15:
            finite = b / (d - a)
            pts = [finite, INFINITY]
        else:
            disc = cmath.sqrt((d - a) ** 2 + 4 * b * c)
            pts = [(a - d + disc) / (2 * c), (a - d - disc) / (2 * c)]

        def rate(p):
            # |derivative| at the fixed point; < 1 means attracting
            if p is INFINITY:
                return abs(d / a) ** 2
            return abs(1.0 / (c * p + d) ** 2)

        r0, r1 = rate(pts[0]), rate(pts[1])
        if abs(r0 - r1) < 1e-8:
            # near-parabolic or elliptic: iterate from a generic seed
            z = 0.3183098861837907 + 0.5772156649015329j
            for _ in range(500):
                z = self.apply(z)
                if z is INFINITY:
                    break

            def dist(p):
                if p is INFINITY or z is INFINITY:
                    return 0.0 if p is z else math.inf
                return abs(p - z)

            pts.sort(key=dist)
            return pts[0], pts[1]
        return (pts[0], pts[1]) if r0 < r1 else (pts[1], pts[0])

    def multiplier(self, tol: float = 1e-10) -> complex:
        lam1, lam2 = self._eigenvalues()
        lam = lam1 if abs(lam1) < abs(lam2) else lam2
        q = lam * lam
        if abs(abs(q) - 1) < tol:
            raise NotLoxodromic(f"|multiplier| = 1 (q={q})")
        return q


def apply(m: MoebiusMap, z):
    return m.apply(z)


def derivative(m: MoebiusMap, z) -> complex:
    return m.derivative(z)


def fixed_points(m: MoebiusMap):
    return m.fixed_points()


def multiplier(m: MoebiusMap) -> complex:
    return m.multiplier()


def loxodromic(attracting: complex, repelling: complex, q: complex) -> MoebiusMap:
    """The map with the given fixed points and multiplier q (|q| < 1)."""
    lam = cmath.sqrt(q)
    h = MoebiusMap(repelling, attracting, 1, 1)  # 0 -> attracting, inf -> repelling
    return MoebiusMap.from_matrix(h.matrix @ np.diag([lam, 1 / lam]) @ h.inverse().matrix)


@dataclass(frozen=True)
class Circle:
    center: complex
    radius: float

    def __post_init__(self):
        object.__setattr__(self, "center", complex(self.center))
        object.__setattr__(self, "radius", float(self.radius))
        if not self.radius > 0:
            raise ValueError("circle radius must be positive")

    def contains(self, z) -> bool:
        return z is not INFINITY and abs(z - self.center) < self.radius

    def points(self, count: int) -> np.ndarray:
        theta = 2 * np.pi * np.arange(count) / count
        return self.center + self.radius * np.exp(1j * theta)


def isometric_circle(m: MoebiusMap) -> Circle:
    """|c z + d| = 1, centred at m^-1(inf)."""
    if m.c == 0:
        raise ValueError("map fixes infinity; no isometric circle")
    return Circle(-m.d / m.c, 1 / abs(m.c))


@dataclass(frozen=True)
class SchottkyPair:
    gamma: MoebiusMap
    inner: Circle
    outer: Circle


@dataclass(frozen=True, eq=False)
class SchottkyData:
    """Generators gamma_i mapping the circle `inner` onto `outer`.

    gamma_i sends the exterior of the inner disc onto the interior of the outer disc.
    Hashes by identity so evaluation caches can key on it.
    """

    pairs: tuple

    def __post_init__(self):
        object.__setattr__(self, "pairs", tuple(self.pairs))

    @classmethod
    def from_generators(cls, generators) -> "SchottkyData":
        """Pair each generator's isometric circle with that of its inverse."""
        return cls(tuple(SchottkyPair(g, isometric_circle(g), isometric_circle(g.inverse()))
                         for g in generators))

    @property
    def genus(self) -> int:
        return len(self.pairs)

    @property
    def generators(self):
        return [p.gamma for p in self.pairs]

    @property
    def discs(self):
        out = []
        for p in self.pairs:
            out.extend([p.inner, p.outer])
        return out

    @property
    def pole_points(self) -> np.ndarray:
        """gamma_i^-1(inf) for every generator."""
        return np.array([p.gamma.inverse().apply(INFINITY) for p in self.pairs], dtype=complex)

    @property
    def multipliers(self) -> np.ndarray:
        return np.array([p.gamma.multiplier() for p in self.pairs])

    @property
    def min_radius(self) -> float:
        return min(c.radius for c in self.discs)

    def to_json(self) -> dict:
        def cpx(v):
            return [float(v.real) + 0.0, float(v.imag) + 0.0]  # no signed zeros

        def circ(c):
            return {"center": cpx(c.center), "radius": float(c.radius)}

        return {"pairs": [{"gamma": {k: cpx(getattr(p.gamma, k)) for k in "abcd"},
                           "inner": circ(p.inner), "outer": circ(p.outer)}
                          for p in self.pairs]}

    @classmethod
    def from_json(cls, obj) -> "SchottkyData":
        if isinstance(obj, str):
            obj = json.loads(obj)

        def cpx(v):
            return complex(v[0], v[1])

        def circ(c):
            return Circle(cpx(c["center"]), c["radius"])

        pairs = []
        for p in obj["pairs"]:
            g = p["gamma"]
            pairs.append(SchottkyPair(MoebiusMap(*(cpx(g[k]) for k in "abcd")),
                                      circ(p["inner"]), circ(p["outer"])))
        return cls(tuple(pairs))


def fundamental_domain_points(s: SchottkyData, count: int, rng, margin: float = 0.25,
                              spread: float = 1.5) -> np.ndarray:
    """Random points outside every disc, at least margin * radius from each circle.

    Points are drawn uniformly from a box enlarged by `spread` times the largest radius
    around the discs.
    """
    discs = s.discs
    centers = np.array([c.center for c in discs])
    radii = np.array([c.radius for c in discs])
    pad = spread * radii.max()
    lo = complex(centers.real.min() - pad, centers.imag.min() - pad)
    hi = complex(centers.real.max() + pad, centers.imag.max() + pad)
    out = []
    while len(out) < count:
        z = complex(rng.uniform(lo.real, hi.real), rng.uniform(lo.imag, hi.imag))
        if np.all(np.abs(z - centers) > (1 + margin) * radii):
            out.append(z)
    return np.array(out)


# -- words -------------------------------------------------------------------

@dataclass(frozen=True)
class Word:
    """Reduced word; letters are (generator index, +1 | -1), generator indices from 0."""

    letters: tuple = ()

    def __post_init__(self):
        letters = tuple((int(i), int(e)) for i, e in self.letters)
        for i, e in letters:
            if e not in (1, -1) or i < 0:
                raise ValueError(f"bad letter {(i, e)}")
        for (i1, e1), (i2, e2) in zip(letters, letters[1:]):
            if i1 == i2 and e1 == -e2:
                raise ValueError(f"word {letters} is not reduced")
        object.__setattr__(self, "letters", letters)

    def __len__(self):
        return len(self.letters)

    def __iter__(self):
        return iter(self.letters)

    def __mul__(self, other: "Word") -> "Word":
        return Word(self.letters + other.letters)

    def inverse(self) -> "Word":
        return Word(tuple((i, -e) for i, e in reversed(self.letters)))

    def __repr__(self):
        if not self.letters:
            return "Word(e)"
        return "Word(" + " ".join(f"g{i}" + ("" if e == 1 else "^-1") for i, e in self.letters) + ")"


def word_count(l: int, max_length: int) -> int:
    return 1 + sum(2 * l * (2 * l - 1) ** (p - 1) for p in range(1, max_length + 1))


DEFAULT_CAPACITY = 250_000


def _letter_order(l):
    return [(i, e) for i in range(l) for e in (1, -1)]


def enumerate_words(l: int, max_length: int, capacity: int = DEFAULT_CAPACITY):
    """All reduced words of length <= max_length, by length then lexicographically."""
    if l < 1 or max_length < 0:
        raise ValueError("need l >= 1 and max_length >= 0")
    if word_count(l, max_length) > capacity:
        raise CapacityExceeded(f"{word_count(l, max_length)} words exceed capacity {capacity}")
    letters = _letter_order(l)
    out = [Word()]
    shell = [()]
    for _ in range(max_length):
        shell = [(a,) + w for a in letters for w in shell
                 if not (w and w[0][0] == a[0] and w[0][1] == -a[1])]
        out.extend(Word(w) for w in shell)
    return out


def word_to_map(w: Word, s: SchottkyData) -> MoebiusMap:
    m = np.eye(2, dtype=complex)
    for i, e in w:
        g = s.pairs[i].gamma
        m = m @ (g.matrix if e == 1 else g.inverse().matrix)
    return MoebiusMap._product(m)


class WordTable:
    """Reduced words up to a length, stored as flat arrays for vectorized sums.

    Word k equals letter first[k] followed by word tail[k]; words of length p
    occupy offsets[p]:offsets[p+1]. Letter code 2*i is gamma_i, 2*i+1 its inverse.
    """

    def __init__(self, schottky: SchottkyData, max_length: int):
        l = schottky.genus
        self.genus = l
        self.max_length = max_length
        gens = []
        for g in schottky.generators:
            gens.extend([g.matrix, g.inverse().matrix])
        self.letter_matrices = np.array(gens)
        first = [np.array([-1])]
        tail = [np.array([-1])]
        maps = [np.eye(2, dtype=complex)[None]]
        offsets = [0, 1]
        prev = np.array([0])
        prev_first = np.array([-1])
        for _ in range(max_length):
            f_parts, t_parts = [], []
            for code in range(2 * l):
                keep = prev[prev_first != (code ^ 1)]
                f_parts.append(np.full(keep.size, code))
                t_parts.append(keep)
            f = np.concatenate(f_parts)
            t = np.concatenate(t_parts)
            all_maps = np.concatenate(maps)
            maps.append(np.einsum("wab,wbc->wac", self.letter_matrices[f], all_maps[t]))
            first.append(f)
            tail.append(t)
            prev = np.arange(offsets[-1], offsets[-1] + f.size)
            prev_first = f
            offsets.append(offsets[-1] + f.size)
        self.first = np.concatenate(first)
        self.tail = np.concatenate(tail)
        self.offsets = offsets
        m = np.concatenate(maps)
        self.a, self.b, self.c, self.d = m[:, 0, 0], m[:, 0, 1], m[:, 1, 0], m[:, 1, 1]

    def __len__(self):
        return self.first.size

    def shell(self, p: int) -> slice:
        return slice(self.offsets[p], self.offsets[p + 1])

    def word(self, k: int) -> Word:
        letters = []
        while k > 0:
            code = int(self.first[k])
            letters.append((code // 2, 1 if code % 2 == 0 else -1))
            k = int(self.tail[k])
        return Word(tuple(letters))

    def map(self, k: int) -> MoebiusMap:
        return MoebiusMap._product([[self.a[k], self.b[k]], [self.c[k], self.d[k]]])


@lru_cache(maxsize=16)
def word_table(schottky: SchottkyData, max_length: int) -> WordTable:
    return WordTable(schottky, max_length)


# -- validation --------------------------------------------------------------

@dataclass
class ValidationCheck:
    name: str
    passed: bool
    margin: float
    detail: str = ""


@dataclass
class ValidationReport:
    checks: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failed(self):
        return [c.name for c in self.checks if not c.passed]

    def __getitem__(self, name):
        for c in self.checks:
            if c.name == name:
                return c
        raise KeyError(name)

    def to_json(self) -> dict:
        return {"passed": self.passed,
                "checks": [{"name": c.name, "passed": c.passed,
                            "margin": c.margin if math.isfinite(c.margin) else str(c.margin),
                            "detail": c.detail} for c in self.checks]}


def validate(s: SchottkyData, geom_margin: float | None = None,
             pairing_tol: float = 1e-9, samples: int = 64) -> ValidationReport:
    """Check every SchottkyData invariant; never raises on bad data."""
    report = ValidationReport()
    discs = s.discs
    eps = geom_margin if geom_margin is not None else 1e-6 * min(c.radius for c in discs)

    gap = math.inf
    for c1, c2 in itertools.combinations(discs, 2):
        gap = min(gap, abs(c1.center - c2.center) - c1.radius - c2.radius)
    report.checks.append(ValidationCheck("disc-disjointness", gap > eps, gap,
                                         f"smallest gap between closed discs, margin {eps:.3g}"))

    # discs are bounded, so infinity is always exterior; margin is the nearest disc edge
    far = max(abs(c.center) + c.radius for c in discs)
    report.checks.append(ValidationCheck("infinity-outside-discs", math.isfinite(far), math.inf,
                                         f"all discs inside |z| <= {far:.6g}"))

    worst = 0.0
    for p in s.pairs:
        for z in p.inner.points(samples):
            w = p.gamma.apply(z)
            if w is INFINITY:
                worst = math.inf
                break
            worst = max(worst, abs(abs(w - p.outer.center) - p.outer.radius) / p.outer.radius)
    report.checks.append(ValidationCheck("circle-pairing", worst <= pairing_tol, pairing_tol - worst,
                                         f"max relative residual {worst:.3g}"))

    qmax = 0.0
    ok = True
    for p in s.pairs:
        try:
            qmax = max(qmax, abs(p.gamma.multiplier()))
        except NotLoxodromic:
            ok, qmax = False, 1.0
    report.checks.append(ValidationCheck("loxodromic", ok and qmax < 1, 1 - qmax,
                                         f"max |q| = {qmax:.6g}"))

    margin = math.inf
    for p in s.pairs:
        pole = p.gamma.inverse().apply(INFINITY)
        image = p.gamma.apply(INFINITY)
        m1 = -math.inf if pole is INFINITY else p.inner.radius - abs(pole - p.inner.center)
        m2 = -math.inf if image is INFINITY else p.outer.radius - abs(image - p.outer.center)
        margin = min(margin, m1, m2)
    report.checks.append(ValidationCheck("pole-inside-disc", margin > 0, margin,
                                         "gamma^-1(inf) inside inner disc, gamma(inf) inside outer"))
    return report
