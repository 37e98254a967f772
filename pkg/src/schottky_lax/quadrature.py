"""Trapezoidal contour integrals over circles and products of circles.

All integrals are normalized by 1/(2 pi i) per contour, so a simple pole inside
a counterclockwise circle integrates to its residue.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import LeavesFundamentalDomain, NearPole, PoleCollision, QuadratureNotConverged
from .moebius import Circle, SchottkyData

DEFAULT_NODES = 256
MAX_NODES = 4096
ROUNDOFF = 1e-13


@dataclass(frozen=True)
class ContourSpec:
    circle: Circle
    nodes: int = DEFAULT_NODES
    orientation: int = 1  # +1 counterclockwise, -1 clockwise

    def __post_init__(self):
        if self.nodes < 16:
            raise ValueError("a contour needs at least 16 nodes")
        if self.orientation not in (1, -1):
            raise ValueError("orientation is +1 or -1")

    def points(self, nodes: int | None = None) -> np.ndarray:
        return self.circle.points(nodes or self.nodes)

    def weights(self, nodes: int | None = None) -> np.ndarray:
        """w_k with (1/2 pi i) oint f dz ~ sum_k w_k f(z_k)."""
        m = nodes or self.nodes
        return self.orientation * (self.points(m) - self.circle.center) / m


@dataclass
class QuadratureResult:
    value: np.ndarray
    error: float
    nodes: int


def _evaluate(f, z, vectorized):
    if vectorized:
        return np.asarray(f(z))
    return np.array([f(zk) for zk in z])


def contour_integral(c: ContourSpec, f, tol: float = 1e-10, max_nodes: int = MAX_NODES,
                     vectorized: bool = True, adaptive: bool = True) -> QuadratureResult:
    """(1/2 pi i) oint f(z) dz, doubling nodes until the N vs N/2 gap is below tol/10.

    f maps an array of points to an array with the point axis first unless
    vectorized is False, in which case it is called point by point. With adaptive
    False the rule at c.nodes is returned as is, with its N vs N/2 gap as the error.
    """
    m = c.nodes
    z = c.points(m)
    vals = _evaluate(f, z, vectorized)
    while True:
        wts = c.weights(m)
        full = np.tensordot(wts, vals, axes=(0, 0))
        half = np.tensordot(2 * wts[::2], vals[::2], axes=(0, 0))
        err = float(np.max(np.abs(full - half))) if np.size(full) else 0.0
        floor = ROUNDOFF * float(np.max(np.abs(vals) * np.abs(wts).reshape((-1,) + (1,) * (vals.ndim - 1)))) * m
        if not adaptive or err <= max(0.1 * tol, floor):
            return QuadratureResult(full, err, m)
        if 2 * m > max_nodes:
            raise QuadratureNotConverged(f"N={m} vs N/2 differ by {err:.3g} (tol {tol:.3g})")
        # interleave the new odd nodes with the existing ones
        znew = c.points(2 * m)[1::2]
        new = _evaluate(f, znew, vectorized)
        merged = np.empty((2 * m,) + vals.shape[1:], dtype=np.result_type(vals, new))
        merged[::2] = vals
        merged[1::2] = new
        vals, m = merged, 2 * m


def double_contour_integral(ci: ContourSpec, cj: ContourSpec, kernel, tol: float = 1e-10,
                            max_nodes: int = 1024, adaptive: bool = True) -> QuadratureResult:
    """(1/2 pi i)^2 oint oint K(z, w) dz dw with K evaluated on the full grid.

    kernel(z, w) takes 1-d arrays and returns shape (len(z), len(w), ...).
    """
    m = max(ci.nodes, cj.nodes)
    while True:
        z, w = ci.points(m), cj.points(m)
        try:
            vals = np.asarray(kernel(z, w))
        except NearPole as exc:
            raise PoleCollision(str(exc)) from exc
        wz, ww = ci.weights(m), cj.weights(m)
        full = np.tensordot(ww, np.tensordot(wz, vals, axes=(0, 0)), axes=(0, 0))
        half = np.tensordot(2 * ww[::2], np.tensordot(2 * wz[::2], vals[::2, ::2], axes=(0, 0)), axes=(0, 0))
        err = float(np.max(np.abs(full - half)))
        scale = float(np.max(np.abs(vals))) * float(np.max(np.abs(wz))) * float(np.max(np.abs(ww))) * m * m
        if not adaptive or err <= max(0.1 * tol, ROUNDOFF * scale):
            return QuadratureResult(full, err, m)
        if 2 * m > max_nodes:
            raise QuadratureNotConverged(f"grid N={m} vs N/2 differ by {err:.3g} (tol {tol:.3g})")
        m *= 2


def deformed_circle(c: Circle, epsilon: float, schottky: SchottkyData | None = None,
                    margin: float = 1e-6) -> Circle:
    """Concentric circle of radius (1 + epsilon) r, checked against the other discs."""
    if not epsilon > 0:
        raise ValueError("epsilon must be positive so the deformed circle encircles the original")
    out = Circle(c.center, (1 + epsilon) * c.radius)
    if schottky is not None:
        for d in schottky.discs:
            if d == c:
                continue
            gap = abs(d.center - out.center) - d.radius - out.radius
            if gap <= margin * c.radius:
                raise LeavesFundamentalDomain(f"radius {out.radius:.6g} reaches the disc at {d.center}")
    return out
