"""Convex bodies on the line and in the plane.

``ConvexPolygon`` doubles as the epigraph-body type for one-dimensional
functions: its vertices live in R^2 = H x R with the last coordinate vertical.
Degenerate polygons (a segment or a point) are allowed because the lift of an
indicator function is flat.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Callable

import numpy as np

Array = np.ndarray

HULL_RTOL = 1e-12


class EmptySet:
    """Marker for an empty Wulff shape (a value, not an error)."""

    _inst = None

    def __new__(cls):
        if cls._inst is None:
            cls._inst = super().__new__(cls)
        return cls._inst

    def __repr__(self) -> str:
        return "EMPTY"

    def __bool__(self) -> bool:
        return False

    def contains(self, pts, tol: float = 0.0) -> Array:
        pts = np.asarray(pts, dtype=float)
        return np.zeros(pts.shape[:-1] if pts.ndim > 1 else pts.shape, dtype=bool)


EMPTY = EmptySet()


def uniform_directions(count: int) -> Array:
    """``count`` equally spaced unit vectors on S^1, starting at e_1."""
    if count < 3:
        raise ValueError("need at least 3 directions")
    th = 2.0 * np.pi * np.arange(count) / count
    return np.stack([np.cos(th), np.sin(th)], axis=1)


def fibonacci_sphere(count: int) -> Array:
    """Deterministic near-uniform points on S^2."""
    k = np.arange(count) + 0.5
    z = 1.0 - 2.0 * k / count
    r = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    phi = np.pi * (1.0 + 5.0**0.5) * k
    return np.stack([r * np.cos(phi), r * np.sin(phi), z], axis=1)


@dataclass(frozen=True)
class Interval:
    """Closed interval [lo, hi] on the real line (a convex body in R^1)."""

    lo: float
    hi: float

    def __post_init__(self):
        if not self.lo <= self.hi:
            raise ValueError(f"empty interval [{self.lo}, {self.hi}]")

    @property
    def dimension(self) -> int:
        return 1

    @property
    def length(self) -> float:
        return self.hi - self.lo

    def support(self, nu) -> Array:
        nu = np.asarray(nu, dtype=float)
        return np.maximum(self.lo * nu, self.hi * nu)

    def contains(self, x, tol: float = 0.0) -> Array:
        x = np.asarray(x, dtype=float)
        return (x >= self.lo - tol) & (x <= self.hi + tol)

    def bbox(self) -> tuple[tuple[float, float]]:
        return ((self.lo, self.hi),)

    def hausdorff(self, other: "Interval") -> float:
        return max(abs(self.lo - other.lo), abs(self.hi - other.hi))


def _cross(o, a, b) -> float:
    return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])


def convex_hull_2d(points, rtol: float = HULL_RTOL) -> Array:
    """CCW hull vertices without collinear points (monotone chain).

    Degenerate inputs return 1 or 2 points, which qhull would reject.
    """
    pts = np.unique(np.asarray(points, dtype=float).reshape(-1, 2), axis=0)
    if len(pts) <= 2:
        return pts
    scale = max(1.0, float(np.abs(pts).max()))
    eps = np.finfo(float).eps

    def flat(o, a, b) -> bool:
        # sine of the turning angle below rtol, or the cross product at rounding level
        la = np.hypot(a[0] - o[0], a[1] - o[1])
        lb = np.hypot(b[0] - o[0], b[1] - o[1])
        return _cross(o, a, b) <= max(rtol * la * lb, 8 * eps * scale * max(la, lb))

    def chain(seq):
        out: list = []
        for p in seq:
            while len(out) >= 2 and flat(out[-2], out[-1], p):
                out.pop()
            out.append(p)
        return out

    lower = chain(pts)
    upper = chain(pts[::-1])
    hull = np.array(lower[:-1] + upper[:-1])
    # drop vertices that coincide up to rounding (e.g. from half-plane solvers)
    gap = np.linalg.norm(hull - np.roll(hull, 1, axis=0), axis=1)
    keep = gap > 1e-13 * scale
    if not keep.any():
        return hull[:1]
    return hull[keep]


@dataclass(frozen=True, eq=False)
class ConvexPolygon:
    """Convex polygon with CCW vertices; may be a segment or a point."""

    vertices: Array

    def __post_init__(self):
        v = convex_hull_2d(self.vertices)
        if len(v) == 0:
            raise ValueError("polygon needs at least one vertex")
        object.__setattr__(self, "vertices", v)

    @property
    def dimension(self) -> int:
        return 2

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @cached_property
    def area(self) -> float:
        if len(self.vertices) < 3:
            return 0.0
        x, y = self.vertices[:, 0], self.vertices[:, 1]
        return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))

    @cached_property
    def edges(self) -> tuple[Array, Array]:
        """Edge start and end points (a segment has two opposite edges)."""
        v = self.vertices
        if len(v) == 1:
            return v[:0], v[:0]
        return v, np.roll(v, -1, axis=0)

    @cached_property
    def edge_lengths(self) -> Array:
        a, b = self.edges
        return np.linalg.norm(b - a, axis=1)

    @cached_property
    def normals(self) -> Array:
        """Outer unit normals of the edges, (dy, -dx)/len for CCW order."""
        a, b = self.edges
        d = b - a
        lens = np.linalg.norm(d, axis=1)
        return np.stack([d[:, 1], -d[:, 0]], axis=1) / lens[:, None]

    @cached_property
    def perimeter(self) -> float:
        # a segment counted once per side, consistent with its two facets
        return float(self.edge_lengths.sum())

    @cached_property
    def centroid(self) -> Array:
        v = self.vertices
        if len(v) < 3 or self.area <= 0:
            return v.mean(axis=0)
        x, y = v[:, 0], v[:, 1]
        xn, yn = np.roll(x, -1), np.roll(y, -1)
        cr = x * yn - xn * y
        return np.array([((x + xn) * cr).sum(), ((y + yn) * cr).sum()]) / (6.0 * self.area)

    def support(self, dirs) -> Array:
        dirs = np.asarray(dirs, dtype=float)
        return (dirs @ self.vertices.T).max(axis=-1)

    def contains(self, pts, tol: float = 1e-12) -> Array:
        """Membership test with an absolute slack ``tol``."""
        pts = np.asarray(pts, dtype=float)
        flat = pts.reshape(-1, 2)
        v = self.vertices
        if len(v) < 3:
            d = self.distance(flat)
            return (d <= tol).reshape(pts.shape[:-1])
        return (self._edge_slack(flat) <= tol).reshape(pts.shape[:-1])

    @cached_property
    def _wedges(self):
        c = self.vertices.mean(axis=0)
        ang = np.arctan2(*(self.vertices - c).T[::-1])
        start = int(np.argmin(ang))
        return c, np.roll(ang, -start), start

    def _edge_slack(self, flat: Array) -> Array:
        """Signed slack n_i . x - h_i for the edge facing each point.

        The edge is located by a binary search on vertex angles around an
        interior point, so the cost is O(P log E) rather than O(P E)."""
        a, _ = self.edges
        nrm = self.normals
        off = np.einsum("ij,ij->i", nrm, a)
        if len(a) <= 16:
            return (flat @ nrm.T - off).max(axis=1)
        c, ang, start = self._wedges
        th = np.arctan2(flat[:, 1] - c[1], flat[:, 0] - c[0])
        k = (np.searchsorted(ang, th, side="right") - 1) % len(a)
        e = (k + start) % len(a)
        return np.einsum("ij,ij->i", flat, nrm[e]) - off[e]

    def distance(self, pts) -> Array:
        """Euclidean distance from points to the polygon (0 inside)."""
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        v = self.vertices
        if len(v) == 1:
            return np.linalg.norm(pts - v[0], axis=1)
        a, b = self.edges
        d = b - a
        dd = np.einsum("ij,ij->i", d, d)
        out = np.empty(len(pts))
        step = max(1, 2_000_000 // len(a))
        for s0 in range(0, len(pts), step):
            p = pts[s0:s0 + step]
            rel = p[:, None, :] - a[None, :, :]
            s = np.clip(np.einsum("kij,ij->ki", rel, d) / dd[None, :], 0.0, 1.0)
            near = a[None] + s[..., None] * d[None]
            out[s0:s0 + step] = np.linalg.norm(p[:, None, :] - near, axis=2).min(axis=1)
        if len(v) >= 3:
            out = np.where(self._edge_slack(pts) <= 0.0, 0.0, out)
        return out

    def radial(self, dirs) -> Array:
        """Radial function r_K(x) = max{s > 0 : s x in K}; needs o in int K."""
        if not self.contains(np.zeros(2), tol=-1e-14):
            raise ValueError("radial function requires the origin in the interior")
        a, _ = self.edges
        off = np.einsum("ij,ij->i", self.normals, a)
        dots = np.asarray(dirs, dtype=float) @ self.normals.T
        with np.errstate(divide="ignore"):
            r = np.where(dots > 0, off / np.where(dots > 0, dots, 1.0), np.inf)
        return r.min(axis=-1)

    def translate(self, y) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices + np.asarray(y, dtype=float))

    def scale(self, s: float) -> "ConvexPolygon":
        return ConvexPolygon(self.vertices * s)

    def reflect(self) -> "ConvexPolygon":
        """Reflection R_H through the horizontal hyperplane."""
        return ConvexPolygon(self.vertices * np.array([1.0, -1.0]))

    def bbox(self) -> tuple[tuple[float, float], tuple[float, float]]:
        lo, hi = self.vertices.min(axis=0), self.vertices.max(axis=0)
        return ((float(lo[0]), float(hi[0])), (float(lo[1]), float(hi[1])))

    @cached_property
    def _fan(self):
        """Sorted outer-normal angles; vertex k+1 of the rolled order is the
        support point between consecutive angles k and k+1."""
        if len(self.vertices) == 1:
            return np.zeros(0), 0
        th = np.arctan2(self.normals[:, 1], self.normals[:, 0])
        start = int(np.argmin(th))
        return np.roll(th, -start), start

    def _support_vertex(self, ang: Array) -> Array:
        th, start = self._fan
        v = self.vertices
        if len(th) == 0:
            return np.broadcast_to(v[0], ang.shape + (2,))
        k = (np.searchsorted(th, ang, side="right") - 1) % len(th)
        return v[(k + start + 1) % len(v)]

    def hausdorff(self, other: "ConvexPolygon") -> float:
        """sup over unit u of |h_K(u) - h_L(u)|, exact.

        Between consecutive normal angles of either polygon the support points
        a, b are fixed, so the difference u . (a - b) peaks at an arc end or at
        u parallel to +-(a - b)."""
        cuts = np.unique(np.concatenate([self._fan[0], other._fan[0]]))
        if len(cuts) == 0:
            return float(np.linalg.norm(self.vertices[0] - other.vertices[0]))
        lo = cuts
        width = np.diff(np.append(cuts, cuts[0] + 2 * np.pi))
        mid = lo + 0.5 * width
        mid = np.where(mid > np.pi, mid - 2 * np.pi, mid)
        d = self._support_vertex(mid) - other._support_vertex(mid)
        best = 0.0
        for a in (lo, lo + width):
            u = np.stack([np.cos(a), np.sin(a)], axis=1)
            best = max(best, float(np.abs(np.einsum("ij,ij->i", u, d)).max()))
        nd = np.linalg.norm(d, axis=1)
        phi = np.arctan2(d[:, 1], d[:, 0])
        for ph in (phi, phi + np.pi):
            inside = np.mod(ph - lo, 2 * np.pi) <= width
            if np.any(inside):
                best = max(best, float(nd[inside].max()))
        return best

    def boundary(self) -> Callable[[Array], tuple[Array, Array]]:
        """Edge parametrization w -> (points, tangents) for quadrature rules."""
        a, b = self.edges
        d = b - a

        def param(w):
            w = np.asarray(w, dtype=float)
            pts = a[:, None, :] + d[:, None, :] * w[None, :, None]
            return pts, np.broadcast_to(d[:, None, :], pts.shape)

        return param

    def to_dict(self) -> dict:
        return {"vertices": self.vertices.tolist()}

    @classmethod
    def box(cls, lo, hi) -> "ConvexPolygon":
        (a, c), (b, d) = lo, hi
        return cls(np.array([[a, c], [b, c], [b, d], [a, d]], dtype=float))


@dataclass(frozen=True)
class Disk:
    """Closed disk in the plane."""

    center: tuple[float, float]
    radius: float

    @property
    def dimension(self) -> int:
        return 2

    @property
    def area(self) -> float:
        return np.pi * self.radius**2

    @property
    def perimeter(self) -> float:
        return 2.0 * np.pi * self.radius

    @property
    def centroid(self) -> Array:
        return np.asarray(self.center, dtype=float)

    def support(self, dirs) -> Array:
        dirs = np.asarray(dirs, dtype=float)
        return dirs @ np.asarray(self.center, dtype=float) + self.radius * np.linalg.norm(dirs, axis=-1)

    def contains(self, pts, tol: float = 1e-12) -> Array:
        pts = np.asarray(pts, dtype=float)
        return np.linalg.norm(pts - np.asarray(self.center), axis=-1) <= self.radius + tol

    def distance(self, pts) -> Array:
        pts = np.asarray(pts, dtype=float).reshape(-1, 2)
        return np.maximum(np.linalg.norm(pts - np.asarray(self.center), axis=1) - self.radius, 0.0)

    def bbox(self):
        cx, cy = self.center
        r = self.radius
        return ((cx - r, cx + r), (cy - r, cy + r))

    def boundary(self, arcs: int = 8) -> Callable[[Array], tuple[Array, Array]]:
        c = np.asarray(self.center, dtype=float)
        r = self.radius
        dth = 2.0 * np.pi / arcs

        def param(w):
            w = np.asarray(w, dtype=float)
            th = dth * (np.arange(arcs)[:, None] + w[None, :])
            pts = c + r * np.stack([np.cos(th), np.sin(th)], axis=-1)
            tan = r * dth * np.stack([-np.sin(th), np.cos(th)], axis=-1)
            return pts, tan

        return param

    def to_polygon(self, count: int = 4096) -> ConvexPolygon:
        return ConvexPolygon(np.asarray(self.center) + self.radius * uniform_directions(count))


def interior_point(body) -> Array | float:
    """A point well inside a body (centroid for planar shapes)."""
    if isinstance(body, Interval):
        return 0.5 * (body.lo + body.hi)
    return np.asarray(body.centroid, dtype=float)


def origin_in_interior(body, tol: float = 1e-12) -> bool:
    if isinstance(body, Interval):
        return body.lo < -tol and body.hi > tol
    if isinstance(body, Disk):
        return float(np.linalg.norm(body.center)) < body.radius - tol
    if isinstance(body, ConvexPolygon):
        if body.area <= 0:
            return False
        a, _ = body.edges
        off = np.einsum("ij,ij->i", body.normals, a)
        return bool(np.all(off > tol))
    return False
