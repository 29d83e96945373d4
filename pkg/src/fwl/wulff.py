"""Wulff shapes of sphere data, the lifted perturbation zeta-bar, domain
evolution and functional Wulff shapes of epigraph lifts."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.optimize import linprog
from scipy.spatial import ConvexHull, HalfspaceIntersection

from .convexfn import PLQFn, PolyhedralFn, floor_body, lift_body
from .geometry import EMPTY, ConvexPolygon, Disk, Interval, fibonacci_sphere, uniform_directions

Array = np.ndarray

DEFAULT_DIRECTIONS = 4096
DEFAULT_DIRECTIONS_3D = 16384


class DomainCollapsed(ValueError):
    def __init__(self, msg: str = "domain collapsed"):
        super().__init__(msg)


class WulffTooSmallT(ValueError):
    pass


# --------------------------------------------------------------------------
# functions on the sphere
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class SphericalFn:
    """f : S^{dim-1} -> R, evaluated on arrays of unit vectors (..., dim)."""

    func: Callable[[Array], Array]
    dim: int = 2

    def __call__(self, nu) -> Array:
        nu = np.asarray(nu, dtype=float)
        return np.asarray(self.func(nu), dtype=float) * np.ones(nu.shape[:-1])

    @classmethod
    def constant(cls, c: float, dim: int = 2) -> "SphericalFn":
        return cls(lambda nu: np.full(nu.shape[:-1], float(c)), dim)

    @classmethod
    def support_of(cls, body) -> "SphericalFn":
        if isinstance(body, Interval):
            return cls(lambda nu: body.support(nu[..., 0]), 1)
        return cls(body.support, 2 if not isinstance(body, Polytope3) else 3)

    @classmethod
    def linear(cls, y) -> "SphericalFn":
        """l_y(nu) = y . nu, the support function of {y}."""
        y = np.asarray(y, dtype=float)
        return cls(lambda nu: nu @ y, len(y))

    @classmethod
    def from_samples(cls, directions, values) -> "SphericalFn":
        """Periodic piecewise-linear interpolation in angle (S^1 only)."""
        d = np.asarray(directions, dtype=float)
        ang = np.mod(np.arctan2(d[:, 1], d[:, 0]), 2 * np.pi)
        order = np.argsort(ang)
        ang, vals = ang[order], np.asarray(values, dtype=float)[order]
        xp = np.concatenate([ang[-1:] - 2 * np.pi, ang, ang[:1] + 2 * np.pi])
        fp = np.concatenate([vals[-1:], vals, vals[:1]])

        def f(nu):
            th = np.mod(np.arctan2(nu[..., 1], nu[..., 0]), 2 * np.pi)
            return np.interp(th, xp, fp)

        return cls(f, 2)

    def __add__(self, other: "SphericalFn") -> "SphericalFn":
        if isinstance(other, (int, float)):
            return SphericalFn(lambda nu: self(nu) + other, self.dim)
        return SphericalFn(lambda nu: self(nu) + other(nu), self.dim)

    def scale(self, c: float) -> "SphericalFn":
        return SphericalFn(lambda nu: c * self(nu), self.dim)

    def oscillation(self, count: int = DEFAULT_DIRECTIONS) -> float:
        """Largest jump between adjacent sample directions (S^1)."""
        v = self(uniform_directions(count))
        return float(np.abs(np.diff(np.append(v, v[0]))).max())


def _directions(dim: int, count: int) -> Array:
    if dim == 1:
        return np.array([[1.0], [-1.0]])
    if dim == 2:
        return uniform_directions(count)
    return fibonacci_sphere(count)


# --------------------------------------------------------------------------
# three-dimensional polytopes (direction-sampled shapes only)
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Polytope3:
    vertices: Array

    @property
    def dimension(self) -> int:
        return 3

    def support(self, dirs) -> Array:
        return np.asarray(dirs, dtype=float) @ self.vertices.T

    @property
    def volume(self) -> float:
        return float(ConvexHull(self.vertices).volume)

    def contains(self, pts, tol: float = 1e-12) -> Array:
        hull = ConvexHull(self.vertices)
        pts = np.asarray(pts, dtype=float)
        s = pts.reshape(-1, 3) @ hull.equations[:, :3].T + hull.equations[:, 3]
        return (s.max(axis=1) <= tol).reshape(pts.shape[:-1])


# --------------------------------------------------------------------------
# Wulff shapes
# --------------------------------------------------------------------------

def _chebyshev_center(normals: Array, offsets: Array):
    n = normals.shape[1]
    c = np.zeros(n + 1)
    c[-1] = -1.0
    A = np.hstack([normals, np.linalg.norm(normals, axis=1)[:, None]])
    res = linprog(c, A_ub=A, b_ub=offsets, bounds=[(None, None)] * n + [(None, None)],
                  method="highs")
    if res.status == 2:
        return None, -np.inf
    if res.status != 0:
        raise RuntimeError(f"Chebyshev centre LP failed: {res.message}")
    return res.x[:n], float(res.x[-1])


def halfspace_shape(normals: Array, offsets: Array, *, rtol: float = 1e-12):
    """Intersection of {x : x . nu_i <= f_i}; EMPTY when infeasible."""
    normals = np.asarray(normals, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    n = normals.shape[1]
    if n == 1:
        up = normals[:, 0] > 0
        hi = float((offsets[up] / normals[up, 0]).min())
        lo = float((offsets[~up] / normals[~up, 0]).max())
        scale = 1.0 + abs(lo) + abs(hi)
        if lo > hi + rtol * scale:
            return EMPTY
        return Interval(lo, max(lo, hi))
    scale = 1.0 + float(np.abs(offsets).max())
    center, r = _chebyshev_center(normals, offsets)
    if center is None or r < -rtol * scale:
        return EMPTY
    pad = 0.0
    if r <= rtol * scale:
        # lower-dimensional shape: thicken by a rounding-level slack
        pad = 4 * rtol * scale
        center, r = _chebyshev_center(normals, offsets + pad)
    hs = np.hstack([normals, -(offsets + pad)[:, None]])
    verts = HalfspaceIntersection(hs, center).intersections
    if n == 2:
        return ConvexPolygon(verts)
    return Polytope3(verts[ConvexHull(verts).vertices])


def wulff_shape(f: SphericalFn, directions: int | Array = DEFAULT_DIRECTIONS, extra=None):
    """[f] = intersection of {x . nu <= f(nu)} over a direction set.

    ``directions`` is a count (uniform on S^1, Fibonacci on S^2) or an explicit
    array; ``extra`` directions are appended (e.g. known facet normals).
    """
    U = _directions(f.dim, directions) if np.isscalar(directions) else np.asarray(directions, dtype=float)
    if extra is not None and f.dim > 1:
        E = np.asarray(extra, dtype=float)
        U = np.vstack([U, E / np.linalg.norm(E, axis=1, keepdims=True)])
    return halfspace_shape(U, f(U))


def maximality_gap(K, f: SphericalFn, directions: int | Array = DEFAULT_DIRECTIONS) -> tuple[float, float]:
    """(max, min) of h_K - f over the direction set.  For K = [f] the max is
    <= 0 up to rounding and the min is small wherever K touches a half-space."""
    U = _directions(f.dim, directions) if np.isscalar(directions) else np.asarray(directions)
    if isinstance(K, Interval):
        h = K.support(U[:, 0])
    else:
        h = K.support(U)
    gap = h - f(U)
    return float(gap.max()), float(np.abs(gap).min())


def _normals_of(K) -> Array | None:
    return K.normals if isinstance(K, ConvexPolygon) and K.n_vertices >= 3 else None


def wulff_flow(K, f: SphericalFn, t: float, directions: int = DEFAULT_DIRECTIONS):
    """F_t K = [h_K + t f]."""
    if t == 0:
        return K
    g = SphericalFn.support_of(K) + f.scale(t)
    return wulff_shape(g, directions, extra=_normals_of(K))


def direction_discretization_bound(radius: float, directions: int = DEFAULT_DIRECTIONS) -> float:
    """Hausdorff excess of a sampled Wulff shape over the exact one for a
    shape of circumradius ``radius``: R (sec(delta/2) - 1) ~ R delta^2 / 8."""
    delta = 2 * np.pi / directions
    return float(radius * (1.0 / np.cos(delta / 2) - 1.0))


# --------------------------------------------------------------------------
# zeta-bar
# --------------------------------------------------------------------------

def gnomonic(nu) -> Array:
    """g(nu) = -nu_H / nu_{n+1}, so that g((p, -1)/sqrt(1+|p|^2)) = p."""
    nu = np.asarray(nu, dtype=float)
    return -nu[..., :-1] / nu[..., -1:]


@dataclass(frozen=True, eq=False)
class ZetaBar:
    """Lift of zeta to S^n: |nu_{n+1}| zeta(g(nu)) off the equator, rho_zeta on
    it, and even under the reflection nu_{n+1} -> -nu_{n+1}."""

    zeta: object
    equator_tol: float = 0.0

    def __call__(self, nu) -> Array:
        nu = np.asarray(nu, dtype=float)
        s = np.abs(nu[..., -1])
        h = nu[..., :-1]
        out = np.empty(nu.shape[:-1])
        eq = s <= self.equator_tol
        off = ~eq
        if np.any(off):
            so = s[off]
            out[off] = so * self.zeta(h[off] / so[:, None])
        if np.any(eq):
            out[eq] = self.zeta.recession(h[eq])
        return out

    def on_sphere(self) -> SphericalFn:
        return SphericalFn(self, 0)


def zeta_bar_eval(zeta, nu) -> Array:
    return ZetaBar(zeta)(nu)


# --------------------------------------------------------------------------
# domain evolution and the functional Wulff shape
# --------------------------------------------------------------------------

def domain_evolution(dom, zeta, t: float, directions: int = DEFAULT_DIRECTIONS):
    """dom(u_t) = [h_dom(u) + t rho_zeta].

    ``dom`` is an Interval, ConvexPolygon or Disk, or a function whose domain
    is taken.  Raises DomainCollapsed when the Wulff shape is empty (or has
    empty interior).
    """
    if not isinstance(dom, (Interval, ConvexPolygon, Disk)):
        dom = dom.domain_body if hasattr(dom, "domain_body") else dom.domain()
    if isinstance(dom, Interval):
        rho = zeta.recession(np.array([[1.0], [-1.0]]))
        lo, hi = dom.lo - t * rho[1], dom.hi + t * rho[0]
        if lo > hi + 1e-14 * (1 + abs(lo) + abs(hi)):
            raise DomainCollapsed()
        return Interval(lo, max(lo, hi))
    if t == 0:
        return dom
    U = uniform_directions(directions)
    if isinstance(dom, Disk):
        rho = zeta.recession(U)
        c = float(rho.mean())
        if np.abs(rho - c).max() <= 1e-13 * (1 + abs(c)):
            r = dom.radius + t * c
            if r <= 0:
                raise DomainCollapsed()
            return Disk(dom.center, r)
        shape = halfspace_shape(U, dom.support(U) + t * rho)
    else:
        V = np.vstack([U, dom.normals])
        shape = halfspace_shape(V, dom.support(V) + t * zeta.recession(V))
    if shape is EMPTY or shape.area <= 0:
        raise DomainCollapsed()
    return shape


def t_min(u, zeta, epsilon: float, directions: int = DEFAULT_DIRECTIONS) -> float:
    """T = (max u - min u) + epsilon * sup|zeta-bar| + 1."""
    U = uniform_directions(directions)
    zb = np.abs(ZetaBar(zeta)(U)).max()
    return float(u.max_value() - u.min_value() + epsilon * zb + 1.0)


@dataclass
class FunctionalWulffResult:
    function: PolyhedralFn
    body: ConvexPolygon
    T: float
    discrepancy: float


def _lifted_shape(K: ConvexPolygon, zeta, t: float, T: float, directions: int):
    zb = ZetaBar(zeta)
    f = SphericalFn(lambda nu: K.support(nu) + T * np.maximum(nu[..., 1], 0.0) + t * zb(nu), 2)
    return wulff_shape(f, directions, extra=_normals_of(K))


def functional_wulff(u, zeta, t: float, T: float | None = None, epsilon: float | None = None,
                     directions: int = DEFAULT_DIRECTIONS, tol: float | None = None,
                     full: bool = False):
    """u_t as the floor of [h_{K^u + l_T} + t zeta-bar], with l_T = [0, T e_2].

    The result is recomputed with 2T; if the two floors disagree beyond the
    discretization tolerance, T was too small and an error is raised.
    """
    if isinstance(u, PLQFn):
        u = u.to_polyhedral()
    K = lift_body(u)
    eps = abs(t) if epsilon is None else float(epsilon)
    T = t_min(u, zeta, eps, directions) if T is None else float(T)
    if t == 0:
        res = FunctionalWulffResult(u, K, T, 0.0)
        return res if full else u
    A = _lifted_shape(K, zeta, t, T, directions)
    B = _lifted_shape(K, zeta, t, 2 * T, directions)
    if A is EMPTY or B is EMPTY:
        raise DomainCollapsed("functional Wulff shape is empty")
    fa, fb = floor_body(A), floor_body(B)
    R = float(np.abs(K.vertices).max()) + 2 * T + abs(t) * t_min(u, zeta, 0.0, 64)
    if tol is None:
        tol = 64 * direction_discretization_bound(R, directions) + 1e-9
    lo = max(fa.points.min(), fb.points.min())
    hi = min(fa.points.max(), fb.points.max())
    xs = np.linspace(lo, hi, 257)
    disc = float(np.abs(fa(xs) - fb(xs)).max())
    span = max(abs(fa.points.min() - fb.points.min()), abs(fa.points.max() - fb.points.max()))
    disc = max(disc, span)
    if not disc <= tol:
        raise WulffTooSmallT(f"T too small; increase T (floors differ by {disc:.3g})")
    res = FunctionalWulffResult(fa, A, T, disc)
    return res if full else fa
