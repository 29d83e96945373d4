"""Representations of convex functions with compact domain.

Three carriers are provided:

* ``PolyhedralFn`` -- lower envelope of finitely many points (x_i, z_i); the
  exact piecewise-linear track (n = 1, with evaluation/conjugation in n = 2).
* ``PLQFn`` -- piecewise linear-quadratic functions on the line.  This class is
  closed under conjugation, sums, inf-convolution and epi-multiplication, which
  makes it the machine-precision oracle for functions such as x^2 + I_[-1,1].
* ``GridFn`` -- extended-real samples on a regular box grid (n = 1, 2).

Epigraph bodies are ``geometry.ConvexPolygon`` instances.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property
from typing import Sequence

import numpy as np
from scipy import ndimage
from scipy.spatial import ConvexHull, QhullError

from .geometry import EMPTY, ConvexPolygon, Interval

Array = np.ndarray
INF = np.inf
COLLINEAR_RTOL = 1e-12


class ImproperFunction(ValueError):
    """Raised when an operation produces a function that is identically +inf."""


# --------------------------------------------------------------------------
# extended reals
# --------------------------------------------------------------------------

def ext_add(a, b):
    """Sum in R u {+inf}; -inf is not part of the value set."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(np.isneginf(a)) or np.any(np.isneginf(b)):
        raise ValueError("-inf is not an admissible value")
    return a + b


def ext_sub(a, b):
    """Difference in R u {+inf}; (+inf) - (+inf) is undefined and raises."""
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    if np.any(np.isposinf(a) & np.isposinf(b)):
        raise ValueError("(+inf) - (+inf) is undefined")
    if np.any(np.isposinf(b)):
        raise ValueError("subtracting +inf leaves the value set")
    return a - b


def ext_min(a, b):
    return np.minimum(np.asarray(a, dtype=float), np.asarray(b, dtype=float))


# --------------------------------------------------------------------------
# piecewise linear-quadratic functions on R
# --------------------------------------------------------------------------

def _rep_points(lo: Array, hi: Array) -> Array:
    """An interior point of each interval (lo, hi), allowing infinite ends."""
    lo = np.asarray(lo, dtype=float)
    hi = np.asarray(hi, dtype=float)
    out = np.zeros_like(lo)
    fl, fh = np.isfinite(lo), np.isfinite(hi)
    both = fl & fh
    out[both] = 0.5 * (lo[both] + hi[both])
    m = fl & ~fh
    out[m] = lo[m] + 1.0 + np.abs(lo[m])
    m = ~fl & fh
    out[m] = hi[m] - 1.0 - np.abs(hi[m])
    return out


def _quad(coef: Array, x: Array) -> Array:
    return (coef[..., 0] * x + coef[..., 1]) * x + coef[..., 2]


@dataclass(frozen=True, eq=False)
class PLQFn:
    """Piecewise linear-quadratic function a x^2 + b x + c on consecutive pieces.

    ``knots`` has m+1 nondecreasing entries (the ends may be infinite) and the
    domain is [knots[0], knots[-1]]; outside it the value is +inf.  A single
    piece with knots [p, p] represents a function supported at one point.
    The function is assumed continuous on its domain.
    """

    knots: Array
    coef: Array

    def __post_init__(self):
        k = np.asarray(self.knots, dtype=float).ravel()
        c = np.asarray(self.coef, dtype=float).reshape(-1, 3)
        if len(k) != len(c) + 1 or len(c) == 0:
            raise ValueError("knots must have one more entry than pieces")
        if np.any(np.diff(k) < 0):
            raise ValueError("knots must be nondecreasing")
        if np.any(~np.isfinite(k[1:-1])):
            raise ValueError("interior knots must be finite")
        if k[0] == INF or k[-1] == -INF:
            raise ValueError("empty domain")
        if not np.all(np.isfinite(c)):
            raise ValueError("coefficients must be finite")
        object.__setattr__(self, "knots", k)
        object.__setattr__(self, "coef", c)

    # construction -------------------------------------------------------
    @classmethod
    def point(cls, p: float, value: float) -> "PLQFn":
        return cls(np.array([p, p]), np.array([[0.0, 0.0, value]]))

    @classmethod
    def affine(cls, slope: float, const: float, lo: float = -INF, hi: float = INF) -> "PLQFn":
        return cls(np.array([lo, hi]), np.array([[0.0, slope, const]]))

    @classmethod
    def quadratic(cls, a: float, b: float = 0.0, c: float = 0.0, lo: float = -INF, hi: float = INF) -> "PLQFn":
        return cls(np.array([lo, hi]), np.array([[a, b, c]]))

    @classmethod
    def indicator(cls, lo: float, hi: float) -> "PLQFn":
        return cls.affine(0.0, 0.0, lo, hi)

    @classmethod
    def from_breakpoints(cls, x, z, left_slope: float | None = None, right_slope: float | None = None) -> "PLQFn":
        """Piecewise-linear interpolant through (x_i, z_i) with optional linear tails."""
        x = np.asarray(x, dtype=float)
        z = np.asarray(z, dtype=float)
        if len(x) == 1 and left_slope is None and right_slope is None:
            return cls.point(x[0], z[0])
        knots = list(x)
        coefs = []
        if left_slope is not None:
            knots = [-INF] + knots
            coefs.append([0.0, left_slope, z[0] - left_slope * x[0]])
        s = np.diff(z) / np.diff(x) if len(x) > 1 else np.zeros(0)
        for i in range(len(x) - 1):
            coefs.append([0.0, s[i], z[i] - s[i] * x[i]])
        if right_slope is not None:
            knots = knots + [INF]
            coefs.append([0.0, right_slope, z[-1] - right_slope * x[-1]])
        return cls(np.array(knots), np.array(coefs))

    # basic queries --------------------------------------------------------
    @property
    def n_pieces(self) -> int:
        return len(self.coef)

    @property
    def dimension(self) -> int:
        return 1

    @property
    def lo(self) -> float:
        return float(self.knots[0])

    @property
    def hi(self) -> float:
        return float(self.knots[-1])

    @property
    def is_point(self) -> bool:
        return self.lo == self.hi

    @property
    def compact(self) -> bool:
        return bool(np.isfinite(self.lo) and np.isfinite(self.hi))

    def domain(self) -> Interval:
        return Interval(self.lo, self.hi)

    def piece_index(self, x) -> Array:
        i = np.searchsorted(self.knots, x, side="right") - 1
        return np.clip(i, 0, self.n_pieces - 1)

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        out = _quad(self.coef[self.piece_index(x)], x)
        inside = (x >= self.lo) & (x <= self.hi)
        out = np.where(inside, out, INF)
        return out if out.ndim else float(out)

    def derivative(self, x):
        """Right derivative inside the domain (nan outside)."""
        x = np.asarray(x, dtype=float)
        c = self.coef[self.piece_index(x)]
        out = 2.0 * c[..., 0] * x + c[..., 1]
        return np.where((x >= self.lo) & (x <= self.hi), out, np.nan)

    def end_values(self) -> tuple[float, float]:
        return float(_quad(self.coef[0], self.lo)), float(_quad(self.coef[-1], self.hi))

    def critical_points(self) -> Array:
        """Finite knots and interior vertices of the quadratic pieces."""
        pts = [self.knots[np.isfinite(self.knots)]]
        a, b = self.coef[:, 0], self.coef[:, 1]
        nz = a != 0
        v = -b[nz] / (2.0 * a[nz])
        ok = (v > self.knots[:-1][nz]) & (v < self.knots[1:][nz])
        pts.append(v[ok])
        return np.concatenate(pts)

    def max_value(self) -> float:
        if not self.compact:
            raise ValueError("maximum over an unbounded domain")
        return float(np.max(self(self.critical_points())))

    def min_value(self) -> float:
        pts = self.critical_points()
        if len(pts) == 0:
            raise ValueError("minimum of an unbounded piece")
        return float(np.min(self(pts)))

    def is_convex(self, tol: float = 1e-10) -> bool:
        if np.any(self.coef[:, 0] < -tol):
            return False
        k = self.knots[1:-1]
        if len(k) == 0:
            return True
        left = 2 * self.coef[:-1, 0] * k + self.coef[:-1, 1]
        right = 2 * self.coef[1:, 0] * k + self.coef[1:, 1]
        return bool(np.all(right >= left - tol * (1 + np.abs(left))))

    # algebra ---------------------------------------------------------------
    def simplify(self, rtol: float = 1e-12, atol: float = 1e-13) -> "PLQFn":
        k, c = self.knots, self.coef
        if self.is_point:
            return PLQFn.point(self.lo, float(self(self.lo)))
        keep = np.diff(k) > 0
        if not np.all(keep):
            c = c[keep]
            k = np.concatenate([k[:-1][keep], k[-1:]])
        if len(c) > 1:
            same = np.all(np.abs(c[1:] - c[:-1]) <= atol + rtol * np.maximum(np.abs(c[1:]), np.abs(c[:-1])), axis=1)
            if np.any(same):
                start = np.concatenate([[True], ~same])
                c = c[start]
                k = np.concatenate([k[:-1][start], k[-1:]])
        return PLQFn(k, c)

    def _common(self, other: "PLQFn"):
        lo, hi = max(self.lo, other.lo), min(self.hi, other.hi)
        if lo > hi:
            return None
        if lo == hi:
            return np.array([lo, lo]), None
        inner = np.concatenate([self.knots, other.knots])
        inner = inner[(inner > lo) & (inner < hi)]
        edges = np.unique(np.concatenate([[lo], inner, [hi]]))
        return edges, _rep_points(edges[:-1], edges[1:])

    def __add__(self, other):
        if np.isscalar(other):
            c = self.coef.copy()
            c[:, 2] += other
            return PLQFn(self.knots, c)
        common = self._common(other)
        if common is None:
            raise ImproperFunction("sum has empty domain")
        edges, rep = common
        if rep is None:
            return PLQFn.point(edges[0], float(self(edges[0]) + other(edges[0])))
        c = self.coef[self.piece_index(rep)] + other.coef[other.piece_index(rep)]
        return PLQFn(edges, c).simplify()

    __radd__ = __add__

    def scale(self, s: float) -> "PLQFn":
        """Pointwise multiple s * f (for s >= 0 this keeps convexity)."""
        return PLQFn(self.knots, self.coef * s)

    def add_affine(self, slope: float, const: float = 0.0) -> "PLQFn":
        c = self.coef.copy()
        c[:, 1] += slope
        c[:, 2] += const
        return PLQFn(self.knots, c)

    def conjugate(self) -> "PLQFn":
        """Legendre-Fenchel conjugate sup_x {x y - f(x)} as a PLQFn.

        The conjugate is the upper envelope of the conjugates of the
        individual pieces, so f need not be convex.
        """
        parts = [_piece_conjugate(self.coef[i], self.knots[i], self.knots[i + 1]) for i in range(self.n_pieces)]
        if any(p is None for p in parts):
            raise ImproperFunction("conjugate is identically +inf")
        return plq_max_all(parts)

    def to_polyhedral(self) -> "PolyhedralFn":
        if not self.compact or np.any(self.coef[:, 0] != 0):
            raise ValueError("only compactly supported piecewise-linear functions are polyhedral")
        x = self.knots
        return PolyhedralFn(x[:, None], self(x))

    def to_dict(self) -> dict:
        return {"dimension": 1, "knots": [_enc(v) for v in self.knots], "coef": self.coef.tolist()}

    @classmethod
    def from_dict(cls, d: dict) -> "PLQFn":
        return cls(np.array([_dec(v) for v in d["knots"]]), np.array(d["coef"]))


def _piece_conjugate(c: Array, l: float, r: float) -> PLQFn | None:
    a, b, cc = c
    fl = float(_quad(c, l)) if np.isfinite(l) else None
    fr = float(_quad(c, r)) if np.isfinite(r) else None
    if l == r:
        return PLQFn.affine(l, -fl)
    if a != 0 and fl is not None and fr is not None:
        # quadratic term negligible on this piece: use the chord
        if abs(a) * (r - l) ** 2 <= 1e-15 * (1.0 + abs(fl) + abs(fr)):
            a = 0.0
            b = (fr - fl) / (r - l)
    if a > 0:
        knots, coefs = [], []
        if fl is not None:
            yl = 2 * a * l + b
            knots += [-INF, yl]
            coefs.append([0.0, l, -fl])
        else:
            knots += [-INF]
        coefs.append([1.0 / (4 * a), -b / (2 * a), b * b / (4 * a) - cc])
        if fr is not None:
            knots += [2 * a * r + b, INF]
            coefs.append([0.0, r, -fr])
        else:
            knots += [INF]
        return PLQFn(np.array(knots), np.array(coefs)).simplify()
    if a == 0:
        if fl is not None and fr is not None:
            return PLQFn(np.array([-INF, b, INF]), np.array([[0.0, l, -fl], [0.0, r, -fr]]))
        if fr is not None:
            return PLQFn(np.array([b, INF]), np.array([[0.0, r, -fr]]))
        if fl is not None:
            return PLQFn(np.array([-INF, b]), np.array([[0.0, l, -fl]]))
        return PLQFn.point(b, -cc)
    # concave piece: the sup sits at an endpoint
    if fl is None or fr is None:
        return None
    ys = (fr - fl) / (r - l)
    return PLQFn(np.array([-INF, ys, INF]), np.array([[0.0, l, -fl], [0.0, r, -fr]]))


def plq_max(f: PLQFn, g: PLQFn) -> PLQFn | None:
    """Pointwise maximum; None when the domains do not meet."""
    common = f._common(g)
    if common is None:
        return None
    edges, rep = common
    if rep is None:
        return PLQFn.point(edges[0], float(max(f(edges[0]), g(edges[0]))))
    cf = f.coef[f.piece_index(rep)]
    cg = g.coef[g.piece_index(rep)]
    d = cf - cg
    L, R = edges[:-1], edges[1:]
    da, db, dc = d[:, 0], d[:, 1], d[:, 2]
    roots = []
    with np.errstate(divide="ignore", invalid="ignore"):
        lin = (da == 0) & (db != 0)
        roots.append(np.where(lin, -dc / np.where(lin, db, 1.0), np.nan))
        quad = da != 0
        disc = db * db - 4 * da * dc
        ok = quad & (disc > 0)
        sq = np.sqrt(np.where(ok, disc, 0.0))
        qq = -0.5 * (db + np.where(db >= 0, sq, -sq))
        r1 = np.where(ok, qq / np.where(ok, da, 1.0), np.nan)
        r2 = np.where(ok & (qq != 0), dc / np.where(qq != 0, qq, 1.0), np.nan)
        roots += [r1, r2]
    cand = []
    for r in roots:
        span = np.where(np.isfinite(R - L), R - L, 1.0 + np.abs(r))
        m = np.isfinite(r) & (r > L + 1e-14 * span) & (r < R - 1e-14 * span)
        cand.append(r[m])
    cand = np.concatenate(cand)
    if len(cand):
        edges = np.unique(np.concatenate([edges, cand]))
        rep = _rep_points(edges[:-1], edges[1:])
        cf = f.coef[f.piece_index(rep)]
        cg = g.coef[g.piece_index(rep)]
    take_f = _quad(cf, rep) >= _quad(cg, rep)
    coef = np.where(take_f[:, None], cf, cg)
    return PLQFn(edges, coef).simplify()


def plq_max_all(fs: Sequence[PLQFn]) -> PLQFn:
    """Upper envelope of several PLQ functions via pairwise tree reduction."""
    items = list(fs)
    if not items:
        raise ValueError("empty family")
    while len(items) > 1:
        nxt = []
        for i in range(0, len(items) - 1, 2):
            m = plq_max(items[i], items[i + 1])
            if m is None:
                raise ImproperFunction("conjugate is identically +inf")
            nxt.append(m)
        if len(items) % 2:
            nxt.append(items[-1])
        items = nxt
    return items[0]


def sublevel_set(u: PLQFn, level: float):
    """{x : u(x) <= level} for a convex PLQ function (an Interval or EMPTY)."""
    lo, hi = INF, -INF
    for i in range(u.n_pieces):
        a, b, c = u.coef[i]
        l, r = u.knots[i], u.knots[i + 1]
        if a == 0 and b == 0:
            if c <= level:
                lo, hi = min(lo, l), max(hi, r)
            continue
        if a == 0:
            x0 = (level - c) / b
            seg = (l, min(r, x0)) if b > 0 else (max(l, x0), r)
        else:
            disc = b * b - 4 * a * (c - level)
            if disc < 0:
                continue
            s = np.sqrt(disc)
            seg = (max(l, (-b - s) / (2 * a)), min(r, (-b + s) / (2 * a)))
        if seg[0] <= seg[1]:
            lo, hi = min(lo, seg[0]), max(hi, seg[1])
    if lo > hi:
        return EMPTY
    return Interval(float(lo), float(hi))


# --------------------------------------------------------------------------
# polyhedral functions
# --------------------------------------------------------------------------

def _lower_hull_1d(x: Array, z: Array, rtol: float) -> Array:
    order = np.lexsort((z, x))
    x, z = x[order], z[order]
    first = np.concatenate([[True], np.diff(x) > 0])
    idx = order[first]
    x, z = x[first], z[first]
    keep: list[int] = []
    for i in range(len(x)):
        while len(keep) >= 2:
            o, a = keep[-2], keep[-1]
            dx1, dz1 = x[a] - x[o], z[a] - z[o]
            dx2, dz2 = x[i] - x[o], z[i] - z[o]
            cr = dx1 * dz2 - dz1 * dx2
            if cr <= rtol * (abs(dx1 * dz2) + abs(dz1 * dx2)):
                keep.pop()
            else:
                break
        keep.append(i)
    return idx[keep]


def _lower_hull_2d(x: Array, z: Array, rtol: float) -> Array:
    if len(x) <= 3:
        return np.arange(len(x))
    pts = np.column_stack([x, z])
    try:
        hull = ConvexHull(pts)
    except QhullError:
        dom = ConvexHull(x)  # coplanar generators: keep the domain corners on the plane
        A = np.column_stack([x, np.ones(len(x))])
        sol, *_ = np.linalg.lstsq(A, z, rcond=None)
        on = np.abs(A @ sol - z) <= rtol * (1 + np.abs(z))
        return np.array([i for i in dom.vertices if on[i]])
    low = hull.equations[:, 2] < -rtol
    return np.unique(hull.simplices[low].ravel())


@dataclass(frozen=True, eq=False)
class PolyhedralFn:
    """Lower convex envelope of generators (x_i, z_i); +inf off conv{x_i}.

    The constructor canonicalizes: only generators on the lower envelope are
    kept, so construction is idempotent.
    """

    points: Array
    values: Array

    def __post_init__(self):
        x = np.asarray(self.points, dtype=float)
        z = np.asarray(self.values, dtype=float).ravel()
        if x.ndim == 1:
            x = x[:, None]
        if len(z) == 0:
            raise ValueError("empty generator set")
        if len(x) != len(z):
            raise ValueError("points and values differ in length")
        if not np.all(np.isfinite(x)) or not np.all(np.isfinite(z)):
            raise ValueError("generators must be finite")
        n = x.shape[1]
        if n == 1:
            keep = _lower_hull_1d(x[:, 0], z, COLLINEAR_RTOL)
            order = np.argsort(x[keep, 0])
            keep = keep[order]
        elif n == 2:
            keep = _lower_hull_2d(x, z, COLLINEAR_RTOL)
        else:
            raise ValueError("dimension must be 1 or 2")
        object.__setattr__(self, "points", x[keep])
        object.__setattr__(self, "values", z[keep])

    @property
    def dimension(self) -> int:
        return self.points.shape[1]

    @property
    def generators(self) -> list[tuple[tuple[float, ...], float]]:
        return [(tuple(float(c) for c in p), float(v)) for p, v in zip(self.points, self.values)]

    @property
    def breakpoints(self) -> Array:
        self._need_1d()
        return self.points[:, 0]

    @property
    def slopes(self) -> Array:
        self._need_1d()
        return np.diff(self.values) / np.diff(self.points[:, 0])

    def _need_1d(self):
        if self.dimension != 1:
            raise ValueError("operation defined on the exact track (n = 1) only")

    def domain(self):
        if self.dimension == 1:
            return Interval(float(self.points[0, 0]), float(self.points[-1, 0]))
        return ConvexPolygon(self.points)

    @cached_property
    def _facets(self):
        """Affine pieces (grad, offset) of the lower hull for n = 2 evaluation."""
        x, z = self.points, self.values
        pts = np.column_stack([x, z])
        try:
            hull = ConvexHull(pts)
            eq = hull.equations[hull.equations[:, 2] < -1e-12]
            grad = -eq[:, :2] / eq[:, 2:3]
            off = -eq[:, 3] / eq[:, 2]
        except QhullError:
            A = np.column_stack([x, np.ones(len(x))])
            sol, *_ = np.linalg.lstsq(A, z, rcond=None)
            grad, off = sol[None, :2], sol[2:3]
        return grad, off

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if self.dimension == 1:
            bp, v = self.points[:, 0], self.values
            out = np.interp(x, bp, v)
            out = np.where((x >= bp[0]) & (x <= bp[-1]), out, INF)
            return out if out.ndim else float(out)
        grad, off = self._facets
        val = (x @ grad.T + off).max(axis=-1)
        dom = ConvexPolygon(self.points)
        tol = 1e-12 * (1.0 + float(np.abs(self.points).max()))
        return np.where(dom.contains(x, tol=tol), val, INF)

    def max_value(self) -> float:
        return float(self.values.max())

    def min_value(self) -> float:
        return float(self.values.min())

    def conjugate_eval(self, y) -> Array:
        """u*(y) = max_i (x_i . y - z_i)."""
        y = np.asarray(y, dtype=float)
        if self.dimension == 1:
            return (y[..., None] * self.points[:, 0] - self.values).max(axis=-1)
        return (y @ self.points.T - self.values).max(axis=-1)

    def to_plq(self) -> PLQFn:
        self._need_1d()
        if len(self.values) == 1:
            return PLQFn.point(float(self.points[0, 0]), float(self.values[0]))
        return PLQFn.from_breakpoints(self.points[:, 0], self.values)

    def equals(self, other: "PolyhedralFn") -> bool:
        return (self.points.shape == other.points.shape
                and np.array_equal(self.points, other.points)
                and np.array_equal(self.values, other.values))

    def to_dict(self) -> dict:
        return {"dimension": self.dimension,
                "generators": [[list(map(float, p)), float(v)] for p, v in zip(self.points, self.values)]}

    @classmethod
    def from_dict(cls, d: dict) -> "PolyhedralFn":
        pts = np.array([g[0] for g in d["generators"]], dtype=float).reshape(len(d["generators"]), -1)
        if pts.shape[1] != d["dimension"]:
            raise ValueError("generator dimension mismatch")
        return cls(pts, np.array([g[1] for g in d["generators"]], dtype=float))


def canonicalize(points) -> PolyhedralFn:
    """Lower-envelope representation of a list of (point, value) pairs."""
    points = list(points)
    if not points:
        raise ValueError("empty generator set")
    xs = np.array([np.atleast_1d(np.asarray(p, dtype=float)) for p, _ in points])
    zs = np.array([float(v) for _, v in points])
    return PolyhedralFn(xs, zs)


@dataclass(frozen=True, eq=False)
class ConcavePolyhedralFn:
    """Concave function -g for a PolyhedralFn g; -inf off the domain."""

    neg: PolyhedralFn

    def __call__(self, x):
        return -np.asarray(self.neg(x))


def evaluate(u, x):
    """Extended-real evaluation of any function carrier."""
    return u(x)


# --------------------------------------------------------------------------
# body <-> function lifts
# --------------------------------------------------------------------------

def lift_body(u) -> ConvexPolygon:
    """K^u = epi(u - M) cap R_H epi(u - M) + M e_{n+1}, with M = max u.

    Equivalently {(x, z) : u(x) <= z <= 2M - u(x)}.
    """
    if isinstance(u, PLQFn):
        if not u.compact:
            raise ValueError("unbounded domain: lift needs a compact domain")
        u = u.to_polyhedral()
    if not isinstance(u, PolyhedralFn) or u.dimension != 1:
        raise ValueError("exact lift needs a one-dimensional polyhedral function")
    x = u.points[:, 0]
    z = u.values
    M = float(z.max())
    lower = np.column_stack([x, z])
    upper = np.column_stack([x, 2.0 * M - z])
    return ConvexPolygon(np.vstack([lower, upper]))


def floor_body(K: ConvexPolygon) -> PolyhedralFn:
    """Lower boundary function: inf{t : (x, t) in K}."""
    return PolyhedralFn(K.vertices[:, :1], K.vertices[:, 1])


def ceil_body(K: ConvexPolygon) -> ConcavePolyhedralFn:
    """Upper boundary function sup{t : (x, t) in K} = -floor(R_H K)."""
    return ConcavePolyhedralFn(floor_body(K.reflect()))


def body_support(K: ConvexPolygon, nu) -> Array:
    return K.support(nu)


# --------------------------------------------------------------------------
# grid functions
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class GridFn:
    """Samples of an extended-real function on a regular box grid (n = 1, 2).

    ``domain`` optionally carries the exact domain geometry; without it the
    domain is the hull of the finite nodes.  ``extension`` optionally holds
    finite values at every node (a smooth continuation past the domain) and is
    used for interpolation in boundary cells; otherwise masked nodes are
    filled from their nearest finite neighbour.
    """

    box: tuple
    shape: tuple
    values: Array
    domain: object = None
    extension: Array | None = None
    convexified: bool = False
    convexity_tol: float = 1e-9

    def __post_init__(self):
        box = tuple((float(a), float(b)) for a, b in self.box)
        shape = tuple(int(s) for s in self.shape)
        v = np.asarray(self.values, dtype=float)
        if len(box) != len(shape) or len(shape) not in (1, 2):
            raise ValueError("grid dimension must be 1 or 2")
        if any(s < 2 for s in shape):
            raise ValueError("need at least 2 nodes per axis")
        if v.shape != shape:
            raise ValueError(f"values shape {v.shape} does not match {shape}")
        if np.any(np.isnan(v)) or np.any(np.isneginf(v)):
            raise ValueError("values must lie in R u {+inf}")
        if not np.any(np.isfinite(v)):
            raise ImproperFunction("grid function is identically +inf")
        object.__setattr__(self, "box", box)
        object.__setattr__(self, "shape", shape)
        object.__setattr__(self, "values", v)
        if self.extension is not None:
            object.__setattr__(self, "extension", np.asarray(self.extension, dtype=float))
        if self.convexified and not self.is_midpoint_convex(self.convexity_tol):
            raise ValueError("convexified flag set but samples are not midpoint convex")

    @property
    def dimension(self) -> int:
        return len(self.shape)

    @cached_property
    def axes(self) -> tuple[Array, ...]:
        return tuple(np.linspace(a, b, s) for (a, b), s in zip(self.box, self.shape))

    @cached_property
    def steps(self) -> Array:
        return np.array([(b - a) / (s - 1) for (a, b), s in zip(self.box, self.shape)])

    @cached_property
    def nodes(self) -> Array:
        if self.dimension == 1:
            return self.axes[0]
        X, Y = np.meshgrid(*self.axes, indexing="ij")
        return np.stack([X, Y], axis=-1)

    @property
    def finite(self) -> Array:
        return np.isfinite(self.values)

    @cached_property
    def domain_body(self):
        if self.domain is not None:
            return self.domain
        if self.dimension == 1:
            xs = self.axes[0][self.finite]
            return Interval(float(xs.min()), float(xs.max()))
        pts = self.nodes[self.finite]
        try:
            hull = ConvexHull(pts)
            return ConvexPolygon(pts[hull.vertices])
        except QhullError:
            return ConvexPolygon(pts)

    @cached_property
    def filled(self) -> Array:
        if self.extension is not None:
            return self.extension
        mask = ~self.finite
        if not mask.any():
            return self.values
        idx = ndimage.distance_transform_edt(mask, return_distances=False, return_indices=True)
        return self.values[tuple(idx)]

    def contains(self, x, tol: float | None = None) -> Array:
        if tol is None:
            tol = 1e-10 * (1.0 + max(abs(a) + abs(b) for a, b in self.box))
        return self.domain_body.contains(x, tol=tol)

    def interpolate(self, field: Array, x) -> Array:
        """Multilinear interpolation of a node field (no domain masking)."""
        x = np.asarray(x, dtype=float)
        if self.dimension == 1:
            x = x[..., None]
        out_shape = x.shape[:-1]
        x = x.reshape(-1, self.dimension)
        idx, frac = [], []
        for k, ((a, _), h, s) in enumerate(zip(self.box, self.steps, self.shape)):
            t = (x[:, k] - a) / h
            i = np.clip(np.floor(t).astype(np.int64), 0, s - 2)
            idx.append(i)
            frac.append(t - i)
        extra = (None,) * (field.ndim - self.dimension)
        frac = [fr[(slice(None),) + extra] for fr in frac]
        if self.dimension == 1:
            i, f = idx[0], frac[0]
            val = field[i] * (1 - f) + field[i + 1] * f
        else:
            (i, j), (f, g) = idx, frac
            val = ((field[i, j] * (1 - g) + field[i, j + 1] * g) * (1 - f)
                   + (field[i + 1, j] * (1 - g) + field[i + 1, j + 1] * g) * f)
        return val.reshape(out_shape + field.shape[self.dimension:])

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        val = self.interpolate(self.filled, x)
        out = np.where(self.contains(x), val, INF)
        return out if out.ndim else float(out)

    @cached_property
    def gradient(self) -> Array:
        """Node gradients: central differences where both neighbours are finite,
        one-sided at the discrete domain boundary, nan on masked nodes."""
        v = self.values
        fin = self.finite
        grads = []
        for ax, h in enumerate(self.steps):
            vp = np.roll(v, -1, axis=ax)
            vm = np.roll(v, 1, axis=ax)
            fp = np.roll(fin, -1, axis=ax)
            fm = np.roll(fin, 1, axis=ax)
            sl_last = [slice(None)] * v.ndim
            sl_last[ax] = -1
            sl_first = [slice(None)] * v.ndim
            sl_first[ax] = 0
            fp[tuple(sl_last)] = False
            fm[tuple(sl_first)] = False
            with np.errstate(invalid="ignore"):
                g = np.full(v.shape, np.nan)
                both = fin & fp & fm
                g[both] = (vp[both] - vm[both]) / (2 * h)
                fwd = fin & fp & ~fm
                g[fwd] = (vp[fwd] - v[fwd]) / h
                bwd = fin & fm & ~fp
                g[bwd] = (v[bwd] - vm[bwd]) / h
            grads.append(g)
        return np.stack(grads, axis=-1) if self.dimension > 1 else grads[0]

    @cached_property
    def gradient_filled(self) -> Array:
        g = self.gradient
        bad = np.isnan(g) if self.dimension == 1 else np.isnan(g).any(axis=-1)
        if not bad.any():
            return g
        idx = ndimage.distance_transform_edt(bad, return_distances=False, return_indices=True)
        return g[tuple(idx)]

    def max_gradient(self) -> float:
        g = self.gradient
        if self.dimension == 1:
            return float(np.nanmax(np.abs(g)))
        return float(np.nanmax(np.abs(g)))

    def max_value(self) -> float:
        return float(self.values[self.finite].max())

    def min_value(self) -> float:
        return float(self.values[self.finite].min())

    def is_midpoint_convex(self, tol: float = 1e-9) -> bool:
        v = self.values
        for ax in range(v.ndim):
            a = np.moveaxis(v, ax, 0)
            l, m, r = a[:-2], a[1:-1], a[2:]
            ok = np.isfinite(l) & np.isfinite(m) & np.isfinite(r)
            if np.any(l[ok] + r[ok] - 2 * m[ok] < -tol * (1 + np.abs(m[ok]))):
                return False
        return True

    @classmethod
    def from_function(cls, func, domain, shape, box=None, convexified: bool = False) -> "GridFn":
        """Sample a finite formula on the bounding box of ``domain``; nodes
        outside the domain become +inf and the raw samples are kept as the
        interpolation extension."""
        if box is None:
            box = domain.bbox() if not isinstance(domain, Interval) else ((domain.lo, domain.hi),)
        shape = tuple(shape) if np.iterable(shape) else (int(shape),) * len(box)
        axes = [np.linspace(a, b, s) for (a, b), s in zip(box, shape)]
        if len(axes) == 1:
            pts = axes[0]
        else:
            X, Y = np.meshgrid(*axes, indexing="ij")
            pts = np.stack([X, Y], axis=-1)
        raw = np.asarray(func(pts), dtype=float) * np.ones(shape)
        scale = 1.0 + max(abs(a) + abs(b) for a, b in box)
        inside = domain.contains(pts, tol=1e-10 * scale)
        vals = np.where(inside, raw, INF)
        return cls(box, shape, vals, domain=domain, extension=raw, convexified=convexified)

    def to_dict(self) -> dict:
        return {"dimension": self.dimension,
                "box": [list(b) for b in self.box],
                "shape": list(self.shape),
                "values": _enc_array(self.values)}

    @classmethod
    def from_dict(cls, d: dict) -> "GridFn":
        vals = np.array(_dec_array(d["values"]), dtype=float).reshape(d["shape"])
        return cls(tuple(tuple(b) for b in d["box"]), tuple(d["shape"]), vals)


# --------------------------------------------------------------------------
# serialization helpers
# --------------------------------------------------------------------------

def _enc(v: float):
    if np.isposinf(v):
        return "inf"
    if np.isneginf(v):
        return "-inf"
    return float(v)


def _dec(v) -> float:
    return float(v)


def _enc_array(a: Array):
    return [_enc_array(x) for x in a] if np.ndim(a) > 1 else [_enc(x) for x in a]


def _dec_array(a):
    return [_dec_array(x) for x in a] if isinstance(a, list) and a and isinstance(a[0], list) else [_dec(x) for x in a]


def to_document(obj) -> str:
    """Structured-text (JSON) document for a function or body."""
    return json.dumps(obj.to_dict(), sort_keys=True)


def from_document(text: str):
    d = json.loads(text)
    if "vertices" in d:
        return ConvexPolygon(np.array(d["vertices"], dtype=float))
    if "generators" in d:
        return PolyhedralFn.from_dict(d)
    if "values" in d:
        return GridFn.from_dict(d)
    if "knots" in d:
        return PLQFn.from_dict(d)
    raise ValueError("unrecognized document")


# --------------------------------------------------------------------------
# Gaussian symmetric-difference metric
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class SymDiffResult:
    value: float
    stderr: float
    samples: int
    seed: int


def membership(obj, n_ambient: int):
    """Membership oracle for a body, or for the epigraph of a function."""
    if hasattr(obj, "contains") and not isinstance(obj, GridFn):
        return lambda P: obj.contains(P, tol=0.0)
    if callable(obj):
        if n_ambient == 2:
            return lambda P: P[:, 1] >= np.asarray(obj(P[:, 0]))
        return lambda P: P[:, -1] >= np.asarray(obj(P[:, :-1]))
    raise TypeError(f"no membership oracle for {type(obj).__name__}")


def sym_diff_distance(A, B, *, samples: int = 10**6, seed: int = 0, n_ambient: int = 2,
                      chunk: int = 250_000) -> SymDiffResult:
    """Monte-Carlo estimate of gamma_{n+1}(A symmetric-difference B)."""
    if A is B:
        return SymDiffResult(0.0, 0.0, samples, seed)
    inA, inB = membership(A, n_ambient), membership(B, n_ambient)
    rng = np.random.default_rng(seed)
    hits = 0
    done = 0
    while done < samples:
        m = min(chunk, samples - done)
        P = rng.standard_normal((m, n_ambient))
        hits += int(np.count_nonzero(inA(P) != inB(P)))
        done += m
    p = hits / samples
    return SymDiffResult(p, float(np.sqrt(p * (1 - p) / samples)), samples, seed)
