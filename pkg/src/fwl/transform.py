"""Legendre transforms, inf-convolution, epi-multiplication and the
perturbation u_t = (u* + t zeta)*.

Grid conjugates use the linear-time Legendre transform: per grid line, the
lower hull of the finite samples is swept against the sorted dual nodes, and
two-dimensional transforms are applied one axis at a time.
"""
from __future__ import annotations

import weakref
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from numba import njit

from .convexfn import INF, GridFn, ImproperFunction, PLQFn, PolyhedralFn
from .geometry import ConvexPolygon, Disk, Interval

Array = np.ndarray

DEFAULT_LADDER = (10.0, 1e2, 1e3, 1e4)


class PerturbationError(ImproperFunction):
    """u* + t zeta has an improper conjugate (or the domain collapsed)."""


# --------------------------------------------------------------------------
# perturbations in C_rec
# --------------------------------------------------------------------------

def _as_points(y) -> Array:
    return np.asarray(y, dtype=float)


@dataclass(frozen=True, eq=False)
class Perturbation:
    """A function zeta in C_rec together with its recession function.

    ``func`` and ``rho`` act on arrays of points with the coordinate on the
    last axis, shape (..., n).  ``bound`` certifies sup |rho - zeta|.  ``plq``
    is an exact one-dimensional piecewise form when one is available.
    """

    func: Callable[[Array], Array]
    rho: Callable[[Array], Array] | None = None
    bound: float | None = None
    plq: PLQFn | None = None
    label: str = "zeta"
    lipschitz: float | None = None
    kinks: tuple = ()

    def __call__(self, y) -> Array:
        return np.asarray(self.func(_as_points(y)), dtype=float)

    def eval1d(self, y) -> Array:
        return self(np.asarray(y, dtype=float)[..., None])

    def recession(self, nu) -> Array:
        if self.rho is not None:
            return np.asarray(self.rho(_as_points(nu)), dtype=float)
        return recession(self, n=np.shape(nu)[-1])(nu)

    def scale(self, c: float) -> "Perturbation":
        return Perturbation(
            lambda y: c * self.func(y),
            None if self.rho is None else (lambda y: c * self.rho(y)),
            None if self.bound is None else abs(c) * self.bound,
            None if self.plq is None else self.plq.scale(c),
            f"{c}*({self.label})",
            None if self.lipschitz is None else abs(c) * self.lipschitz,
            self.kinks,
        )

    def __neg__(self) -> "Perturbation":
        return self.scale(-1.0)

    def __add__(self, other: "Perturbation") -> "Perturbation":
        return sum_of([self, other])

    # atoms -----------------------------------------------------------------
    @classmethod
    def support(cls, polytope) -> "Perturbation":
        """Support function h_P of a polytope P (rows are vertices)."""
        P = np.asarray(polytope, dtype=float)
        if P.ndim == 1:
            P = P[:, None]
        f = lambda y: (y @ P.T).max(axis=-1)
        plq = None
        if P.shape[1] == 1:
            lo, hi = float(P.min()), float(P.max())
            plq = PLQFn(np.array([-INF, 0.0, INF]), np.array([[0.0, lo, 0.0], [0.0, hi, 0.0]])).simplify()
        lip = float(np.linalg.norm(P, axis=1).max())
        return cls(f, f, 0.0, plq, "support", lip, (0.0,))

    @classmethod
    def norm(cls, coeff: float = 1.0) -> "Perturbation":
        f = lambda y: coeff * np.linalg.norm(y, axis=-1)
        plq = PLQFn(np.array([-INF, 0.0, INF]), np.array([[0.0, -coeff, 0.0], [0.0, coeff, 0.0]]))
        return cls(f, f, 0.0, plq, f"{coeff}|y|", abs(coeff), (0.0,))

    @classmethod
    def constant(cls, value: float) -> "Perturbation":
        f = lambda y: np.full(np.shape(y)[:-1], float(value))
        return cls(f, lambda y: np.zeros(np.shape(y)[:-1]), abs(value),
                   PLQFn.affine(0.0, value), f"{value}", 0.0)

    @classmethod
    def linear(cls, vector) -> "Perturbation":
        v = np.atleast_1d(np.asarray(vector, dtype=float))
        f = lambda y: y @ v
        plq = PLQFn.affine(float(v[0]), 0.0) if len(v) == 1 else None
        return cls(f, f, 0.0, plq, "linear", float(np.linalg.norm(v)))

    @classmethod
    def soft_norm(cls, coeff: float = 1.0) -> "Perturbation":
        """c * sqrt(1 + |y|^2); recession c|y|, |rho - zeta| <= |c|."""
        f = lambda y: coeff * np.sqrt(1.0 + np.sum(y * y, axis=-1))
        r = lambda y: coeff * np.linalg.norm(y, axis=-1)
        return cls(f, r, abs(coeff), None, "soft_norm", abs(coeff))

    @classmethod
    def bump(cls, coeff: float = 1.0) -> "Perturbation":
        """c / (1 + |y|^2), a bounded continuous term with zero recession."""
        f = lambda y: coeff / (1.0 + np.sum(y * y, axis=-1))
        return cls(f, lambda y: np.zeros(np.shape(y)[:-1]), abs(coeff), None, "bump",
                   abs(coeff) * 0.6495190528383290)

    @classmethod
    def conjugate_of(cls, v) -> "Perturbation":
        """zeta = v* for v with compact domain; rho_{v*} = h_dom(v)."""
        if isinstance(v, PolyhedralFn) and v.dimension == 2:
            dom = ConvexPolygon(v.points)
            f = lambda y: v.conjugate_eval(y)
            return cls(f, lambda y: dom.support(y),
                       max(abs(v.max_value()), abs(v.min_value())), None, "conjugate")
        plq = v.to_plq() if isinstance(v, PolyhedralFn) else v
        if not plq.compact:
            raise ValueError("v must have a compact domain")
        vs = plq.conjugate()
        lo, hi = plq.lo, plq.hi
        f = lambda y: vs(y[..., 0])
        rho = lambda y: np.maximum(lo * y[..., 0], hi * y[..., 0])
        bound = max(abs(plq.max_value()), abs(plq.min_value()))
        kinks = tuple(float(k) for k in vs.knots[1:-1])
        return cls(f, rho, bound, vs, "conjugate", max(abs(lo), abs(hi)), kinks)

    @classmethod
    def from_config(cls, cfg: dict) -> "Perturbation":
        return perturbation_from_config(cfg)


def sum_of(terms: Sequence[Perturbation]) -> Perturbation:
    terms = list(terms)
    f = lambda y: sum(t.func(y) for t in terms)
    rho = None
    if all(t.rho is not None for t in terms):
        rho = lambda y: sum(t.rho(y) for t in terms)
    bound = None if any(t.bound is None for t in terms) else sum(t.bound for t in terms)
    plq = None
    if all(t.plq is not None for t in terms):
        plq = terms[0].plq
        for t in terms[1:]:
            plq = plq + t.plq
    lip = None if any(t.lipschitz is None for t in terms) else sum(t.lipschitz for t in terms)
    kinks = tuple(sorted({k for t in terms for k in t.kinks}))
    return Perturbation(f, rho, bound, plq, " + ".join(t.label for t in terms), lip, kinks)


_ATOM_KEYS = {
    "support": {"polytope"},
    "norm": {"coeff"},
    "constant": {"value"},
    "soft_norm": {"coeff"},
    "bump": {"coeff"},
    "linear": {"vector"},
    "sum": {"terms"},
}


def perturbation_from_config(cfg: dict) -> Perturbation:
    """Build a perturbation from a tagged record such as {kind: norm, coeff: 2}."""
    if not isinstance(cfg, dict) or "kind" not in cfg:
        raise ValueError(f"perturbation record needs a 'kind': {cfg!r}")
    kind = cfg["kind"]
    if kind not in _ATOM_KEYS:
        raise ValueError(f"unknown perturbation kind {kind!r}")
    extra = set(cfg) - _ATOM_KEYS[kind] - {"kind"}
    if extra:
        raise ValueError(f"unknown keys for {kind}: {sorted(extra)}")
    if kind == "support":
        return Perturbation.support(cfg["polytope"])
    if kind == "norm":
        return Perturbation.norm(float(cfg.get("coeff", 1.0)))
    if kind == "constant":
        return Perturbation.constant(float(cfg["value"]))
    if kind == "soft_norm":
        return Perturbation.soft_norm(float(cfg.get("coeff", 1.0)))
    if kind == "bump":
        return Perturbation.bump(float(cfg.get("coeff", 1.0)))
    if kind == "linear":
        return Perturbation.linear(cfg["vector"])
    return sum_of([perturbation_from_config(t) for t in cfg["terms"]])


@dataclass
class LadderRecession:
    """Recession estimate zeta(R nu)/R on a radius ladder with a 1/R correction."""

    zeta: Perturbation
    ladder: tuple
    diffs: Array = field(default_factory=lambda: np.zeros(0))

    def __call__(self, nu) -> Array:
        nu = _as_points(nu)
        R1, R0 = self.ladder[-1], self.ladder[-2]
        e1 = self.zeta(R1 * nu) / R1
        e0 = self.zeta(R0 * nu) / R0
        # C_rec gives e(R) = rho + c/R + o(1/R); eliminate the 1/R term
        return (R1 * e1 - R0 * e0) / (R1 - R0)


def recession(zeta: Perturbation, ladder=DEFAULT_LADDER, *, n: int = 1, probe: Array | None = None):
    """Recession function rho_zeta: analytic when known, else a ladder estimate.

    Raises ``ValueError('recession estimate diverges')`` when successive ladder
    differences fail to decrease on the probe directions.
    """
    if zeta.rho is not None:
        return zeta.rho
    if probe is None:
        if n == 1:
            probe = np.array([[1.0], [-1.0]])
        else:
            th = np.linspace(0, 2 * np.pi, 16, endpoint=False)
            probe = np.stack([np.cos(th), np.sin(th)], axis=1)
    ests = np.array([zeta(R * probe) / R for R in ladder])
    diffs = np.abs(np.diff(ests, axis=0)).max(axis=1)
    if not np.all(np.isfinite(ests)) or np.any(diffs[1:] > diffs[:-1] * (1 + 1e-9) + 1e-14):
        raise ValueError("recession estimate diverges")
    return LadderRecession(zeta, tuple(ladder), diffs)


def plq_approximation(zeta: Perturbation, *, reach: float = 1e4, pieces: int = 1500, y0: float = 0.5) -> PLQFn:
    """Piecewise-quadratic interpolant of a 1D perturbation with linear tails.

    Nodes are geometrically graded, y = +-y0 (e^s - 1), so the relative
    spacing is uniform out to ``reach``; beyond it the tails follow rho.
    """
    if zeta.plq is not None:
        return zeta.plq
    smax = np.log1p(reach / y0)
    s = np.linspace(0.0, smax, 2 * pieces + 1)
    pos = y0 * np.expm1(s)
    y = np.concatenate([-pos[:0:-1], pos])
    v = zeta.eval1d(y)
    y3 = np.stack([y[0:-1:2], y[1::2], y[2::2]], axis=1)
    v3 = np.stack([v[0:-1:2], v[1::2], v[2::2]], axis=1)
    coefs = np.array([np.polyfit(y3[i], v3[i], 2) for i in range(len(y3))])
    rho = zeta.recession(np.array([[-1.0], [1.0]]))
    left = [0.0, -rho[0], v[0] + rho[0] * y[0]]
    right = [0.0, rho[1], v[-1] - rho[1] * y[-1]]
    knots = np.concatenate([[-INF], y[::2], [INF]])
    return PLQFn(knots, np.vstack([left, coefs, right]))


# --------------------------------------------------------------------------
# linear-time Legendre transform on grids
# --------------------------------------------------------------------------

@njit(cache=True)
def _llt_rows(x, F, y, out):  # pragma: no cover - compiled
    nx = x.shape[0]
    ny = y.shape[0]
    hx = np.empty(nx)
    hf = np.empty(nx)
    for r in range(F.shape[0]):
        m = 0
        for i in range(nx):
            f = F[r, i]
            if not np.isfinite(f):
                continue
            xi = x[i]
            while m >= 2:
                if (hf[m - 1] - hf[m - 2]) * (xi - hx[m - 2]) >= (f - hf[m - 2]) * (hx[m - 1] - hx[m - 2]):
                    m -= 1
                else:
                    break
            hx[m] = xi
            hf[m] = f
            m += 1
        if m == 0:
            for j in range(ny):
                out[r, j] = -np.inf
            continue
        k = 0
        for j in range(ny):
            yj = y[j]
            while k < m - 1 and (hf[k + 1] - hf[k]) <= yj * (hx[k + 1] - hx[k]):
                k += 1
            out[r, j] = hx[k] * yj - hf[k]


def llt_1d(x: Array, f: Array, y: Array) -> Array:
    """max_i (x_i y_j - f_i) for sorted x, y; +inf samples are skipped."""
    f2 = np.ascontiguousarray(np.atleast_2d(f), dtype=float)
    out = np.empty((f2.shape[0], len(y)))
    _llt_rows(np.ascontiguousarray(x, dtype=float), f2, np.ascontiguousarray(y, dtype=float), out)
    return out[0] if np.ndim(f) == 1 else out


def grid_conjugate(values: Array, axes: Sequence[Array], dual_axes: Sequence[Array]) -> Array:
    """Discrete conjugate sup over grid nodes, dimension by dimension."""
    if len(axes) == 1:
        return llt_1d(axes[0], values, dual_axes[0])
    G = llt_1d(axes[1], values, dual_axes[1])  # (N1, M2): sup over x2
    H = llt_1d(axes[0], np.ascontiguousarray((-G).T), dual_axes[0])  # (M2, M1)
    return H.T


# --------------------------------------------------------------------------
# conjugates
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ConjugateFn:
    """u* as an explicit max of affine functions, or as a grid on a dual box."""

    points: Array | None = None
    values: Array | None = None
    grid: GridFn | None = None
    warning: str | None = None

    def __call__(self, y):
        y = np.asarray(y, dtype=float)
        if self.grid is not None:
            return self.grid(y)
        if self.points.shape[1] == 1:
            return (y[..., None] * self.points[:, 0] - self.values).max(axis=-1)
        return (y @ self.points.T - self.values).max(axis=-1)

    def to_plq(self) -> PLQFn:
        return PolyhedralFn(self.points, self.values).to_plq().conjugate()


def _dual_axes(u: GridFn, dual_box=None, dual_shape=None):
    if dual_box is None:
        L = u.max_gradient() if np.any(np.isfinite(u.gradient)) else 0.0
        dual_box = tuple((-L - 1.0, L + 1.0) for _ in range(u.dimension))
    if dual_shape is None:
        dual_shape = tuple(s + (s + 1) % 2 for s in u.shape)  # odd, so 0 is a node
    elif np.isscalar(dual_shape):
        dual_shape = (int(dual_shape),) * u.dimension
    axes = tuple(np.linspace(a, b, s) for (a, b), s in zip(dual_box, dual_shape))
    return tuple(tuple(b) for b in dual_box), tuple(dual_shape), axes


def legendre(u, dual_box=None, dual_resolution=None):
    """Legendre-Fenchel transform on each track."""
    if isinstance(u, PolyhedralFn):
        return ConjugateFn(points=u.points, values=u.values)
    if isinstance(u, PLQFn):
        return u.conjugate()
    if isinstance(u, ConjugateFn) and u.grid is None:
        # conjugate of max_i(x_i y - z_i) is the lower envelope of (x_i, z_i)
        return PolyhedralFn(u.points, u.values)
    if isinstance(u, GridFn):
        box, shape, axes = _dual_axes(u, dual_box, dual_resolution)
        vals = grid_conjugate(u.values, u.axes, axes)
        warning = None
        L = u.max_gradient()
        if any(L > max(-a, b) for a, b in box):
            warning = "dual box does not contain the active slopes"
        return ConjugateFn(grid=GridFn(box, shape, vals), warning=warning)
    raise TypeError(f"cannot conjugate {type(u).__name__}")


def biconjugate(u):
    """u** on the same track (the closed convex envelope)."""
    if isinstance(u, PolyhedralFn):
        return legendre(legendre(u))
    if isinstance(u, PLQFn):
        return u.conjugate().conjugate().simplify()
    if isinstance(u, GridFn):
        box, shape, axes = _dual_axes(u)
        us = grid_conjugate(u.values, u.axes, axes)
        back = grid_conjugate(us, axes, u.axes)
        vals = np.where(u.contains(u.nodes), back, INF)
        return GridFn(u.box, u.shape, vals, domain=u.domain, extension=back)
    raise TypeError(f"cannot biconjugate {type(u).__name__}")


def _as_plq(u) -> PLQFn:
    if isinstance(u, PLQFn):
        return u
    if isinstance(u, PolyhedralFn):
        return u.to_plq()
    raise TypeError(f"expected a one-dimensional exact function, got {type(u).__name__}")


def _minkowski(A, B):
    if isinstance(A, Interval):
        return Interval(A.lo + B.lo, A.hi + B.hi)
    if isinstance(A, Disk) and isinstance(B, Disk):
        return Disk(tuple(np.add(A.center, B.center)), A.radius + B.radius)
    pa = A.to_polygon() if isinstance(A, Disk) else A
    pb = B.to_polygon() if isinstance(B, Disk) else B
    return ConvexPolygon((pa.vertices[:, None, :] + pb.vertices[None, :, :]).reshape(-1, 2))


def inf_conv(u, v):
    """Infimal convolution computed as (u* + v*)*."""
    if isinstance(u, GridFn) or isinstance(v, GridFn):
        if not (isinstance(u, GridFn) and isinstance(v, GridFn)):
            raise TypeError("both arguments must be on the grid track")
        L = max(u.max_gradient(), v.max_gradient())
        n = u.dimension
        dual_box = tuple((-L - 1.0, L + 1.0) for _ in range(n))
        shape = tuple(max(a, b) for a, b in zip(u.shape, v.shape))
        dshape = tuple(s + (s + 1) % 2 for s in shape)
        daxes = tuple(np.linspace(a, b, s) for (a, b), s in zip(dual_box, dshape))
        F = grid_conjugate(u.values, u.axes, daxes) + grid_conjugate(v.values, v.axes, daxes)
        dom = _minkowski(u.domain_body, v.domain_body)
        box = dom.bbox()
        out_axes = tuple(np.linspace(a, b, s) for (a, b), s in zip(box, shape))
        raw = grid_conjugate(F, daxes, out_axes)
        g = GridFn(box, shape, raw)
        vals = np.where(dom.contains(g.nodes, tol=1e-10), raw, INF)
        return GridFn(box, shape, vals, domain=dom, extension=raw)
    both_poly = isinstance(u, PolyhedralFn) and isinstance(v, PolyhedralFn)
    res = (_as_plq(u).conjugate() + _as_plq(v).conjugate()).conjugate()
    if both_poly:
        return res.to_polyhedral()
    return res


def inf_conv_direct(u: PolyhedralFn, v: PolyhedralFn) -> PolyhedralFn:
    """Direct inf-convolution: lower envelope of all generator sums."""
    x = (u.points[:, None, :] + v.points[None, :, :]).reshape(-1, u.dimension)
    z = (u.values[:, None] + v.values[None, :]).ravel()
    return PolyhedralFn(x, z)


def epi_scale(t: float, u):
    """Epi-multiplication t . u = t u(x / t); 0 . u is the indicator of {0}."""
    if t < 0:
        raise ValueError("epi-multiplication needs t >= 0")
    if isinstance(u, PolyhedralFn):
        if t == 0:
            return PolyhedralFn(np.zeros((1, u.dimension)), np.zeros(1))
        return PolyhedralFn(u.points * t, u.values * t)
    if isinstance(u, PLQFn):
        if t == 0:
            return PLQFn.point(0.0, 0.0)
        c = u.coef.copy()
        c[:, 0] /= t
        c[:, 2] *= t
        return PLQFn(u.knots * t, c)
    if isinstance(u, GridFn):
        if t == 0:
            raise ValueError("0 . u on the grid track is a single point; use the exact track")
        dom = u.domain_body
        if isinstance(dom, Interval):
            sdom = Interval(dom.lo * t, dom.hi * t)
        elif isinstance(dom, Disk):
            sdom = Disk(tuple(np.multiply(dom.center, t)), dom.radius * t)
        else:
            sdom = dom.scale(t)
        ext = None if u.extension is None else u.extension * t
        return GridFn(tuple((a * t, b * t) for a, b in u.box), u.shape, u.values * t, domain=sdom, extension=ext)
    raise TypeError(f"cannot epi-scale {type(u).__name__}")


# --------------------------------------------------------------------------
# the perturbation u_t = (u* + t zeta)*
# --------------------------------------------------------------------------

_PLQ_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()
_GRID_CACHE: "weakref.WeakKeyDictionary" = weakref.WeakKeyDictionary()


def _cached_plq_conjugate(u: PLQFn) -> PLQFn:
    if u not in _PLQ_CACHE:
        _PLQ_CACHE[u] = u.conjugate()
    return _PLQ_CACHE[u]


def _cached_zeta_plq(zeta: Perturbation) -> PLQFn:
    if zeta.plq is not None:
        return zeta.plq
    if zeta not in _PLQ_CACHE:
        _PLQ_CACHE[zeta] = plq_approximation(zeta)
    return _PLQ_CACHE[zeta]


def _grid_dual(u: GridFn):
    if u not in _GRID_CACHE:
        box, shape, axes = _dual_axes(u)
        us = grid_conjugate(u.values, u.axes, axes)
        nodes = axes[0][:, None] if len(axes) == 1 else np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1)
        _GRID_CACHE[u] = (box, shape, axes, us, nodes)
    return _GRID_CACHE[u]


def perturb(u, zeta: Perturbation, t: float):
    """u_t = (u* + t zeta)*.

    Exact track: PLQ algebra (exact for piecewise-linear zeta, otherwise zeta is
    replaced by a fine piecewise-quadratic interpolant).  Grid track: u* on the
    dual box, plus t zeta, conjugated back onto the bounding box of dom(u_t).
    """
    if t == 0 and not isinstance(u, GridFn):
        return u
    if isinstance(u, (PLQFn, PolyhedralFn)):
        if isinstance(u, PolyhedralFn) and u.dimension != 1:
            raise ValueError("exact perturbation is one-dimensional")
        us = _cached_plq_conjugate(_as_plq(u)) if isinstance(u, PLQFn) else _as_plq(u).conjugate()
        F = us + _cached_zeta_plq(zeta).scale(t)
        try:
            return F.conjugate()
        except ImproperFunction as exc:
            raise PerturbationError("perturbation too large") from exc
    if isinstance(u, GridFn):
        return _grid_perturb(u, zeta, t)
    raise TypeError(f"cannot perturb {type(u).__name__}")


def _grid_perturb(u: GridFn, zeta: Perturbation, t: float, out_axes=None) -> GridFn:
    from .wulff import DomainCollapsed, domain_evolution

    box, shape, daxes, us, dnodes = _grid_dual(u)
    F = us + t * zeta(dnodes)
    try:
        dom = domain_evolution(u.domain_body, zeta, t)
    except DomainCollapsed as exc:
        raise PerturbationError("perturbation too large: domain collapsed") from exc
    obox = dom.bbox()
    if any(b - a <= 0 for a, b in obox):
        raise PerturbationError("perturbation too large: domain has empty interior")
    oaxes = tuple(np.linspace(a, b, s) for (a, b), s in zip(obox, u.shape))
    raw = grid_conjugate(F, daxes, oaxes)
    if not np.all(np.isfinite(raw)):
        raise PerturbationError("perturbation too large")
    g = GridFn(obox, u.shape, raw)
    scale = 1.0 + max(abs(a) + abs(b) for a, b in obox)
    vals = np.where(dom.contains(g.nodes, tol=1e-10 * scale), raw, INF)
    return GridFn(obox, u.shape, vals, domain=dom, extension=raw)


# --------------------------------------------------------------------------
# Hopf-Lax consistency diagnostic
# --------------------------------------------------------------------------

@dataclass
class HopfLaxResult:
    max_residual: float
    residual: Array
    mask: Array
    step: float
    time_step: float


def _inner_distance(body, pts) -> Array:
    if isinstance(body, Interval):
        return np.minimum(pts - body.lo, body.hi - pts)
    a, _ = body.edges
    off = np.einsum("ij,ij->i", body.normals, a)
    flat = pts.reshape(-1, 2)
    d = np.full(len(flat), np.inf)
    for k in range(len(a)):
        d = np.minimum(d, off[k] - flat @ body.normals[k])
    return d.reshape(pts.shape[:-1])


def hopf_lax_residual(u: GridFn, zeta: Perturbation, t: float, h: float | None = None,
                      margin: int = 2, common_grid: bool = False) -> HopfLaxResult:
    """Residual of d_t w + zeta(grad_x w) for w(t, .) = (u* + t zeta)*.

    The time derivative is a central difference with step ``h`` (default: the
    grid step).  By default each time level is computed on its own output
    grid (the bounding box of its domain) and interpolated onto the nodes of
    w(t, .), which is the natural refinement study.  With ``common_grid`` all
    levels are conjugated onto the same nodes; the discrete Hopf-Lax formula
    is then consistent up to rounding wherever the maximizing dual node does
    not switch.  Only nodes at least ``margin`` grid steps inside both
    dom(w(t - h, .)) and dom(w(t, .)) are scored.
    """
    from .wulff import domain_evolution

    w = _grid_perturb(u, zeta, t)
    k = float(min(w.steps)) if h is None else float(h)
    if common_grid:
        box, shape, daxes, us, dnodes = _grid_dual(u)
        zd = zeta(dnodes)
        wp = grid_conjugate(us + (t + k) * zd, daxes, w.axes)
        wm = grid_conjugate(us + (t - k) * zd, daxes, w.axes)
    else:
        gp, gm = _grid_perturb(u, zeta, t + k), _grid_perturb(u, zeta, t - k)
        wp, wm = gp.interpolate(gp.filled, w.nodes), gm.interpolate(gm.filled, w.nodes)
    dt = (wp - wm) / (2 * k)
    grad = w.gradient
    zg = zeta.eval1d(grad) if w.dimension == 1 else zeta(grad)
    res = dt + zg
    dom_m = domain_evolution(u.domain_body, zeta, t - k)
    nodes = w.nodes
    reach = margin * float(max(w.steps))
    inner = _inner_distance(dom_m, nodes) >= reach
    inner &= _inner_distance(w.domain_body, nodes) >= reach
    inner &= np.isfinite(res)
    field_ = np.where(inner, res, np.nan)
    return HopfLaxResult(float(np.nanmax(np.abs(field_))), field_, inner, float(max(w.steps)), k)
