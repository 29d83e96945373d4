"""Weighted epigraph measures, surface-area and moment measures, and the bulk
and boundary integrals of the first-variation formula.

The measure on R^n x R is d mu(x, z) = phi(z) psi(x) |x|^{q-n} dz dx, so the
measure of an epigraph is

    mu(u) = int_{dom u} Phi(u(x)) psi(x) |x|^{q-n} dx,   Phi(t) = int_t^oo phi.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy.special import beta as beta_fn
from scipy.special import erf, erfcx, gamma

from .convexfn import GridFn, PLQFn, PolyhedralFn
from .geometry import ConvexPolygon, Interval, interior_point, origin_in_interior
from .quadrature import (adaptive_integrate, boundary_rule, composite_nodes, fan_rule, gl_rule,
                         pairwise_sum, power_weighted_integral)

Array = np.ndarray
SQRT_PI = np.sqrt(np.pi)


class SingularConfiguration(ValueError):
    pass


# --------------------------------------------------------------------------
# weights
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class WeightSpec:
    """(phi, Phi, psi, q) describing d mu = phi(z) psi(x) |x|^{q-n} dz dx.

    ``phi`` is ``"exp"`` (e^{-z}) or a table {"z": [...], "phi": [...]};
    ``psi`` is ``"one"`` or ``"gauss"`` (the standard Gaussian density);
    ``q=None`` means no radial factor.
    """

    phi: object = "exp"
    psi: str = "one"
    q: float | None = None

    def __post_init__(self):
        if self.psi not in ("one", "gauss"):
            raise ValueError(f"unknown psi {self.psi!r}")
        if self.q is not None and not self.q > 0:
            raise ValueError("q must be positive")
        if isinstance(self.phi, dict):
            extra = set(self.phi) - {"z", "phi"}
            if extra or not {"z", "phi"} <= set(self.phi):
                raise ValueError("phi table needs exactly the keys 'z' and 'phi'")
            z = np.asarray(self.phi["z"], dtype=float)
            p = np.asarray(self.phi["phi"], dtype=float)
            if z.ndim != 1 or z.shape != p.shape or len(z) < 10 or np.any(np.diff(z) <= 0):
                raise ValueError("phi table needs >= 10 increasing z values")
            if np.any(p < 0) or p[-1] <= 0 or p[-1] >= p[-10]:
                raise ValueError("tabulated phi must be nonnegative and decaying")
            # exponential tail A e^{-c z} fitted to the last 10 points
            c, logA = np.polyfit(z[-10:], np.log(np.maximum(p[-10:], 1e-300)), 1)
            c = -c
            if c <= 0:
                raise ValueError("tabulated phi does not decay")
            # cumulative trapezoid from the right end, plus the tail mass
            seg = 0.5 * (p[1:] + p[:-1]) * np.diff(z)
            tail = p[-1] / c
            cum = np.concatenate([np.cumsum(seg[::-1])[::-1], [0.0]]) + tail
            object.__setattr__(self, "_table", (z, p, c, cum))
        elif self.phi != "exp":
            raise ValueError(f"unknown phi {self.phi!r}")

    @property
    def is_exp(self) -> bool:
        return isinstance(self.phi, str)

    @property
    def plain(self) -> bool:
        """phi = exp, psi = 1 and no radial factor."""
        return self.is_exp and self.psi == "one" and self.q is None

    def density(self, z) -> Array:
        z = np.asarray(z, dtype=float)
        if self.is_exp:
            return np.exp(-z)
        zt, p, c, _ = self._table
        inner = np.interp(z, zt, p)
        return np.where(z > zt[-1], p[-1] * np.exp(-c * (z - zt[-1])), inner)

    def survival(self, t) -> Array:
        """Phi(t) = int_t^oo phi; trapezoid on the table, exponential tail past it."""
        t = np.asarray(t, dtype=float)
        if self.is_exp:
            return np.exp(-t)
        zt, p, c, cum = self._table
        past = p[-1] * np.exp(-c * (t - zt[-1])) / c
        k = np.clip(np.searchsorted(zt, t, side="right") - 1, 0, len(zt) - 2)
        tc = np.clip(t, zt[0], zt[-1])
        pt = np.interp(tc, zt, p)
        partial = 0.5 * (pt + p[k + 1]) * (zt[k + 1] - tc)
        inside = cum[k + 1] + partial
        before = cum[0] + p[0] * (zt[0] - t)
        return np.where(t >= zt[-1], past, np.where(t < zt[0], before, inside))

    def spatial(self, x, n: int) -> Array:
        x = np.asarray(x, dtype=float)
        if self.psi == "one":
            return np.ones(x.shape if n == 1 else x.shape[:-1])
        r2 = x * x if n == 1 else np.sum(x * x, axis=-1)
        return np.exp(-0.5 * r2) / (2 * np.pi) ** (n / 2)

    def radial_power(self, n: int) -> float:
        return 0.0 if self.q is None else float(self.q) - n

    def radial(self, x, n: int) -> Array:
        p = self.radial_power(n)
        x = np.asarray(x, dtype=float)
        if p == 0.0:
            return np.ones(x.shape if n == 1 else x.shape[:-1])
        r = np.abs(x) if n == 1 else np.linalg.norm(x, axis=-1)
        with np.errstate(divide="ignore"):
            return r ** p

    def to_dict(self) -> dict:
        phi = self.phi if self.is_exp else {k: list(map(float, v)) for k, v in self.phi.items()}
        return {"phi": phi, "psi": self.psi, "q": self.q}

    @classmethod
    def from_config(cls, cfg: dict | None) -> "WeightSpec":
        if cfg is None:
            return cls()
        extra = set(cfg) - {"phi", "psi", "q"}
        if extra:
            raise ValueError(f"unknown weight keys: {sorted(extra)}")
        phi = cfg.get("phi", "exp")
        if isinstance(phi, dict):
            if set(phi) != {"table"}:
                raise ValueError("tabulated phi must be given as {table: {z: [...], phi: [...]}}")
            phi = phi["table"]
        return cls(phi, cfg.get("psi", "one"), cfg.get("q"))


# --------------------------------------------------------------------------
# atomic measures
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class DiscreteMeasure:
    carrier: str
    locations: Array
    weights: Array
    total: float = field(init=False)

    def __post_init__(self):
        loc = np.asarray(self.locations, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if len(loc) != len(w):
            raise ValueError("locations and weights differ in length")
        if np.any(w < 0):
            raise ValueError("atom weights must be nonnegative")
        object.__setattr__(self, "locations", loc)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "total", pairwise_sum(w))

    def integrate(self, f: Callable[[Array], Array]) -> float:
        if len(self.weights) == 0:
            return 0.0
        return pairwise_sum(np.asarray(f(self.locations), dtype=float) * self.weights)

    def __len__(self) -> int:
        return len(self.weights)


# --------------------------------------------------------------------------
# exact-track helpers (one-dimensional PLQ functions)
# --------------------------------------------------------------------------

def _plq(u) -> PLQFn:
    if isinstance(u, PolyhedralFn):
        return u.to_plq()
    return u


def _exp_piece(coef, l: float, r: float) -> float:
    """int_l^r exp(-(a x^2 + b x + c)) dx in a cancellation-free form."""
    a, b, c = coef
    if r <= l:
        return 0.0
    if a == 0.0:
        if b == 0.0:
            return float(np.exp(-c) * (r - l))
        # e^{-c - b x} integrated; anchor at the end with the smaller exponent
        if b > 0:
            return float(np.exp(-c - b * l) * -np.expm1(-b * (r - l)) / b)
        return float(np.exp(-c - b * r) * -np.expm1(b * (r - l)) / -b)
    if a < 0.0:
        return adaptive_integrate(lambda x: np.exp(-((a * x + b) * x + c)), l, r, rtol=1e-14)[0]
    if np.isfinite(l) and np.isfinite(r) and max(abs(2 * a * l + b), abs(2 * a * r + b)) * (r - l) <= 2.0:
        # the exponent varies by O(1) at most: the erfcx difference would cancel,
        # while a Gauss rule is accurate to rounding
        g, wg = gl_rule(16)
        x = l + (r - l) * g
        return float(np.sum(wg * np.exp(-((a * x + b) * x + c))) * (r - l))
    s = np.sqrt(a)
    m = -b / (2 * a)
    al, be = s * (l - m), s * (r - m)
    ul = (a * l + b) * l + c if np.isfinite(l) else np.inf
    ur = (a * r + b) * r + c if np.isfinite(r) else np.inf
    k = SQRT_PI / (2 * s)
    if al >= 0:
        hi_term = 0.0 if not np.isfinite(r) else np.exp(-ur) * erfcx(be)
        return float(k * (np.exp(-ul) * erfcx(al) - hi_term))
    if be <= 0:
        lo_term = 0.0 if not np.isfinite(l) else np.exp(-ul) * erfcx(-al)
        return float(k * (np.exp(-ur) * erfcx(-be) - lo_term))
    v0 = c - b * b / (4 * a)
    return float(k * np.exp(-v0) * (erf(be) - erf(al)))


def _power_piece(p: float, l: float, r: float) -> float:
    """int_l^r |x|^p dx."""
    F = lambda x: np.sign(x) * np.abs(x) ** (p + 1) / (p + 1)
    return float(F(r) - F(l))


def _piece_integral(g: Callable[[Array], Array], l: float, r: float, w: WeightSpec,
                    breakpoints=(), rtol: float = 1e-13) -> float:
    """int_l^r g(x) psi(x) |x|^{q-1} dx on one smooth piece."""
    p = w.radial_power(1)
    if w.psi == "one":
        h = g
    else:
        h = lambda x: g(x) * w.spatial(x, 1)
    if p == 0.0:
        return adaptive_integrate(h, l, r, rtol=rtol, breakpoints=breakpoints)[0]
    return power_weighted_integral(h, l, r, p, rtol=rtol, breakpoints=breakpoints)


def _exact_measure(u: PLQFn, w: WeightSpec) -> tuple[float, float]:
    if u.is_point:
        return 0.0, 0.0
    total = 0.0
    p = w.radial_power(1)
    for (l, r), c in zip(zip(u.knots[:-1], u.knots[1:]), u.coef):
        if r <= l:
            continue
        if w.plain:
            total += _exp_piece(c, l, r)
        elif w.is_exp and w.psi == "one" and c[0] == 0.0 and c[1] == 0.0:
            total += np.exp(-c[2]) * _power_piece(p, l, r)
        else:
            f = lambda x, c=c: w.survival((c[0] * x + c[1]) * x + c[2])
            total += _piece_integral(f, l, r, w)
    return float(total), 1e-15 * abs(total)


# --------------------------------------------------------------------------
# grid-track quadrature
# --------------------------------------------------------------------------

def _box_matches(u: GridFn, dom) -> bool:
    if not isinstance(dom, (ConvexPolygon, Interval)):
        return False
    if isinstance(dom, Interval):
        (a, b), = u.box
        return abs(dom.lo - a) + abs(dom.hi - b) <= 1e-12 * (1 + abs(a) + abs(b))
    if dom.n_vertices != 4:
        return False
    box = ConvexPolygon.box(*zip(*u.box))
    return dom.hausdorff(box) <= 1e-12 * (1 + max(abs(a) + abs(b) for a, b in u.box))


def _trapezoid_weights(u: GridFn) -> Array:
    ws = []
    for h, s in zip(u.steps, u.shape):
        wk = np.full(s, h)
        wk[0] = wk[-1] = 0.5 * h
        ws.append(wk)
    return ws[0] if u.dimension == 1 else np.outer(ws[0], ws[1])


def fan_resolution(u: GridFn, dom) -> tuple[int, int]:
    N = max(u.shape)
    E = dom.n_vertices if isinstance(dom, ConvexPolygon) else 8
    return max(8, N // 8), max(2, int(np.ceil(4 * N / E)))


def grid_rule(u: GridFn, w: WeightSpec) -> tuple[Array, Array, bool]:
    """Quadrature points and weights over dom(u) including psi |x|^{q-n}.

    Returns (points, weights, on_nodes).  When the domain is the grid box and
    there is no singular weight, the rule is the trapezoid rule on the nodes;
    otherwise a Gauss fan rule about an interior point (the origin when the
    radial factor is singular).
    """
    dom = u.domain_body
    n = u.dimension
    p = w.radial_power(n)
    if p < 0 and not origin_in_interior(dom):
        if not dom.contains(np.zeros(n) if n > 1 else 0.0, tol=0.0):
            pass  # integrable and smooth away from the origin
        else:
            raise SingularConfiguration("singular boundary configuration")
    if p >= 0 and _box_matches(u, dom):
        X = u.nodes
        wt = _trapezoid_weights(u) * w.spatial(X, n) * w.radial(X, n)
        return X, wt, True
    if n == 1:
        lo, hi = dom.lo, dom.hi
        N = u.shape[0]
        if p != 0.0 and lo < 0.0 < hi:
            xa, wa = _singular_line_rule(lo, 0.0, p, N)
            xb, wb = _singular_line_rule(0.0, hi, p, N)
            X, wt = np.concatenate([xa, xb]), np.concatenate([wa, wb])
        else:
            X, wt = composite_nodes(lo, hi, N, order=4)
            wt = wt * w.radial(X, 1)
        return X, wt * w.spatial(X, 1), False
    center = np.zeros(2) if p < 0 else np.asarray(interior_point(dom), dtype=float)
    sp, wp = fan_resolution(u, dom)
    bnd = dom.boundary() if isinstance(dom, ConvexPolygon) else dom.boundary(arcs=8)
    X, wt = fan_rule(bnd, center, s_panels=sp, w_panels=wp, order=6,
                     radial_power=p if p != 0.0 and np.allclose(center, 0) else None)
    if p != 0.0 and not np.allclose(center, 0):
        wt = wt * w.radial(X, 2)
    return X, wt * w.spatial(X, 2), False


def _singular_line_rule(a: float, b: float, p: float, panels: int):
    """Composite rule on [a, b] for |x|^p g(x) with the singular end at 0."""
    from .quadrature import gj_rule, gl_rule

    sign = 1.0 if b > 0 else -1.0
    L = abs(b - a)
    edges = np.linspace(0.0, L, panels + 1)
    s, wj = gj_rule(8, p)
    xs, ws = [edges[1] * s], [wj * edges[1] ** (p + 1)]
    g, wg = gl_rule(8)
    lo, hi = edges[1:-1], edges[2:]
    x2 = (lo[:, None] + (hi - lo)[:, None] * g[None, :]).ravel()
    w2 = ((hi - lo)[:, None] * wg[None, :]).ravel() * x2 ** p
    x = np.concatenate(xs + [x2])
    wt = np.concatenate(ws + [w2])
    return sign * x, wt


def _grid_values(u: GridFn, X: Array, on_nodes: bool) -> Array:
    if on_nodes:
        return u.values
    return u.interpolate(u.filled, X)


def _grid_gradient(u: GridFn, X: Array, on_nodes: bool) -> Array:
    if on_nodes:
        return u.gradient_filled
    return u.interpolate(u.gradient_filled, X)


# --------------------------------------------------------------------------
# epigraph measure
# --------------------------------------------------------------------------

def epigraph_measure(u, w: WeightSpec | None = None, *, return_error: bool = False):
    """mu(u) = int_{dom u} Phi(u) psi |x|^{q-n} dx."""
    w = WeightSpec() if w is None else w
    if isinstance(u, GridFn):
        X, wt, on_nodes = grid_rule(u, w)
        vals = w.survival(_grid_values(u, X, on_nodes))
        val = pairwise_sum(vals * wt)
        err = float(np.max(u.steps)) ** 2 * abs(val)
    else:
        val, err = _exact_measure(_plq(u), w)
    if not np.isfinite(val):
        raise ValueError("non-integrable configuration")
    return (val, err) if return_error else val


def density_integral(u, w: WeightSpec | None = None) -> float:
    """int_{dom u} phi(u) psi |x|^{q-n} dx, the total mass of the moment measure."""
    w = WeightSpec() if w is None else w
    if isinstance(u, GridFn):
        X, wt, on_nodes = grid_rule(u, w)
        return pairwise_sum(w.density(_grid_values(u, X, on_nodes)) * wt)
    u = _plq(u)
    if w.plain:
        return _exact_measure(u, w)[0]
    total = 0.0
    for (l, r), c in zip(zip(u.knots[:-1], u.knots[1:]), u.coef):
        if r > l:
            total += _piece_integral(lambda x, c=c: w.density((c[0] * x + c[1]) * x + c[2]), l, r, w)
    return float(total)


def _kink_preimages(c, l: float, r: float, kinks) -> list[float]:
    a, b, _ = c
    if a == 0.0:
        return []
    xs = [(k - b) / (2 * a) for k in kinks]
    return [x for x in xs if l < x < r]


def bulk_integral(u, zeta, w: WeightSpec | None = None) -> float:
    """int_{dom u} zeta(grad u) phi(u) psi |x|^{q-n} dx."""
    w = WeightSpec() if w is None else w
    if isinstance(u, GridFn):
        X, wt, on_nodes = grid_rule(u, w)
        vals = _grid_values(u, X, on_nodes)
        g = _grid_gradient(u, X, on_nodes)
        zg = zeta.eval1d(g) if u.dimension == 1 else zeta(g)
        out = pairwise_sum(zg * w.density(vals) * wt)
    else:
        u = _plq(u)
        out = 0.0
        for (l, r), c in zip(zip(u.knots[:-1], u.knots[1:]), u.coef):
            if r <= l:
                continue
            if c[0] == 0.0:
                # constant gradient on the piece
                zc = float(zeta.eval1d(np.array(c[1])))
                if zc == 0.0:
                    continue
                if w.plain:
                    out += zc * _exp_piece(c, l, r)
                    continue
            f = lambda x, c=c: (zeta.eval1d(2 * c[0] * x + c[1])
                                * w.density((c[0] * x + c[1]) * x + c[2]))
            out += _piece_integral(f, l, r, w, breakpoints=_kink_preimages(c, l, r, zeta.kinks))
    if not np.isfinite(out):
        raise ValueError("divergent bulk integral")
    return float(out)


def _edge_weights_2d(dom, N: int, order: int = 8):
    E = dom.n_vertices if isinstance(dom, ConvexPolygon) else 8
    bnd = dom.boundary() if isinstance(dom, ConvexPolygon) else dom.boundary(arcs=8)
    return boundary_rule(bnd, w_panels=max(2, int(np.ceil(4 * N / E))), order=order)


def boundary_integral(u, zeta, w: WeightSpec | None = None) -> float:
    """int_{bd dom u} rho_zeta(N(y)) Phi(u(y)) psi(y) |y|^{q-n} dH^{n-1}(y)."""
    w = WeightSpec() if w is None else w
    if isinstance(u, GridFn):
        dom = u.domain_body
        n = u.dimension
        if n == 1:
            return _boundary_1d(dom.lo, dom.hi, u.interpolate(u.filled, np.array([dom.lo, dom.hi])),
                                zeta, w)
        if w.radial_power(2) < 0 and np.any(dom.distance(np.zeros(2)) <= 0) and not origin_in_interior(dom):
            raise SingularConfiguration("singular boundary configuration")
        pts, nrm, wt, _ = _edge_weights_2d(dom, max(u.shape))
        vals = u.interpolate(u.filled, pts)
        rho = zeta.recession(nrm)
        return pairwise_sum(rho * w.survival(vals) * w.spatial(pts, 2) * w.radial(pts, 2) * wt)
    u = _plq(u)
    return _boundary_1d(u.lo, u.hi, np.array(u.end_values()), zeta, w)


def _boundary_1d(lo: float, hi: float, vals, zeta, w: WeightSpec) -> float:
    if lo == hi:
        raise ValueError("domain has empty interior")
    if w.radial_power(1) < 0 and (lo == 0.0 or hi == 0.0):
        raise SingularConfiguration("singular boundary configuration")
    rho = zeta.recession(np.array([[-1.0], [1.0]]))
    pts = np.array([lo, hi])
    dens = w.survival(np.asarray(vals, dtype=float)) * w.spatial(pts, 1) * w.radial(pts, 1)
    return float(rho[0] * dens[0] + rho[1] * dens[1])


# --------------------------------------------------------------------------
# measures of bodies
# --------------------------------------------------------------------------

def surface_area_measure(K: ConvexPolygon) -> DiscreteMeasure:
    """S_K: one atom per edge at its outer normal, weighted by edge length."""
    if K.n_vertices < 3 or K.area <= 0:
        raise ValueError("degenerate body")
    return DiscreteMeasure("sphere", K.normals, K.edge_lengths)


def weighted_surface_area_measure(K: ConvexPolygon, Psi: Callable[[Array], Array] | None = None,
                                  q: float | None = None, *, strict: bool = True,
                                  rtol: float = 1e-12) -> DiscreteMeasure:
    """S_{mu,K}: per-edge atoms with weight int_edge Psi(X) |x|^{q-1} dH^1(X).

    ``Psi`` acts on points (..., 2) = (x, z).  With ``q`` given, the origin must
    project into the interior of K's shadow on the horizontal axis unless
    ``strict`` is False; edges lying on the singular line {x = 0} then get
    weight +inf.
    """
    if K.n_vertices < 3 or K.area <= 0:
        raise ValueError("degenerate body")
    Psi = (lambda X: np.ones(X.shape[:-1])) if Psi is None else Psi
    if q is not None:
        (xl, xr), _ = K.bbox()
        if strict and not xl < 0.0 < xr:
            raise SingularConfiguration("singular weight needs the origin inside the projection of K")
    p = 0.0 if q is None else float(q) - 1.0
    a, b = K.edges
    out = np.empty(len(a))
    for i, (A, B) in enumerate(zip(a, b)):
        d = B - A
        L = float(np.hypot(*d))
        if p == 0.0:
            g = lambda s: Psi(A + s[:, None] * d)
            out[i] = L * adaptive_integrate(g, 0.0, 1.0, rtol=rtol)[0]
        elif d[0] == 0.0:
            if A[0] == 0.0:
                out[i] = np.inf
            else:
                g = lambda s: Psi(A + s[:, None] * d)
                out[i] = L * abs(A[0]) ** p * adaptive_integrate(g, 0.0, 1.0, rtol=rtol)[0]
        else:
            # substitute x = A_x + s d_x so the singular factor is |x|^p
            g = lambda x: Psi(A + ((x - A[0]) / d[0])[:, None] * d)
            out[i] = L / abs(d[0]) * abs(power_weighted_integral(g, A[0], B[0], p, rtol=rtol))
    return DiscreteMeasure("sphere", K.normals, out)


# --------------------------------------------------------------------------
# measures of functions
# --------------------------------------------------------------------------

def _bin_atoms(grad: Array, mass: Array, bins: int, carrier: str = "R^n") -> DiscreteMeasure:
    """Regular bins over the gradient range; each atom sits at the mass
    centroid of its bin."""
    keep = mass > 0
    grad, mass = grad[keep], mass[keep]
    if grad.ndim == 1:
        grad = grad[:, None]
    n = grad.shape[1]
    lo, hi = grad.min(axis=0), grad.max(axis=0)
    span = np.where(hi > lo, hi - lo, 1.0)
    idx = np.clip(((grad - lo) / span * bins).astype(np.int64), 0, bins - 1)
    flat = np.ravel_multi_index(tuple(idx.T), (bins,) * n)
    uniq, inv = np.unique(flat, return_inverse=True)
    m = np.bincount(inv, weights=mass)
    loc = np.stack([np.bincount(inv, weights=mass * grad[:, k]) for k in range(n)], axis=1) / m[:, None]
    return DiscreteMeasure(carrier, loc, m)


def moment_measure(u, w: WeightSpec | None = None, bins: int = 256) -> DiscreteMeasure:
    """Push-forward of phi(u) psi |x|^{q-n} dx on dom(u) under grad u, binned."""
    w = WeightSpec() if w is None else w
    if isinstance(u, GridFn):
        X, wt, on_nodes = grid_rule(u, w)
        vals = _grid_values(u, X, on_nodes)
        g = _grid_gradient(u, X, on_nodes)
        mass = w.density(vals) * wt
        g = g.reshape(-1, u.dimension) if u.dimension > 1 else g.ravel()
        return _bin_atoms(g, mass.ravel(), bins)
    u = _plq(u)
    xs, ms, gs = [], [], []
    affine_atoms: dict[float, float] = {}
    for (l, r), c in zip(zip(u.knots[:-1], u.knots[1:]), u.coef):
        if r <= l:
            continue
        if c[0] == 0.0:
            mass = _piece_integral(lambda x, c=c: w.density(c[1] * x + c[2]), l, r, w) if not w.plain \
                else _exp_piece(c, l, r)
            affine_atoms[float(c[1])] = affine_atoms.get(float(c[1]), 0.0) + mass
            continue
        x, wx = composite_nodes(l, r, 64, order=8)
        xs.append(x)
        ms.append(wx * w.density((c[0] * x + c[1]) * x + c[2]) * w.spatial(x, 1) * w.radial(x, 1))
        gs.append(2 * c[0] * x + c[1])
    atoms_loc = list(affine_atoms)
    atoms_w = [affine_atoms[k] for k in atoms_loc]
    if gs:
        binned = _bin_atoms(np.concatenate(gs), np.concatenate(ms), bins)
        atoms_loc += list(binned.locations[:, 0])
        atoms_w += list(binned.weights)
    return DiscreteMeasure("R^n", np.array(atoms_loc, dtype=float).reshape(-1, 1), np.array(atoms_w))


def surface_measure_fn(u, w: WeightSpec | None = None, density: str = "phi",
                       bins: int = 256) -> DiscreteMeasure:
    """Push-forward of density(u(y)) psi |y|^{q-n} dH^{n-1} on bd dom(u) under
    the Gauss map of dom(u).  ``density`` is "phi" (e^{-u} for the exponential
    weight) or "Phi" (the survival function, as in the boundary term)."""
    w = WeightSpec() if w is None else w
    dens = w.density if density == "phi" else w.survival
    if density not in ("phi", "Phi"):
        raise ValueError("density must be 'phi' or 'Phi'")
    if isinstance(u, GridFn) and u.dimension == 2:
        dom = u.domain_body
        pts, nrm, wt, seg = _edge_weights_2d(dom, max(u.shape))
        mass = dens(u.interpolate(u.filled, pts)) * w.spatial(pts, 2) * w.radial(pts, 2) * wt
        if isinstance(dom, ConvexPolygon):
            m = np.bincount(seg, weights=mass, minlength=dom.n_vertices)
            return DiscreteMeasure("sphere", dom.normals, m)
        return _bin_atoms(nrm, mass, bins, "sphere")
    if isinstance(u, GridFn):
        lo, hi = u.domain_body.lo, u.domain_body.hi
        vals = u.interpolate(u.filled, np.array([lo, hi]))
    else:
        uu = _plq(u)
        lo, hi = uu.lo, uu.hi
        vals = np.array(uu.end_values())
    pts = np.array([lo, hi])
    m = dens(vals) * w.spatial(pts, 1) * w.radial(pts, 1)
    return DiscreteMeasure("sphere", np.array([[-1.0], [1.0]]), m)


# --------------------------------------------------------------------------
# change of variables between the epigraph boundary and the domain
# --------------------------------------------------------------------------

def lower_hemisphere_integral(K: ConvexPolygon, eta: Callable[[Array], Array]) -> float:
    """int over the open lower half-circle of eta dS_K."""
    S = surface_area_measure(K)
    low = S.locations[:, 1] < 0
    return pairwise_sum(eta(S.locations[low]) * S.weights[low])


def domain_side_integral(u, eta: Callable[[Array], Array]) -> float:
    """int_{dom u} eta((u', -1)/sqrt(1+u'^2)) sqrt(1+u'^2) dx."""
    u = _plq(u)
    total = 0.0
    for (l, r), c in zip(zip(u.knots[:-1], u.knots[1:]), u.coef):
        if r <= l:
            continue

        def f(x, c=c):
            g = 2 * c[0] * x + c[1]
            s = np.sqrt(1 + g * g)
            nu = np.stack([g / s, -1 / s], axis=-1)
            return eta(nu) * s

        total += adaptive_integrate(f, l, r, rtol=1e-13)[0]
    return float(total)


# --------------------------------------------------------------------------
# singular sphere integrals and tail certificates
# --------------------------------------------------------------------------

def sphere_area(n: int) -> float:
    """|S^{n-1}|, the surface area of the unit sphere in R^n."""
    return float(2 * np.pi ** (n / 2) / gamma(n / 2))


def sphere_singular_closed_form(q: float, n: int) -> float:
    """int_{S^n} |pr_H nu|^{q-n} d nu = |S^{n-1}| B(1/2, q/2)."""
    return sphere_area(n) * float(beta_fn(0.5, q / 2))


def sphere_singular_integral(q: float, n: int, panels: int = 16, order: int = 8) -> float:
    """Latitude quadrature of int_{S^n} |pr_H nu|^{q-n} d nu.

    With nu = (cos(phi) omega, sin(phi)) the integrand becomes
    |S^{n-1}| cos(phi)^{q-1}; near the poles cos(phi) = sin(s) with s the
    colatitude, integrated by a Gauss-Jacobi panel.
    """
    from .quadrature import gj_rule, gl_rule

    p = q - 1.0
    edges = np.linspace(0.0, np.pi / 2, panels + 1)
    h = edges[1]
    s, wj = gj_rule(order, p)
    s0 = h * s
    # sin(s)^p = s^p (sin(s)/s)^p; the s^p factor is in the Jacobi weight
    first = float(np.sum(wj * (np.sinc(s0 / np.pi)) ** p) * h ** (p + 1))
    g, wg = gl_rule(order)
    lo, hi = edges[1:-1], edges[2:]
    x = lo[:, None] + (hi - lo)[:, None] * g[None, :]
    rest = float(np.sum((hi - lo)[:, None] * wg[None, :] * np.sin(x) ** p))
    return sphere_area(n) * 2 * (first + rest)


@dataclass
class DominationCertificate:
    A: float
    c: float
    holds: bool


def exponential_domination(u, c: float = 1.0) -> DominationCertificate:
    """Constants with e^{-u(x)} <= A e^{-c|x|} on the sample nodes."""
    if isinstance(u, GridFn):
        X = u.nodes[u.finite]
        vals = u.values[u.finite]
        r = np.abs(X) if u.dimension == 1 else np.linalg.norm(X, axis=-1)
    else:
        uu = _plq(u)
        X = np.linspace(uu.lo, uu.hi, 4097)
        vals = uu(X)
        r = np.abs(X)
    A = float(np.max(np.exp(-vals + c * r)))
    holds = bool(np.all(np.exp(-vals) <= A * np.exp(-c * r) * (1 + 1e-12)))
    return DominationCertificate(A, c, holds)
