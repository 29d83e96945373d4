"""Both sides of the first-variation identities, computed independently.

The left side is a finite-difference derivative of a measure along a
perturbation, extrapolated over a step ladder; the right side is the bulk
plus boundary integral (or the weighted surface-area integral for bodies).
"""
from __future__ import annotations

import time
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from .convexfn import GridFn, ImproperFunction, PolyhedralFn, ceil_body, floor_body
from .geometry import EMPTY, ConvexPolygon, origin_in_interior
from .measures import (SingularConfiguration, WeightSpec, boundary_integral, bulk_integral,
                       epigraph_measure, weighted_surface_area_measure)
from .quadrature import gj_rule, gl_rule, pairwise_sum
from .transform import Perturbation, PerturbationError, epi_scale, inf_conv, perturb
from .wulff import DomainCollapsed, SphericalFn, wulff_flow

Array = np.ndarray

EXACT_TOL = 1e-9
DEFAULT_H0 = 1e-2
DEFAULT_STEPS = 5


def grid_tolerance(resolution: int) -> float:
    """Relative pass tolerance on the grid track."""
    return 0.01 if resolution >= 512 else 0.02


# --------------------------------------------------------------------------
# Richardson extrapolation
# --------------------------------------------------------------------------

@dataclass
class Extrapolation:
    steps: list
    estimates: list
    value: float
    order: float
    tableau: list


def richardson(hs: Sequence[float], values: Sequence[float], orders: Sequence[int],
               use_last: int | None = None) -> Extrapolation:
    """Extrapolate D(h) = D + c1 h^{p1} + c2 h^{p2} + ... over halving steps.

    ``use_last`` restricts the tableau to the finest values.  The observed
    order is log2 of the ratio of successive differences of the raw estimates
    (nan when the differences are at rounding level or fewer than 3 points).
    """
    hs = [float(h) for h in hs]
    vals = [float(v) for v in values]
    if use_last is not None:
        hs, vals = hs[-use_last:], vals[-use_last:]
    table = [list(vals)]
    for j, p in enumerate(orders[: len(vals) - 1]):
        prev = table[-1]
        r = (hs[0] / hs[1]) ** p
        table.append([(r * prev[i + 1] - prev[i]) / (r - 1) for i in range(len(prev) - 1)])
    order = float("nan")
    if len(vals) >= 3:
        d1, d2 = vals[-3] - vals[-2], vals[-2] - vals[-1]
        floor = 256 * np.finfo(float).eps * max(1.0, abs(vals[-1])) / hs[-1]
        if abs(d2) > floor and abs(d1) > floor:
            order = float(np.log2(abs(d1 / d2)))
    return Extrapolation(hs, vals, table[-1][-1], order, table)


def ladder(h0: float = DEFAULT_H0, steps: int = DEFAULT_STEPS) -> list[float]:
    return [h0 / 2**k for k in range(steps)]


# --------------------------------------------------------------------------
# reports
# --------------------------------------------------------------------------

@dataclass
class VariationReport:
    scenario: str
    mode: str
    ladder: list
    lhs: float
    rhs_bulk: float
    rhs_boundary: float
    rhs_total: float
    abs_err: float
    rel_err: float
    passed: bool
    runtimes: dict = field(default_factory=dict)
    order: float = float("nan")
    track: str = "exact"
    grid: int | None = None
    tolerance: float = EXACT_TOL
    notes: str = ""

    @classmethod
    def build(cls, scenario, mode, lad, ext: Extrapolation, bulk, boundary, *, track, tol,
              relative=False, grid=None, runtimes=None, notes="") -> "VariationReport":
        total = bulk + boundary
        lhs = ext.value
        abs_err = abs(lhs - total)
        rel_err = abs_err / abs(total) if total != 0 else abs_err
        ok = (rel_err if relative else abs_err) <= tol
        rows = [{"h": h, "lhs": v} for h, v in zip(ext.steps, ext.estimates)]
        return cls(scenario, mode, rows, lhs, bulk, boundary, total, abs_err, rel_err, bool(ok),
                   runtimes or {}, ext.order, track, grid, tol, notes)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["pass"] = d.pop("passed")
        return d


# --------------------------------------------------------------------------
# function scenarios
# --------------------------------------------------------------------------

def _track(u) -> str:
    return "grid" if isinstance(u, GridFn) else "exact"


def _domain(u):
    if isinstance(u, GridFn):
        return u.domain_body
    if isinstance(u, PolyhedralFn):
        return u.domain()
    return u.domain()


def analytic_first_variation(u, zeta: Perturbation, w: WeightSpec | None = None) -> tuple[float, float]:
    """(bulk, boundary) terms of the first variation of mu along u_t."""
    w = WeightSpec() if w is None else w
    if w.q is not None:
        n = u.dimension if isinstance(u, GridFn) else 1
        if w.radial_power(n) < 0 and not origin_in_interior(_domain(u)):
            raise SingularConfiguration("singular weight needs the origin in the interior of dom(u)")
    return bulk_integral(u, zeta, w), boundary_integral(u, zeta, w)


def _measure_along(family: Callable[[float], object], w: WeightSpec, hs, signs) -> dict:
    out = {}
    for h in hs:
        for s in signs:
            t = s * h
            if t not in out:
                out[t] = epigraph_measure(family(t), w)
    return out


def finite_difference(family: Callable[[float], object], w: WeightSpec, *, mode: str = "two_sided",
                      h0: float = DEFAULT_H0, steps: int = DEFAULT_STEPS,
                      use_last: int | None = None) -> tuple[Extrapolation, str, str]:
    """d/dt mu(family(t)) at 0 by central or forward differences plus Richardson.

    Two-sided mode degrades to one-sided when a negative step is improper
    (the domain collapses); the returned note records it.
    """
    hs = ladder(h0, steps)
    note = ""
    if mode == "two_sided":
        try:
            m = _measure_along(family, w, hs, (1.0, -1.0))
            D = [(m[h] - m[-h]) / (2 * h) for h in hs]
            return richardson(hs, D, (2, 4, 6, 8, 10), use_last), "two_sided", note
        except (PerturbationError, DomainCollapsed, ImproperFunction) as exc:
            note = f"negative steps improper ({exc}); one-sided"
    elif mode != "one_sided":
        raise ValueError(f"unknown mode {mode!r}")
    m = _measure_along(family, w, hs, (1.0,))
    m0 = epigraph_measure(family(0.0), w)
    D = [(m[h] - m0) / h for h in hs]
    return richardson(hs, D, (1, 2, 3, 4, 5), use_last), "one_sided", note


def numeric_first_variation(u, zeta: Perturbation, w: WeightSpec | None = None,
                            mode: str = "auto", h0: float = DEFAULT_H0,
                            steps: int = DEFAULT_STEPS):
    """LHS estimate of d/dt mu((u* + t zeta)*) at t = 0."""
    w = WeightSpec() if w is None else w
    use_last = 3 if isinstance(u, GridFn) else None
    family = lambda t: perturb(u, zeta, t)
    if mode != "auto":
        return finite_difference(family, w, mode=mode, h0=h0, steps=steps, use_last=use_last)
    if isinstance(u, GridFn):
        return finite_difference(family, w, mode="two_sided", h0=h0, steps=steps, use_last=use_last)
    # t -> mu(u_t) is smooth on each side of 0, but the two expansions differ
    # when zeta is smooth or a kink of zeta meets a boundary subgradient of u;
    # central differences then only converge to O(h)
    if zeta.plq is None:
        return finite_difference(family, w, mode="one_sided", h0=h0, steps=steps)
    ext, used, note = finite_difference(family, w, mode="two_sided", h0=h0, steps=steps)
    if used == "two_sided" and np.isfinite(ext.order) and ext.order < 1.5:
        ext, used, _ = finite_difference(family, w, mode="one_sided", h0=h0, steps=steps)
        note = "central differences first order; one-sided"
    return ext, used, note


def variation_check(name: str, u, zeta: Perturbation, w: WeightSpec | None = None, *,
                    mode: str = "auto", h0: float = DEFAULT_H0, steps: int = DEFAULT_STEPS,
                    tol: float | None = None) -> VariationReport:
    w = WeightSpec() if w is None else w
    t0 = time.perf_counter()
    bulk, bnd = analytic_first_variation(u, zeta, w)
    t1 = time.perf_counter()
    ext, used, note = numeric_first_variation(u, zeta, w, mode, h0, steps)
    t2 = time.perf_counter()
    track = _track(u)
    grid = max(u.shape) if track == "grid" else None
    if tol is None:
        tol = grid_tolerance(grid) if track == "grid" else EXACT_TOL
    return VariationReport.build(name, used, None, ext, bulk, bnd, track=track, tol=tol,
                                 relative=track == "grid", grid=grid,
                                 runtimes={"rhs_s": t1 - t0, "lhs_s": t2 - t1}, notes=note)


def boundary_free_formula(u, zeta: Perturbation, w: WeightSpec | None = None) -> float:
    """The bulk-only formula, which omits the boundary term."""
    return bulk_integral(u, zeta, WeightSpec() if w is None else w)


def rotem_check(u, v, *, name: str = "rotem", h0: float = DEFAULT_H0, steps: int = DEFAULT_STEPS,
                w: WeightSpec | None = None, tol: float = EXACT_TOL) -> VariationReport:
    """One-sided derivative of mu(u inf-conv (t . v)) against bulk + boundary with
    zeta = v* and rho = h_dom(v)."""
    w = WeightSpec() if w is None else w
    zeta = Perturbation.conjugate_of(v)
    t0 = time.perf_counter()
    bulk, bnd = analytic_first_variation(u, zeta, w)
    t1 = time.perf_counter()
    family = lambda t: u if t == 0 else inf_conv(u, epi_scale(t, v))
    ext, used, note = finite_difference(family, w, mode="one_sided", h0=h0, steps=steps)
    t2 = time.perf_counter()
    return VariationReport.build(name, used, None, ext, bulk, bnd, track="exact", tol=tol,
                                 runtimes={"rhs_s": t1 - t0, "lhs_s": t2 - t1}, notes=note)


def dual_check(u, v, q: float, *, name: str = "dual", h0: float = DEFAULT_H0,
               steps: int = DEFAULT_STEPS, tol: float = 1e-8) -> VariationReport:
    """The mu_q version: radial weight |x|^{q-n}, one-sided only.

    Needs the origin in the interior of dom(u) and in dom(v).
    """
    dom_v = _domain(v)
    if not dom_v.contains(0.0, tol=0.0):
        raise SingularConfiguration("the origin must lie in dom(v)")
    return rotem_check(u, v, name=name, h0=h0, steps=steps, w=WeightSpec(q=q), tol=tol)


# --------------------------------------------------------------------------
# body scenarios
# --------------------------------------------------------------------------

def _slab_rule(xs: Array, p: float, order: int):
    """Gauss nodes in x over consecutive slabs with the weight |x|^p."""
    g, wg = gl_rule(order)
    X, Wt = [], []
    for a, b in zip(xs[:-1], xs[1:]):
        h = b - a
        if h <= 0:
            continue
        if p != 0.0 and a == 0.0:
            s, wj = gj_rule(order, p)
            X.append(a + h * s)
            Wt.append(wj * h ** (p + 1))
        elif p != 0.0 and b == 0.0:
            s, wj = gj_rule(order, p)
            X.append(b - h * s)
            Wt.append(wj * h ** (p + 1))
        else:
            x = a + h * g
            X.append(x)
            Wt.append(wg * h * (np.abs(x) ** p if p != 0.0 else 1.0))
    return np.concatenate(X), np.concatenate(Wt)


def body_measure(K: ConvexPolygon, Psi: Callable[[Array], Array] | None = None,
                 q: float | None = None, order: int = 10) -> float:
    """int_K Psi(x, z) |x|^{q-1} dx dz by vertical slicing.

    Between consecutive vertex abscissae the floor and ceiling of K are
    affine, so a tensor Gauss rule on each slab is accurate to the smoothness
    of Psi.
    """
    if K is EMPTY:
        return 0.0
    if Psi is None and q is None:
        return K.area
    Psi = (lambda X: np.ones(X.shape[:-1])) if Psi is None else Psi
    p = 0.0 if q is None else float(q) - 1.0
    xs = np.unique(K.vertices[:, 0])
    if p != 0.0 and xs[0] < 0.0 < xs[-1]:
        xs = np.unique(np.append(xs, 0.0))
    X, WX = _slab_rule(xs, p, order)
    lo = floor_body(K)(X)
    hi = ceil_body(K)(X)
    g, wg = gl_rule(order)
    Z = lo[:, None] + (hi - lo)[:, None] * g[None, :]
    pts = np.stack([np.broadcast_to(X[:, None], Z.shape), Z], axis=-1)
    vals = Psi(pts) * wg[None, :] * (hi - lo)[:, None] * WX[:, None]
    return pairwise_sum(vals)


def aleksandrov_polytope(K: ConvexPolygon, f: SphericalFn, *, directions: int = 4096,
                         h0: float = DEFAULT_H0, steps: int = DEFAULT_STEPS, tol: float = 1e-4,
                         name: str = "aleksandrov") -> VariationReport:
    """d/dt Area(F_t K) at 0 against sum_i f(nu_i) |facet_i|.

    Area(F_t K) is piecewise polynomial in t with a kink at 0, so the central
    differences carry odd powers of h and are extrapolated with orders 1, 2, 3.
    """
    t0 = time.perf_counter()
    rhs = float(np.sum(f(K.normals) * K.edge_lengths))
    t1 = time.perf_counter()
    hs = ladder(h0, steps)
    D = []
    for h in hs:
        ap = wulff_flow(K, f, h, directions)
        am = wulff_flow(K, f, -h, directions)
        D.append((ap.area - am.area) / (2 * h))
    ext = richardson(hs, D, (1, 2, 3, 4))
    t2 = time.perf_counter()
    return VariationReport.build(name, "two_sided", None, ext, rhs, 0.0, track="exact", tol=tol,
                                 runtimes={"rhs_s": t1 - t0, "lhs_s": t2 - t1})


def kryvonos_langharst(K: ConvexPolygon, f: SphericalFn, Psi: Callable[[Array], Array] | None = None,
                       q: float | None = None, *, directions: int = 4096, h0: float = DEFAULT_H0,
                       steps: int = DEFAULT_STEPS, tol: float = 1e-3,
                       name: str = "weighted_aleksandrov") -> VariationReport:
    """d/dt mu(F_t K) at 0 against int f dS_{mu,K}, with d mu = Psi |x|^{q-1} dX."""
    t0 = time.perf_counter()
    S = weighted_surface_area_measure(K, Psi, q)
    rhs = S.integrate(f)
    t1 = time.perf_counter()
    hs = ladder(h0, steps)
    D = []
    for h in hs:
        mp = body_measure(wulff_flow(K, f, h, directions), Psi, q)
        mm = body_measure(wulff_flow(K, f, -h, directions), Psi, q)
        D.append((mp - mm) / (2 * h))
    ext = richardson(hs, D, (1, 2, 3, 4))
    t2 = time.perf_counter()
    return VariationReport.build(name, "two_sided", None, ext, rhs, 0.0, track="exact", tol=tol,
                                 relative=True, runtimes={"rhs_s": t1 - t0, "lhs_s": t2 - t1})


def translated_recheck(K: ConvexPolygon, f: SphericalFn, Psi: Callable[[Array], Array], Y,
                       **kw) -> tuple[VariationReport, VariationReport]:
    """The same check for K + Y with the density shifted along, Psi(. - Y)."""
    Y = np.asarray(Y, dtype=float)
    name = kw.pop("name", "weighted_aleksandrov")
    base = kryvonos_langharst(K, f, Psi, name=name, **kw)
    moved = kryvonos_langharst(K.translate(Y), f, lambda X: Psi(X - Y),
                               name=name + "_translated", **kw)
    return base, moved
