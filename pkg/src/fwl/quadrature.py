"""Gauss rules, adaptive interval quadrature and fan (polar) rules on planar domains.

Radial singular weights ``|x|**p`` are handled with Gauss-Jacobi rules on the
panel that touches the singular point, so the singular factor is integrated
exactly and only the smooth remainder is sampled.
"""
from __future__ import annotations

from functools import lru_cache
from typing import Callable

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

Array = np.ndarray


@lru_cache(maxsize=64)
def gl_rule(order: int) -> tuple[Array, Array]:
    """Gauss-Legendre nodes/weights on [0, 1]."""
    x, w = roots_legendre(order)
    return 0.5 * (x + 1.0), 0.5 * w


@lru_cache(maxsize=256)
def gj_rule(order: int, beta: float) -> tuple[Array, Array]:
    """Nodes/weights on [0, 1] for the weight ``s**beta`` (beta > -1)."""
    if beta <= -1.0:
        raise ValueError(f"weight s**{beta} is not integrable at 0")
    x, w = roots_jacobi(order, 0.0, beta)
    return 0.5 * (x + 1.0), w / 2.0 ** (beta + 1.0)


def composite_nodes(a: float, b: float, panels: int, order: int = 8) -> tuple[Array, Array]:
    """Composite Gauss-Legendre nodes on [a, b] with equal panels."""
    s, w = gl_rule(order)
    edges = np.linspace(a, b, panels + 1)
    h = np.diff(edges)
    x = (edges[:-1, None] + h[:, None] * s[None, :]).ravel()
    ww = (h[:, None] * w[None, :]).ravel()
    return x, ww


def _panel_sum(f, a, b, order, beta=None):
    """Integrate f on each panel [a_i, b_i]; beta adds the weight (x - a_i)**beta."""
    s, w = gl_rule(order) if beta is None else gj_rule(order, beta)
    h = b - a
    x = a[:, None] + h[:, None] * s[None, :]
    vals = np.asarray(f(x.ravel()), dtype=float).reshape(x.shape)
    scale = h if beta is None else h ** (beta + 1.0)
    return (vals * w[None, :]).sum(axis=1) * scale


def adaptive_integrate(
    f: Callable[[Array], Array],
    a: float,
    b: float,
    *,
    order: int = 8,
    rtol: float = 1e-13,
    atol: float = 1e-300,
    left_power: float | None = None,
    breakpoints=(),
    max_level: int = 40,
) -> tuple[float, float]:
    """Adaptive bisection Gauss quadrature of ``f`` on [a, b].

    With ``left_power=p`` the integrand is ``(x - a)**p * f(x)``; the panel
    touching ``a`` then uses a Gauss-Jacobi rule.  Returns (value, error estimate).
    """
    a, b = float(a), float(b)
    if b < a:
        if left_power is not None:
            raise ValueError("left_power requires a <= b")
        v, e = adaptive_integrate(f, b, a, order=order, rtol=rtol, atol=atol,
                                  breakpoints=breakpoints, max_level=max_level)
        return -v, e
    if b == a:
        return 0.0, 0.0
    edges = np.unique(np.concatenate([[a, b], [p for p in breakpoints if a < p < b]]))
    lo, hi = edges[:-1].astype(float), edges[1:].astype(float)

    if left_power is None:
        def estimate(lo, hi):
            mid = 0.5 * (lo + hi)
            whole = _panel_sum(f, lo, hi, order)
            halves = _panel_sum(f, lo, mid, order) + _panel_sum(f, mid, hi, order)
            return whole, halves
    else:
        gs = lambda x: f(x) * (x - a) ** left_power

        def estimate(lo, hi):
            mid = 0.5 * (lo + hi)
            sing = lo == a
            whole = np.empty_like(lo)
            halves = np.empty_like(lo)
            if np.any(~sing):
                r = ~sing
                whole[r] = _panel_sum(gs, lo[r], hi[r], order)
                halves[r] = _panel_sum(gs, lo[r], mid[r], order) + _panel_sum(gs, mid[r], hi[r], order)
            if np.any(sing):
                whole[sing] = _panel_sum(f, lo[sing], hi[sing], order, beta=left_power)
                halves[sing] = (_panel_sum(f, lo[sing], mid[sing], order, beta=left_power)
                                + _panel_sum(gs, mid[sing], hi[sing], order))
            return whole, halves

    done = 0.0
    err_done = 0.0
    whole, halves = estimate(lo, hi)
    total_guess = abs(halves.sum())
    for _ in range(max_level):
        err = np.abs(whole - halves)
        ok = err <= rtol * max(total_guess, atol) * (hi - lo) / (b - a) + atol
        done += halves[ok].sum()
        err_done += err[ok].sum()
        if np.all(ok):
            return float(done), float(err_done)
        lo, hi = lo[~ok], hi[~ok]
        mid = 0.5 * (lo + hi)
        lo, hi = np.concatenate([lo, mid]), np.concatenate([mid, hi])
        whole, halves = estimate(lo, hi)
        total_guess = abs(done + halves.sum())
    err = np.abs(whole - halves)
    return float(done + halves.sum()), float(err_done + err.sum())


def power_weighted_integral(
    g: Callable[[Array], Array],
    a: float,
    b: float,
    p: float,
    *,
    rtol: float = 1e-12,
    order: int = 8,
    breakpoints=(),
) -> float:
    """``int_a^b |x|**p g(x) dx`` with the singular point x = 0 treated exactly.

    Intervals straddling 0 are split there; each half gets a Gauss-Jacobi panel
    at the origin followed by adaptive bisection.
    """
    a, b = float(a), float(b)
    if b < a:
        return -power_weighted_integral(g, b, a, p, rtol=rtol, order=order, breakpoints=breakpoints)
    if p == 0.0:
        return adaptive_integrate(g, a, b, rtol=rtol, order=order, breakpoints=breakpoints)[0]
    total = 0.0
    if b > 0.0:
        lo = max(a, 0.0)
        if lo == 0.0:
            total += adaptive_integrate(g, 0.0, b, rtol=rtol, order=order, left_power=p,
                                        breakpoints=breakpoints)[0]
        else:
            total += adaptive_integrate(lambda x: g(x) * np.abs(x) ** p, lo, b, rtol=rtol,
                                        order=order, breakpoints=breakpoints)[0]
    if a < 0.0:
        hi = min(b, 0.0)
        mirrored = lambda y: g(-y)
        bps = [-q for q in breakpoints]
        if hi == 0.0:
            total += adaptive_integrate(mirrored, 0.0, -a, rtol=rtol, order=order, left_power=p,
                                        breakpoints=bps)[0]
        else:
            total += adaptive_integrate(lambda y: mirrored(y) * np.abs(y) ** p, -hi, -a,
                                        rtol=rtol, order=order, breakpoints=bps)[0]
    return total


def fan_rule(
    boundary: Callable[[Array], tuple[Array, Array]],
    center: Array,
    *,
    s_panels: int,
    w_panels: int,
    order: int = 6,
    radial_power: float | None = None,
) -> tuple[Array, Array]:
    """Nodes/weights for a planar domain star-shaped about ``center``.

    ``boundary(w)`` maps parameters w in [0, 1] to arrays (points, tangents) of
    shape (segments, len(w), 2) describing the CCW boundary.  Each node is
    ``center + s * (B(w) - center)`` with Jacobian ``s * |(B - c) x B'|``.  With
    ``radial_power=p`` the weights include ``|X - center|**p`` and the first
    s-panel carries a Gauss-Jacobi rule.
    """
    center = np.asarray(center, dtype=float)
    w_nodes, w_w = composite_nodes(0.0, 1.0, w_panels, order)
    pts, tan = boundary(w_nodes)
    rel = pts - center
    jac_w = np.abs(rel[..., 0] * tan[..., 1] - rel[..., 1] * tan[..., 0])
    p = 0.0 if radial_power is None else float(radial_power)
    gls, glw = gl_rule(order)
    edges = np.linspace(0.0, 1.0, s_panels + 1)
    s_list, sw_list = [], []
    for k in range(s_panels):
        lo, hi = edges[k], edges[k + 1]
        h = hi - lo
        if k == 0 and p != 0.0:
            s, w = gj_rule(order, p + 1.0)
            s_list.append(lo + h * s)
            sw_list.append(w * h ** (p + 2.0))
        else:
            s = lo + h * gls
            s_list.append(s)
            sw_list.append(glw * h * s ** (p + 1.0))
    s_all = np.concatenate(s_list)
    sw_all = np.concatenate(sw_list)
    radial = np.linalg.norm(rel, axis=-1) ** p if p != 0.0 else 1.0
    wts = sw_all[None, None, :] * (w_w[None, :] * jac_w * radial)[..., None]
    X = center + s_all[None, None, :, None] * rel[:, :, None, :]
    return X.reshape(-1, 2), wts.ravel()


def boundary_rule(
    boundary: Callable[[Array], tuple[Array, Array]],
    *,
    w_panels: int,
    order: int = 8,
) -> tuple[Array, Array, Array, Array]:
    """Points, outer normals, arc-length weights and segment ids on a CCW boundary."""
    w_nodes, w_w = composite_nodes(0.0, 1.0, w_panels, order)
    pts, tan = boundary(w_nodes)
    speed = np.linalg.norm(tan, axis=-1)
    keep = (speed > 0).ravel()
    safe = np.where(speed > 0, speed, 1.0)
    normals = np.stack([tan[..., 1], -tan[..., 0]], axis=-1) / safe[..., None]
    weights = speed * w_w[None, :]
    seg = np.broadcast_to(np.arange(pts.shape[0])[:, None], speed.shape)
    return (pts.reshape(-1, 2)[keep], normals.reshape(-1, 2)[keep],
            weights.ravel()[keep], seg.ravel()[keep])


def pairwise_sum(values: Array) -> float:
    """Deterministic pairwise summation."""
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        return 0.0
    while v.size > 1:
        if v.size % 2:
            v = np.append(v, 0.0)
        v = v[0::2] + v[1::2]
    return float(v[0])
