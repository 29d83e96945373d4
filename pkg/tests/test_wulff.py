import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwl.convexfn import PLQFn, PolyhedralFn
from fwl.geometry import EMPTY, ConvexPolygon, Disk, Interval, fibonacci_sphere
from fwl.transform import Perturbation, perturb
from fwl.wulff import (DomainCollapsed, Polytope3, SphericalFn, WulffTooSmallT, ZetaBar,
                       direction_discretization_bound, domain_evolution, functional_wulff, gnomonic,
                       maximality_gap, t_min, wulff_flow, wulff_shape, zeta_bar_eval)

SQUARE = ConvexPolygon.box((0, 0), (1, 1))
ND = 4096


def _bound(K):
    return direction_discretization_bound(float(np.linalg.norm(K.vertices, axis=1).max()) + 1.0, ND)


@st.composite
def polygons(draw):
    k = draw(st.integers(3, 7))
    ang = np.sort(draw(st.lists(st.floats(0, 2 * np.pi), min_size=k, max_size=k, unique=True)))
    rad = np.array(draw(st.lists(st.floats(0.5, 1.5), min_size=k, max_size=k)))
    P = ConvexPolygon(np.column_stack([rad * np.cos(ang), rad * np.sin(ang)]))
    if P.area < 0.05:
        P = ConvexPolygon(np.array([[-1, -1], [1, -1], [0, 1.0]]))
    return P


def _smooth_f(a, b):
    return SphericalFn(lambda nu: 1.0 + a * nu[..., 0] ** 2 + b * nu[..., 0] * nu[..., 1], 2)


class TestWulffShape:
    def test_support_of_square(self):
        W = wulff_shape(SphericalFn.support_of(SQUARE), ND)
        assert W.hausdorff(SQUARE) <= _bound(SQUARE) + 1e-12

    def test_constant_is_ball(self):
        W = wulff_shape(SphericalFn.constant(1.0), ND)
        r = np.linalg.norm(W.vertices, axis=1)
        assert np.all(r >= 1 - 1e-12) and np.all(r <= 1 + direction_discretization_bound(1.0, ND) + 1e-12)

    def test_translation_example(self):
        f = SphericalFn.support_of(SQUARE) + SphericalFn.linear([1.0, 0.0])
        W = wulff_shape(f, ND)
        assert W.hausdorff(SQUARE.translate([1.0, 0.0])) <= 2 * _bound(SQUARE) + 1e-12

    def test_empty_is_a_value(self):
        assert wulff_shape(SphericalFn.constant(-1.0), 64) is EMPTY

    def test_maximality(self):
        f = _smooth_f(0.3, 0.2)
        W = wulff_shape(f, ND)
        hi, lo = maximality_gap(W, f, ND)
        assert hi <= 1e-12 and lo <= 1e-9

    def test_three_dimensional(self):
        f = SphericalFn(lambda nu: np.ones(nu.shape[:-1]), 3)
        W = wulff_shape(f, 2000)
        assert isinstance(W, Polytope3)
        assert W.volume == pytest.approx(4 * np.pi / 3, rel=0.02)


class TestFlow:
    def test_rounded_square(self):
        F = wulff_flow(SQUARE, SphericalFn.constant(1.0), 0.5, ND)
        assert F.area == pytest.approx(1 + 4 * 0.5 + np.pi * 0.25, rel=1e-5)

    def test_zero_time(self):
        assert wulff_flow(SQUARE, SphericalFn.constant(1.0), 0.0) is SQUARE

    @given(polygons(), st.sampled_from([0.1, 0.2, 0.3]), st.sampled_from([0.1, 0.2, 0.3]),
           st.floats(-0.3, 0.3), st.floats(-0.3, 0.3))
    def test_semigroup(self, K, s, t, a, b):
        f = _smooth_f(a, b)
        lhs = wulff_flow(wulff_flow(K, f, t, ND), f, s, ND)
        rhs = wulff_flow(K, f, s + t, ND)
        assert lhs.hausdorff(rhs) <= 2 * _bound(rhs)

    @given(polygons(), st.floats(-2, 2), st.floats(-2, 2), st.floats(-0.3, 0.3))
    def test_translation_covariance(self, K, y1, y2, a):
        f = SphericalFn.support_of(K) + _smooth_f(a, 0.0).scale(0.2)
        W = wulff_shape(f, ND)
        Wy = wulff_shape(f + SphericalFn.linear([y1, y2]), ND)
        assert Wy.hausdorff(W.translate([y1, y2])) <= 2 * _bound(Wy)

    def test_continuity(self):
        f = SphericalFn.constant(1.0)
        target = wulff_flow(SQUARE, f, 0.3, ND)
        dists = []
        for m in (4, 16, 64, 256):
            Km = ConvexPolygon(SQUARE.vertices + np.array([[0, 0], [1 / m, 0], [0, 1 / m], [0, 0]]))
            dists.append(wulff_flow(Km, f, 0.3 + 1 / m, ND).hausdorff(target))
        assert all(b < a for a, b in zip(dists, dists[1:]))
        assert dists[-1] < 1e-2


class TestZetaBar:
    def test_south_pole(self):
        z = Perturbation.soft_norm()
        assert zeta_bar_eval(z, np.array([0.0, -1.0])) == pytest.approx(1.0)

    def test_gnomonic_sign(self):
        p = np.array([0.7, -1.2])
        nu = np.append(p, -1.0) / np.sqrt(1 + p @ p)
        assert np.allclose(gnomonic(nu), p)

    def test_homogeneous(self):
        z = Perturbation.norm(2.0)
        th = np.linspace(0, 2 * np.pi, 101)
        nu = np.column_stack([np.cos(th), np.sin(th)])
        assert np.allclose(ZetaBar(z)(nu), 2.0 * np.abs(nu[:, 0]), atol=1e-12)

    def test_equator(self):
        z = Perturbation.soft_norm(3.0) + Perturbation.linear([0.5])
        assert ZetaBar(z)(np.array([[1.0, 0.0], [-1.0, 0.0]])) == pytest.approx([3.5, 2.5])

    @given(st.sampled_from(["soft_norm", "bump", "norm", "sum"]), st.integers(0, 2**31 - 1))
    def test_factorization_and_reflection(self, kind, seed):
        cfg = {"sum": {"kind": "sum", "terms": [{"kind": "soft_norm"}, {"kind": "constant", "value": 2}]}}
        z = Perturbation.from_config(cfg.get(kind, {"kind": kind}))
        rng = np.random.default_rng(seed)
        nu = rng.standard_normal((1000, 3))
        nu /= np.linalg.norm(nu, axis=1, keepdims=True)
        nu[:, 2] = -np.abs(nu[:, 2])
        nu = nu[nu[:, 2] < -1e-3]
        g = gnomonic(nu)
        zb = ZetaBar(z)
        assert np.allclose(zb(nu) * np.sqrt(1 + np.sum(g * g, axis=1)), z(g), rtol=1e-12, atol=1e-12)
        up = nu * np.array([1, 1, -1])
        assert np.array_equal(zb(up), zb(nu))
        eq = rng.standard_normal((50, 2))
        eq /= np.linalg.norm(eq, axis=1, keepdims=True)
        assert np.allclose(zb(np.column_stack([eq, np.zeros(50)])), z.recession(eq), atol=1e-12)


class TestDomainEvolution:
    def test_interval_norm(self):
        d = domain_evolution(Interval(-1, 1), Perturbation.norm(), 0.3)
        assert (d.lo, d.hi) == pytest.approx((-1.3, 1.3))

    def test_constant_keeps_domain(self):
        d = domain_evolution(Interval(-1, 1), Perturbation.constant(1.0), 5.0)
        assert (d.lo, d.hi) == (-1, 1)

    def test_shrinking_matches_perturb(self):
        u = PLQFn.quadratic(1.0, lo=-1, hi=1)
        z = Perturbation.norm(-0.5)
        d = domain_evolution(u.domain(), z, 0.4)
        assert (d.lo, d.hi) == pytest.approx((-0.8, 0.8))
        ut = perturb(u, z, 0.4)
        assert (ut.lo, ut.hi) == pytest.approx((d.lo, d.hi), abs=1e-12)

    def test_collapse(self):
        with pytest.raises(DomainCollapsed, match="domain collapsed"):
            domain_evolution(Interval(-1, 1), Perturbation.norm(), -2.0)

    def test_disk_and_polygon(self):
        d = domain_evolution(Disk((0, 0), 1.0), Perturbation.norm(), 0.5)
        assert d.radius == pytest.approx(1.5)
        z = Perturbation.support([[-1, -1], [1, -1], [1, 1], [-1, 1]])
        P = domain_evolution(ConvexPolygon.box((-1, -1), (1, 1)), z, 0.5)
        assert P.hausdorff(ConvexPolygon.box((-1.5, -1.5), (1.5, 1.5))) < 1e-9


class TestFunctionalWulff:
    def test_zero_time(self):
        u = PolyhedralFn(np.array([-1.0, 0.0, 1.0]), np.array([1.0, 0.0, 1.0]))
        assert functional_wulff(u, Perturbation.norm(), 0.0) is u

    def test_indicator(self):
        u = PolyhedralFn(np.array([-1.0, 1.0]), np.zeros(2))
        r = functional_wulff(u, Perturbation.norm(), 0.2)
        assert (r.points[0, 0], r.points[-1, 0]) == pytest.approx((-1.2, 1.2), abs=1e-6)
        assert np.allclose(r.values, 0.0, atol=1e-6)

    def test_v_shape_soft_norm(self):
        u = PolyhedralFn(np.array([-1.0, 0.0, 1.0]), np.array([1.0, 0.0, 1.0]))
        z = Perturbation.soft_norm()
        res = functional_wulff(u, z, 0.1, full=True)
        ref = perturb(u, z, 0.1)
        x = np.linspace(-1.05, 1.05, 43)
        assert np.max(np.abs(res.function(x) - ref(x))) <= 5e-4
        assert res.T == pytest.approx(t_min(u, z, 0.1))

    def test_small_T_detected(self):
        u = PolyhedralFn(np.array([-1.0, 0.0, 1.0]), np.array([1.0, 0.0, 1.0]))
        with pytest.raises(WulffTooSmallT, match="increase T"):
            functional_wulff(u, Perturbation.soft_norm(), 0.1, T=0.01)


def test_sphere_directions_cover():
    U = fibonacci_sphere(16384)
    assert np.allclose(np.linalg.norm(U, axis=1), 1.0)
    assert abs(U.mean(axis=0)).max() < 1e-3
