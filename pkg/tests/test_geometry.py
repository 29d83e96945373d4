import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from fwl.geometry import ConvexPolygon, Disk, Interval, convex_hull_2d, origin_in_interior
from fwl.quadrature import adaptive_integrate, gj_rule, gl_rule, pairwise_sum, power_weighted_integral


def test_hull_keeps_fine_arcs():
    th = np.linspace(0, 2 * np.pi, 4096, endpoint=False)
    assert len(convex_hull_2d(np.column_stack([np.cos(th), np.sin(th)]))) == 4096


def test_hull_drops_collinear():
    pts = np.array([[0, 0], [0.5, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    assert len(convex_hull_2d(pts)) == 4


def test_polygon_basics():
    K = ConvexPolygon.box((0, 0), (2, 1))
    assert K.area == pytest.approx(2.0) and K.perimeter == pytest.approx(6.0)
    assert np.allclose(K.centroid, [1.0, 0.5])
    assert np.allclose(np.linalg.norm(K.normals, axis=1), 1.0, atol=1e-12)
    assert K.contains(np.array([1.0, 0.5])) and not K.contains(np.array([2.5, 0.5]))
    assert K.distance(np.array([[3.0, 0.5]]))[0] == pytest.approx(1.0)


def test_radial_function():
    K = ConvexPolygon.box((-1, -1), (1, 1))
    assert K.radial(np.array([1.0, 0.0])) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        ConvexPolygon.box((0, 0), (1, 1)).radial(np.array([1.0, 0.0]))


@given(st.integers(1, 8), st.integers(1, 8), st.integers(0, 10**6))
def test_hausdorff_matches_point_distances(k1, k2, seed):
    rng = np.random.default_rng(seed)
    A = ConvexPolygon(rng.normal(size=(k1, 2)))
    B = ConvexPolygon(rng.normal(size=(k2, 2)) + rng.normal(size=2) * 0.3)
    brute = max(B.distance(A.vertices).max(), A.distance(B.vertices).max())
    assert A.hausdorff(B) == pytest.approx(brute, abs=1e-12)
    assert A.hausdorff(A) == 0.0


def test_interval_and_disk():
    I = Interval(-1, 2)
    assert I.support(np.array([1.0, -1.0])) == pytest.approx([2.0, 1.0])
    assert I.hausdorff(Interval(-1, 3)) == 1.0
    D = Disk((0, 0), 2.0)
    assert D.support(np.array([0.6, 0.8])) == pytest.approx(2.0)
    assert origin_in_interior(D) and not origin_in_interior(Interval(0, 1))
    assert D.to_polygon(4096).area == pytest.approx(4 * np.pi, rel=1e-5)


def test_gauss_rules():
    x, w = gl_rule(8)
    assert np.sum(w * x ** 15) == pytest.approx(1 / 16)
    s, wj = gj_rule(8, -0.5)
    assert np.sum(wj) == pytest.approx(2.0)
    assert np.sum(wj * s ** 3) == pytest.approx(1 / 3.5)


def test_adaptive_and_power_weighted():
    v, err = adaptive_integrate(np.exp, 0.0, 1.0, rtol=1e-12)
    assert v == pytest.approx(np.e - 1, rel=1e-12)
    # int_{-1}^{2} |x|^{-1/2} dx = 2 + 2 sqrt 2
    assert power_weighted_integral(lambda x: np.ones_like(x), -1.0, 2.0, -0.5) == pytest.approx(2 + 2 * np.sqrt(2), rel=1e-10)


def test_pairwise_sum():
    assert pairwise_sum(np.full(10**6, 0.1)) == pytest.approx(1e5, rel=1e-14)
