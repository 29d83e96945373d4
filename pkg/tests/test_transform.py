import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import polyhedral_1d
from fwl.convexfn import GridFn, PLQFn, PolyhedralFn
from fwl.geometry import ConvexPolygon, Interval
from fwl.transform import (Perturbation, PerturbationError, biconjugate, epi_scale,
                           hopf_lax_residual, inf_conv, inf_conv_direct, legendre, llt_1d, perturb,
                           perturbation_from_config, plq_approximation, recession)

Y = np.linspace(-4, 4, 161)


def _ind(lo, hi):
    return PolyhedralFn(np.array([lo, hi]), np.zeros(2))


class TestLegendre:
    def test_indicator_gives_support(self):
        assert np.allclose(legendre(_ind(-1, 1))(Y), np.abs(Y))
        assert np.allclose(legendre(PLQFn.indicator(-1, 1))(Y), np.abs(Y))

    def test_half_square_grid(self):
        g = GridFn.from_function(lambda x: 0.5 * x * x, Interval(-4, 4), 801)
        c = legendre(g)
        y = np.linspace(-2, 2, 81)
        assert c.warning is None
        assert np.max(np.abs(c(y) - 0.5 * y * y)) <= 4 * 0.01 * 4

    def test_quadratic_cap_against_brute_force(self, quad_cap):
        xs = np.linspace(-1, 1, 10**6)
        c = legendre(quad_cap)
        for y in np.linspace(-5, 5, 11):
            assert c(y) == pytest.approx(np.max(y * xs - xs * xs), abs=1e-11)

    def test_grid_2d_separable(self):
        g = GridFn.from_function(lambda x: 0.5 * np.sum(x * x, axis=-1),
                                 ConvexPolygon.box((-3, -3), (3, 3)), 121)
        c = legendre(g)
        P = np.array([[0.5, -1.0], [1.2, 0.3], [0.0, 0.0]])
        assert np.allclose(c(P), 0.5 * np.sum(P * P, axis=1), atol=0.05)

    def test_llt_matches_brute_force(self):
        rng = np.random.default_rng(0)
        x = np.sort(rng.uniform(-2, 2, 50))
        f = x ** 4 + rng.uniform(0, 0.1, 50)
        y = np.linspace(-10, 10, 77)
        assert np.allclose(llt_1d(x, f, y), np.max(y[:, None] * x - f, axis=1))

    def test_dual_box_warning(self):
        g = GridFn.from_function(lambda x: x * x, Interval(-2, 2), 41)
        c = legendre(g, dual_box=((-1.0, 1.0),), dual_resolution=(41,))
        assert c.warning is not None

    @given(polyhedral_1d(), polyhedral_1d())
    def test_order_reversal(self, u, v):
        w = PolyhedralFn(u.points, u.values + 0.5)  # w >= u everywhere
        assert np.all(legendre(w)(Y) <= legendre(u)(Y) + 1e-12)

    @given(polyhedral_1d())
    def test_conjugate_sandwich(self, u):
        h = np.maximum(Y * u.points[0, 0], Y * u.points[-1, 0])
        us = legendre(u)(Y)
        assert np.all(h - u.max_value() <= us + 1e-12)
        assert np.all(us <= h - u.min_value() + 1e-12)


class TestBiconjugate:
    def test_indicator(self):
        assert biconjugate(_ind(-1, 1)).equals(_ind(-1, 1))

    def test_v_shape(self):
        v = PolyhedralFn(np.array([-1.0, 0.0, 1.0]), np.array([1.0, 0.0, 1.0]))
        assert biconjugate(v).equals(v)

    def test_nonconvex_grid_envelope(self):
        x = np.linspace(-1, 2, 301)
        w = np.minimum(x * x, (x - 1) ** 2)
        g = GridFn(((-1.0, 2.0),), (301,), w)
        env = biconjugate(g)
        # lower hull oracle: flat at 0 on [0, 1], the parabolas outside
        want = np.where(x < 0, x * x, np.where(x > 1, (x - 1) ** 2, 0.0))
        assert np.max(np.abs(env.values - want)) <= 2 * 0.01

    @given(polyhedral_1d())
    def test_idempotent(self, u):
        b = biconjugate(u)
        assert biconjugate(b).equals(b)
        x = np.linspace(-2.5, 2.5, 101)
        assert np.allclose(b(x), u(x), atol=1e-10, equal_nan=False) or np.array_equal(b(x), u(x))


class TestInfConv:
    def test_indicators(self):
        w = inf_conv(_ind(-1, 1), _ind(-1, 1))
        assert w.equals(_ind(-2, 2))

    def test_neutral(self, quad_cap):
        w = inf_conv(quad_cap, PLQFn.point(0.0, 0.0))
        x = np.linspace(-1.5, 1.5, 61)
        assert np.allclose(w(x), quad_cap(x), atol=1e-14)

    def test_quadratic_cap_oracle(self, quad_cap):
        w = inf_conv(quad_cap, PLQFn.indicator(-0.5, 0.5))
        x = np.linspace(-1.5, 1.5, 61)
        want = np.maximum(np.abs(x) - 0.5, 0.0) ** 2
        assert np.allclose(w(x), want, atol=1e-13)
        # pointwise infimum over a fine grid
        ys = np.linspace(-1, 1, 20001)
        for xx in (-1.2, 0.3, 1.4):
            z = xx - ys
            vals = np.where(np.abs(z) <= 0.5, ys * ys, np.inf)
            assert w(xx) == pytest.approx(vals.min(), abs=1e-7)

    def test_grid_minkowski(self):
        u = GridFn.from_function(lambda x: np.zeros(x.shape[:-1]), ConvexPolygon.box((-1, -1), (1, 1)), 41)
        w = inf_conv(u, u)
        assert w.domain_body.area == pytest.approx(16.0)
        assert np.nanmax(np.abs(np.where(np.isfinite(w.values), w.values, 0.0))) < 1e-9

    @given(polyhedral_1d(), polyhedral_1d())
    def test_conjugate_route_equals_direct(self, u, v):
        a, b = inf_conv(u, v), inf_conv_direct(u, v)
        x = np.linspace(-4.5, 4.5, 181)
        fa, fb = a(x), b(x)
        assert np.array_equal(np.isinf(fa), np.isinf(fb))
        fin = np.isfinite(fa)
        assert np.allclose(fa[fin], fb[fin], rtol=0, atol=1e-12)


class TestEpiScale:
    def test_identity(self, quad_cap):
        x = np.linspace(-1.5, 1.5, 31)
        assert np.array_equal(epi_scale(1.0, quad_cap)(x), quad_cap(x))

    def test_zero(self):
        z = epi_scale(0.0, _ind(-1, 1))
        assert z.generators == [((0.0,), 0.0)]

    def test_indicator(self):
        assert epi_scale(2.0, _ind(0, 1)).equals(_ind(0, 2))

    def test_negative(self):
        with pytest.raises(ValueError):
            epi_scale(-1.0, _ind(0, 1))

    @given(polyhedral_1d(), polyhedral_1d(), st.sampled_from([0.0, 0.5, 1.0, 2.0]),
           st.sampled_from([0.0, 0.5, 1.0, 2.0]))
    def test_dual_sum_identity(self, u, v, t, s):
        w = inf_conv(epi_scale(t, u), epi_scale(s, v))
        y = np.random.default_rng(0).uniform(-5, 5, 100)
        want = t * legendre(u)(y) + s * legendre(v)(y)
        assert np.allclose(legendre(w)(y), want, rtol=0, atol=1e-10)


class TestPerturb:
    def test_constant(self):
        u = PLQFn.indicator(-1, 1)
        for t in (-0.5, 0.3, 2.0):
            ut = perturb(u, Perturbation.constant(1.0), t)
            assert ut(0.2) == pytest.approx(-t)
            assert ut.domain().lo == pytest.approx(-1) and ut.domain().hi == pytest.approx(1)

    def test_norm(self):
        ut = perturb(PLQFn.indicator(-1, 1), Perturbation.norm(), 0.3)
        assert (ut.lo, ut.hi) == pytest.approx((-1.3, 1.3))
        assert ut(1.29) == pytest.approx(0.0)

    def test_quadratic_norm(self, quad_cap):
        ut = perturb(quad_cap, Perturbation.norm(), 0.25)
        x = np.linspace(-1.25, 1.25, 101)
        assert np.allclose(ut(x), np.maximum(np.abs(x) - 0.25, 0) ** 2, atol=1e-14)
        assert ut(1.3) == np.inf

    def test_too_large(self):
        with pytest.raises(PerturbationError, match="perturbation too large"):
            perturb(PLQFn.indicator(-1, 1), Perturbation.norm(), -1.5)

    def test_grid_matches_exact(self):
        u = GridFn.from_function(lambda x: x * x, Interval(-1, 1), 801)
        ut = perturb(u, Perturbation.norm(), 0.25)
        x = np.linspace(-1.2, 1.2, 41)
        assert np.max(np.abs(ut(x) - np.maximum(np.abs(x) - 0.25, 0) ** 2)) < 1e-3

    @given(polyhedral_1d(), polyhedral_1d(), st.sampled_from([0.1, 0.5, 1.0]))
    def test_conjugate_perturbation_is_inf_conv(self, u, v, t):
        a = perturb(u, Perturbation.conjugate_of(v), t)
        b = inf_conv(u, epi_scale(t, v))
        x = np.linspace(-5, 5, 201)
        fa, fb = a(x), b(x)
        assert np.array_equal(np.isinf(fa), np.isinf(fb))
        fin = np.isfinite(fa)
        assert np.allclose(fa[fin], fb[fin], rtol=0, atol=1e-12)

    def test_smooth_zeta_against_brute_force(self, quad_cap):
        z = Perturbation.soft_norm()
        t = 0.1
        ut = perturb(quad_cap, z, t)
        ys = np.linspace(-60, 60, 600001)
        us = np.where(np.abs(ys) <= 2, ys * ys / 4, np.abs(ys) - 1)
        for x in (-0.9, 0.0, 0.5, 1.05):
            brute = np.max(x * ys - us - t * np.sqrt(1 + ys * ys))
            assert ut(x) == pytest.approx(brute, abs=1e-6)


class TestRecession:
    def test_homogeneous(self):
        rho = recession(Perturbation.norm())
        assert rho(np.array([[2.0], [-3.0]])) == pytest.approx([2.0, 3.0])

    def test_constant(self):
        rho = recession(Perturbation.constant(4.0))
        assert rho(np.array([[1.0], [-1.0]])) == pytest.approx([0.0, 0.0])

    def test_ladder_soft_norm(self):
        z = Perturbation.soft_norm()
        bare = Perturbation(z.func)
        rho = recession(bare)
        for R in (10.0, 1e2, 1e3, 1e4):
            est = bare(np.array([[R], [-R]])) / R
            assert np.all(np.abs(est - 1.0) <= 1.0 / R)
        assert np.all(np.diff(rho.diffs) < 0)
        # the 1/R correction leaves an O(1/(R0 R1)) remainder
        assert rho(np.array([[1.0], [-1.0]])) == pytest.approx([1.0, 1.0], abs=1.0 / (1e3 * 1e4))

    def test_diverges(self):
        with pytest.raises(ValueError, match="recession estimate diverges"):
            recession(Perturbation(lambda y: np.sum(y * y, axis=-1) ** 0.5 * np.log1p(np.sum(y * y, axis=-1))))

    @given(st.floats(0.1, 10.0))
    def test_positive_homogeneity(self, s):
        z = perturbation_from_config({"kind": "sum", "terms": [{"kind": "norm", "coeff": 2},
                                                                {"kind": "soft_norm"}]})
        nu = np.array([[0.7], [-1.3]])
        assert np.allclose(z.recession(s * nu), s * z.recession(nu))
        R = np.array([[10.0], [-1e3], [1e4]])
        assert np.all(np.abs(z.recession(R) - z(R)) <= z.bound + 1e-9)

    def test_config_grammar(self):
        z = perturbation_from_config({"kind": "support", "polytope": [[-1, -1], [1, -1], [1, 1], [-1, 1]]})
        assert z(np.array([0.5, -2.0])) == pytest.approx(2.5)
        with pytest.raises(ValueError):
            perturbation_from_config({"kind": "norm", "coef": 1})
        with pytest.raises(ValueError):
            perturbation_from_config({"kind": "cube"})

    def test_plq_approximation_accuracy(self):
        z = Perturbation.soft_norm()
        p = plq_approximation(z)
        y = np.concatenate([np.linspace(-50, 50, 2001), [1e3, -1e4]])
        assert np.max(np.abs(p(y) - z.eval1d(y))) < 1e-8


class TestHopfLax:
    def test_first_order_decay(self):
        z = Perturbation.norm()
        res = []
        for N in (64, 128, 256):
            u = GridFn.from_function(lambda x: x * x, Interval(-1, 1), N)
            res.append(hopf_lax_residual(u, z, 0.1).max_residual)
        rates = np.log2(np.array(res[:-1]) / np.array(res[1:]))
        assert np.all(rates >= 0.8)

    def test_zero_zeta(self):
        u = GridFn.from_function(lambda x: x * x, Interval(-1, 1), 101)
        r = hopf_lax_residual(u, Perturbation.constant(0.0), 0.1)
        assert r.max_residual < 1e-12

    def test_constant_shift(self):
        u = GridFn.from_function(lambda x: np.zeros_like(x), Interval(-1, 1), 101)
        r = hopf_lax_residual(u, Perturbation.constant(1.0), 0.2)
        assert r.max_residual < 1e-12

    def test_common_grid_roundoff(self):
        u = GridFn.from_function(lambda x: np.sum(x * x, axis=-1), ConvexPolygon.box((-1, -1), (1, 1)), 65)
        z = Perturbation.support([[-1, -1], [1, -1], [1, 1], [-1, 1]])
        assert hopf_lax_residual(u, z, 0.1, common_grid=True).max_residual < 1e-8
