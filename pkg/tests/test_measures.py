import math

import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st
from scipy.integrate import quad
from scipy.special import erf

from conftest import polyhedral_1d
from fwl.convexfn import GridFn, PLQFn, lift_body
from fwl.geometry import ConvexPolygon, Disk, Interval
from fwl.measures import (DiscreteMeasure, SingularConfiguration, WeightSpec, boundary_integral,
                          bulk_integral, density_integral, domain_side_integral, epigraph_measure,
                          exponential_domination, lower_hemisphere_integral, moment_measure,
                          sphere_singular_closed_form, sphere_singular_integral, surface_area_measure,
                          surface_measure_fn, weighted_surface_area_measure)
from fwl.transform import Perturbation

SQ = ConvexPolygon.box((0, 0), (1, 1))
E1 = math.exp(-1)
QMASS = math.sqrt(math.pi) * erf(1.0)


def _atom(meas, nu):
    k = np.argmin(np.linalg.norm(meas.locations - np.asarray(nu, dtype=float), axis=1))
    assert np.linalg.norm(meas.locations[k] - nu) < 1e-12
    return meas.weights[k]


class TestWeightSpec:
    def test_builtin(self):
        w = WeightSpec()
        assert w.survival(0.5) == pytest.approx(math.exp(-0.5))
        assert w.plain

    def test_table_matches_exp(self):
        z = np.linspace(-2, 12, 1401)
        w = WeightSpec({"z": z, "phi": np.exp(-z)})
        t = np.array([-1.0, 0.0, 0.7, 5.0, 20.0])
        assert np.allclose(w.survival(t), np.exp(-t), rtol=1e-4)
        assert np.all(np.diff(w.survival(np.linspace(-3, 30, 200))) <= 0)

    def test_bad_inputs(self):
        with pytest.raises(ValueError):
            WeightSpec(psi="cauchy")
        with pytest.raises(ValueError):
            WeightSpec(q=-1.0)
        with pytest.raises(ValueError):
            WeightSpec({"z": np.linspace(0, 1, 12), "phi": np.linspace(0, 1, 12)})
        with pytest.raises(ValueError):
            WeightSpec.from_config({"phi": "exp", "weight": 2})

    def test_config_round_trip(self):
        w = WeightSpec.from_config({"psi": "gauss", "q": 0.5})
        assert WeightSpec.from_config(w.to_dict()).to_dict() == w.to_dict()


class TestEpigraphMeasure:
    def test_unit_cube(self):
        assert epigraph_measure(PLQFn.indicator(0, 1)) == pytest.approx(1.0, abs=1e-15)
        g = GridFn.from_function(lambda x: np.zeros(x.shape[:-1]), SQ, 64)
        assert epigraph_measure(g) == pytest.approx(1.0, abs=1e-12)

    def test_quadratic_cap(self, quad_cap):
        assert epigraph_measure(quad_cap) == pytest.approx(QMASS, abs=1e-14)

    def test_disk_singular(self):
        g = GridFn.from_function(lambda x: np.zeros(x.shape[:-1]), Disk((0, 0), 1.0), 128)
        assert epigraph_measure(g, WeightSpec(q=0.5)) == pytest.approx(4 * math.pi, rel=1e-8)

    def test_exact_singular_1d(self):
        # int_{-1}^{1} |x|^{q-1} dx = 2 / q
        for q in (0.25, 0.5, 2.0):
            assert epigraph_measure(PLQFn.indicator(-1, 1), WeightSpec(q=q)) == pytest.approx(2 / q, rel=1e-10)

    def test_gauss_psi(self):
        v = epigraph_measure(PLQFn.indicator(-1, 1), WeightSpec(psi="gauss"))
        assert v == pytest.approx(erf(1 / math.sqrt(2)), rel=1e-12)

    def test_non_integrable(self):
        with pytest.raises(ValueError, match="non-integrable"):
            epigraph_measure(PLQFn.affine(0.0, 0.0))

    def test_grid_converges(self):
        errs = []
        for N in (32, 64, 128):
            g = GridFn.from_function(lambda x: x * x, Interval(-1, 1), N)
            errs.append(abs(epigraph_measure(g) - QMASS))
        assert errs[0] > errs[1] > errs[2]


class TestBodies:
    def test_square(self):
        S = surface_area_measure(SQ)
        assert len(S) == 4
        for nu in ([1, 0], [-1, 0], [0, 1], [0, -1]):
            assert _atom(S, nu) == pytest.approx(1.0)

    def test_scaled_square(self):
        S = surface_area_measure(SQ.scale(2.0))
        assert np.allclose(S.weights, 2.0)

    def test_triangle(self):
        S = surface_area_measure(ConvexPolygon(np.array([[0, 0], [1, 0], [0, 1]])))
        assert _atom(S, [0, -1]) == pytest.approx(1.0)
        assert _atom(S, [-1, 0]) == pytest.approx(1.0)
        assert _atom(S, [1 / math.sqrt(2), 1 / math.sqrt(2)]) == pytest.approx(math.sqrt(2))

    def test_degenerate(self):
        with pytest.raises(ValueError, match="degenerate body"):
            surface_area_measure(ConvexPolygon(np.array([[0, 0], [1, 0]])))

    def test_weighted_uniform_equals_plain(self):
        assert np.allclose(weighted_surface_area_measure(SQ).weights, surface_area_measure(SQ).weights)

    def test_weighted_exp(self):
        S = weighted_surface_area_measure(SQ, lambda X: np.exp(-X[..., 1]))
        assert _atom(S, [0, 1]) == pytest.approx(E1)
        assert _atom(S, [0, -1]) == pytest.approx(1.0)
        assert _atom(S, [1, 0]) == pytest.approx(1 - E1)
        assert _atom(S, [-1, 0]) == pytest.approx(1 - E1)

    def test_weighted_singular_bottom_edge(self):
        S = weighted_surface_area_measure(SQ, q=0.5, strict=False)
        assert _atom(S, [0, -1]) == pytest.approx(2.0, rel=1e-10)
        assert _atom(S, [-1, 0]) == math.inf
        with pytest.raises(SingularConfiguration):
            weighted_surface_area_measure(SQ, q=0.5)

    def test_weighted_singular_interior_origin(self):
        K = ConvexPolygon.box((-1, 0), (1, 1))
        S = weighted_surface_area_measure(K, q=0.5)
        # |x|^{-1/2} over [-1, 1] on the horizontal edges, |1|^{-1/2} = 1 on the sides
        assert _atom(S, [0, -1]) == pytest.approx(4.0, rel=1e-10)
        assert _atom(S, [1, 0]) == pytest.approx(1.0)

    def test_weak_continuity(self):
        Psi = lambda X: np.exp(-X[..., 1])
        fs = [lambda nu: np.ones(len(nu)), lambda nu: nu[:, 0] ** 2, lambda nu: np.exp(nu[:, 1])]
        base = weighted_surface_area_measure(SQ, Psi)
        for f in fs:
            target = base.integrate(f)
            errs = []
            for m in (4, 8, 16, 32, 64):
                Km = ConvexPolygon(SQ.vertices + np.array([[0, 0], [1 / m, 0], [0, 0.5 / m], [0, 0]]))
                errs.append(abs(weighted_surface_area_measure(Km, Psi).integrate(f) - target))
            assert all(b < a for a, b in zip(errs, errs[1:]))


class TestFunctionMeasures:
    def test_moment_indicator(self):
        M = moment_measure(PLQFn.indicator(-1, 1))
        assert len(M) == 1
        assert M.locations[0, 0] == 0.0 and M.weights[0] == pytest.approx(2.0)

    def test_moment_mass(self, quad_cap):
        assert moment_measure(quad_cap).total == pytest.approx(QMASS, rel=1e-12)

    def test_moment_histogram(self, quad_cap):
        M = moment_measure(quad_cap, bins=64)
        y = M.locations[:, 0]
        for s in (-1.5, -0.3, 0.4, 1.9):
            emp = M.weights[y <= s].sum()
            want = quad(lambda t: 0.5 * math.exp(-t * t / 4), -2, s)[0]
            assert emp == pytest.approx(want, abs=4.0 / 64)

    def test_moment_grid_mass(self):
        g = GridFn.from_function(lambda x: np.sum(x * x, axis=-1), SQ, 64)
        assert moment_measure(g).total == pytest.approx(density_integral(g), rel=1e-12)

    @given(polyhedral_1d(), st.sampled_from(["one", "gauss"]))
    def test_mass_conservation(self, u, psi):
        w = WeightSpec(psi=psi)
        assert moment_measure(u, w).total == pytest.approx(density_integral(u, w), rel=1e-10)

    def test_surface_fn_examples(self, quad_cap):
        S = surface_measure_fn(PLQFn.indicator(-1, 1))
        assert np.allclose(S.weights, 1.0)
        assert np.allclose(surface_measure_fn(quad_cap).weights, E1)
        g = GridFn.from_function(lambda x: np.zeros(x.shape[:-1]), SQ, 32)
        S2 = surface_measure_fn(g)
        assert len(S2) == 4 and np.allclose(S2.weights, 1.0)

    @given(polyhedral_1d(), polyhedral_1d())
    def test_push_forward_equivalence(self, u, v):
        z = Perturbation.conjugate_of(v)
        dom_v = v.domain()
        M = moment_measure(u)
        S = surface_measure_fn(u)
        pushed = M.integrate(lambda y: z.eval1d(y[:, 0])) + S.integrate(lambda nu: dom_v.support(nu[:, 0]))
        direct = bulk_integral(u, z) + boundary_integral(u, z)
        assert pushed == pytest.approx(direct, rel=1e-10, abs=1e-10)


class TestTerms:
    def test_bulk_examples(self, quad_cap):
        ind = PLQFn.indicator(-1, 1)
        assert bulk_integral(ind, Perturbation.norm()) == pytest.approx(0.0, abs=1e-15)
        assert bulk_integral(ind, Perturbation.constant(1.0)) == pytest.approx(2.0)
        assert bulk_integral(quad_cap, Perturbation.norm()) == pytest.approx(2 - 2 * E1, abs=1e-13)

    def test_boundary_examples(self, quad_cap):
        ind = PLQFn.indicator(-1, 1)
        assert boundary_integral(ind, Perturbation.norm()) == pytest.approx(2.0)
        assert boundary_integral(ind, Perturbation.constant(1.0)) == 0.0
        assert boundary_integral(quad_cap, Perturbation.norm()) == pytest.approx(2 * E1, abs=1e-15)

    def test_singular_boundary(self):
        with pytest.raises(SingularConfiguration, match="singular boundary configuration"):
            boundary_integral(PLQFn.indicator(0, 1), Perturbation.norm(), WeightSpec(q=0.5))

    def test_grid_boundary_square(self):
        z = Perturbation.support([[-1, -1], [1, -1], [1, 1], [-1, 1]])
        # four edges, each int_{-1}^{1} e^{-1-s^2} ds
        exact = 4 * E1 * QMASS
        errs = []
        for N in (64, 128, 256):
            g = GridFn.from_function(lambda x: np.sum(x * x, axis=-1), ConvexPolygon.box((-1, -1), (1, 1)), N)
            errs.append(abs(boundary_integral(g, z) - exact) / exact)
        assert errs[-1] < 2e-5
        # second order in the grid step
        assert errs[0] / errs[1] > 3.5 and errs[1] / errs[2] > 3.5


class TestChangeOfVariables:
    ETAS = [lambda nu: np.ones(len(nu)), lambda nu: nu[:, 0] ** 2 + 0.5, lambda nu: np.exp(nu[:, 1])]

    @given(polyhedral_1d())
    def test_surface_vs_domain(self, u):
        K = lift_body(u)
        # an affine u lifts to a segment, which has no surface area measure
        assume(K.n_vertices >= 3 and K.area > 0)
        for eta in self.ETAS:
            a = lower_hemisphere_integral(K, eta)
            b = domain_side_integral(u, eta)
            assert a == pytest.approx(b, abs=1e-6)


class TestSphereAndTails:
    @pytest.mark.parametrize("q", [0.25, 0.5, 1.0])
    def test_singular_sphere_integral(self, q):
        exact = sphere_singular_closed_form(q, 1)
        errs = [abs(sphere_singular_integral(q, 1, panels=p) - exact) for p in (1, 2, 4, 8)]
        assert errs[-1] <= 1e-10 * exact
        assert all(b <= a + 1e-12 * exact for a, b in zip(errs, errs[1:]))

    def test_circle_closed_form(self):
        # n = 1: int_{S^1} |cos|^{q-1} = 2 B(1/2, q/2)
        assert sphere_singular_closed_form(1.0, 1) == pytest.approx(2 * math.pi)

    def test_exponential_domination(self, quad_cap):
        cert = exponential_domination(quad_cap)
        assert cert.holds
        g = GridFn.from_function(lambda x: np.sum(x * x, axis=-1), SQ, 33)
        assert exponential_domination(g, c=0.5).holds


def test_discrete_measure_validation():
    with pytest.raises(ValueError):
        DiscreteMeasure("R^n", np.zeros((2, 1)), np.array([1.0, -1.0]))
    m = DiscreteMeasure("R^n", np.array([[0.0], [1.0]]), np.array([1.0, 2.0]))
    assert m.total == 3.0 and m.integrate(lambda y: y[:, 0]) == 2.0
