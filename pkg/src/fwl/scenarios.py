"""Scenario configs: parsing, function/shape builders and execution.

A config is a YAML document with a ``scenarios`` list.  Unknown keys are
errors so that a typo cannot silently change what a scenario checks.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path

import numpy as np
import yaml

from .convexfn import GridFn, PLQFn, PolyhedralFn, plq_max_all
from .geometry import ConvexPolygon, Disk, Interval
from .measures import (WeightSpec, boundary_integral, bulk_integral, density_integral,
                       epigraph_measure, moment_measure)
from .transform import Perturbation, biconjugate, epi_scale, inf_conv, legendre, perturb
from .variation import (EXACT_TOL, VariationReport, aleksandrov_polytope, boundary_free_formula,
                        dual_check, grid_tolerance, kryvonos_langharst, rotem_check,
                        variation_check)
from .wulff import SphericalFn

Array = np.ndarray


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------
# strict records
# --------------------------------------------------------------------------

def _check_keys(rec: dict, allowed: set, required: set = frozenset(), where: str = "") -> None:
    if not isinstance(rec, dict):
        raise ConfigError(f"{where}: expected a mapping, got {rec!r}")
    extra = set(rec) - allowed
    if extra:
        raise ConfigError(f"{where}: unknown keys {sorted(extra)}")
    missing = set(required) - set(rec)
    if missing:
        raise ConfigError(f"{where}: missing keys {sorted(missing)}")


# --------------------------------------------------------------------------
# function grammar
# --------------------------------------------------------------------------

_FN_KEYS = {
    "indicator": {"interval", "box", "polygon", "ball"},
    "quadratic": {"coeff", "shift"},
    "max_affine": {"pieces"},
    "polyhedral": {"generators"},
    "sum": {"terms"},
}


def _fn_parts(spec: dict, where: str):
    """Split a function spec into (domain body or None, formula, exact PLQ or None)."""
    _check_keys(spec, _FN_KEYS.get(spec.get("kind"), set()) | {"kind"}, {"kind"}, where)
    kind = spec["kind"]
    if kind not in _FN_KEYS:
        raise ConfigError(f"{where}: unknown function kind {kind!r}")
    if kind == "indicator":
        keys = set(spec) - {"kind"}
        if len(keys) != 1:
            raise ConfigError(f"{where}: indicator needs exactly one of {sorted(_FN_KEYS['indicator'])}")
        (key,) = keys
        val = spec[key]
        if key == "interval":
            dom = Interval(float(val[0]), float(val[1]))
            return dom, lambda x, n: np.zeros(np.shape(x)), PLQFn.indicator(dom.lo, dom.hi)
        if key == "box":
            (a, b), (c, d) = val
            dom = ConvexPolygon.box((a, c), (b, d))
        elif key == "polygon":
            dom = ConvexPolygon(np.asarray(val, dtype=float))
        else:
            _check_keys(val, {"center", "radius"}, {"center", "radius"}, where + ".ball")
            dom = Disk(tuple(float(c) for c in val["center"]), float(val["radius"]))
        return dom, lambda x, n: np.zeros(np.shape(x)[:-1]), None
    if kind == "quadratic":
        # a * max(|x| - s, 0)^2; s = 0 is the plain quadratic
        a = float(spec.get("coeff", 1.0))
        sh = float(spec.get("shift", 0.0))
        if sh < 0:
            raise ConfigError(f"{where}: shift must be nonnegative")
        def f(x, n):
            r = np.abs(x) if n == 1 else np.linalg.norm(x, axis=-1)
            return a * np.maximum(r - sh, 0.0) ** 2
        if sh == 0.0:
            return None, f, PLQFn.quadratic(a)
        plq = PLQFn(np.array([-np.inf, -sh, sh, np.inf]),
                    np.array([[a, 2 * a * sh, a * sh * sh], [0.0, 0.0, 0.0], [a, -2 * a * sh, a * sh * sh]]))
        return None, f, plq
    if kind == "max_affine":
        pieces = np.asarray(spec["pieces"], dtype=float)
        if pieces.ndim != 2 or pieces.shape[1] not in (2, 3):
            raise ConfigError(f"{where}: pieces are rows [slope..., intercept]")
        if pieces.shape[1] == 2:
            f = lambda x, n: (np.asarray(x)[..., None] * pieces[:, 0] + pieces[:, 1]).max(axis=-1)
            plq = plq_max_all([PLQFn.affine(s, c) for s, c in pieces])
        else:
            f = lambda x, n: (x @ pieces[:, :2].T + pieces[:, 2]).max(axis=-1)
            plq = None
        return None, f, plq
    if kind == "polyhedral":
        gens = spec["generators"]
        pf = PolyhedralFn(np.array([[g[0]] for g in gens], dtype=float), np.array([g[1] for g in gens], dtype=float))
        plq = pf.to_plq()
        return plq.domain(), lambda x, n: plq(x), plq
    parts = [_fn_parts(t, f"{where}.terms[{i}]") for i, t in enumerate(spec["terms"])]
    doms = [p[0] for p in parts if p[0] is not None]
    if len(doms) > 1:
        raise ConfigError(f"{where}: at most one domain-carrying term per sum")
    formula = lambda x, n: sum(p[1](x, n) for p in parts)
    plq = None
    if all(p[2] is not None for p in parts):
        plq = parts[0][2]
        for p in parts[1:]:
            plq = plq + p[2]
    return (doms[0] if doms else None), formula, plq


def build_function(spec: dict, *, track: str = "exact", grid: int = 256, where: str = "u"):
    dom, formula, plq = _fn_parts(spec, where)
    if dom is None:
        raise ConfigError(f"{where}: function needs a compact domain (add an indicator term)")
    if track == "exact":
        if plq is None or not isinstance(dom, Interval):
            raise ConfigError(f"{where}: exact track supports one-dimensional constructs only")
        return plq
    if track != "grid":
        raise ConfigError(f"{where}: unknown track {track!r}")
    n = 1 if isinstance(dom, Interval) else 2
    return GridFn.from_function(lambda x: formula(x, n), dom, grid)


def build_perturbation(spec: dict, where: str = "zeta") -> Perturbation:
    try:
        return Perturbation.from_config(spec)
    except (ValueError, KeyError, TypeError) as exc:
        raise ConfigError(f"{where}: {exc}") from exc


_SPH_KEYS = {"constant": {"value"}, "support": {"polytope"}, "linear": {"vector"}, "sum": {"terms"}}


def build_spherical(spec: dict, where: str = "f") -> SphericalFn:
    kind = spec.get("kind") if isinstance(spec, dict) else None
    if kind not in _SPH_KEYS:
        raise ConfigError(f"{where}: unknown spherical function {spec!r}")
    _check_keys(spec, _SPH_KEYS[kind] | {"kind"}, _SPH_KEYS[kind] | {"kind"}, where)
    if kind == "constant":
        return SphericalFn.constant(float(spec["value"]))
    if kind == "support":
        return SphericalFn.support_of(ConvexPolygon(np.asarray(spec["polytope"], dtype=float)))
    if kind == "linear":
        return SphericalFn.linear(spec["vector"])
    fs = [build_spherical(t, f"{where}.terms[{i}]") for i, t in enumerate(spec["terms"])]
    out = fs[0]
    for g in fs[1:]:
        out = out + g
    return out


_DENSITIES = {
    "one": lambda X: np.ones(X.shape[:-1]),
    "exp_z": lambda X: np.exp(-X[..., 1]),
}


# --------------------------------------------------------------------------
# scenarios
# --------------------------------------------------------------------------

_COMMON = {"name", "kind", "verifies", "tolerance", "expected", "ladder"}
_KIND_KEYS = {
    "variation": {"u", "zeta", "weight", "track", "grid", "mode", "boundary_free", "antisymmetry"},
    "rotem": {"u", "v"},
    "dual": {"u", "v", "q"},
    "aleksandrov": {"body", "f", "directions"},
    "weighted_aleksandrov": {"body", "f", "density", "q", "directions", "translate"},
    "measure": {"u", "zeta", "weight", "quantity", "track", "grid"},
    "transform": {"op", "u", "v", "zeta", "t", "track", "grid", "samples"},
}
_REQUIRED = {
    "variation": {"u", "zeta"},
    "rotem": {"u", "v"},
    "dual": {"u", "v", "q"},
    "aleksandrov": {"body", "f"},
    "weighted_aleksandrov": {"body", "f"},
    "measure": {"u", "quantity", "expected"},
    "transform": {"op", "u", "expected"},
}


@dataclass
class Scenario:
    name: str
    kind: str
    spec: dict
    verifies: list = field(default_factory=list)

    @property
    def track(self) -> str:
        return self.spec.get("track", "exact")

    @property
    def is_grid(self) -> bool:
        return self.track == "grid"


def parse_scenario(rec: dict, index: int = 0) -> Scenario:
    where = f"scenarios[{index}]"
    if not isinstance(rec, dict) or "kind" not in rec or "name" not in rec:
        raise ConfigError(f"{where}: every scenario needs 'name' and 'kind'")
    kind = rec["kind"]
    if kind not in _KIND_KEYS:
        raise ConfigError(f"{where}: unknown scenario kind {kind!r}")
    _check_keys(rec, _COMMON | _KIND_KEYS[kind], _REQUIRED[kind] | {"name", "kind"}, where)
    if "ladder" in rec:
        _check_keys(rec["ladder"], {"h0", "steps"}, set(), where + ".ladder")
    if "weight" in rec:
        try:
            WeightSpec.from_config(rec["weight"])
        except ValueError as exc:
            raise ConfigError(f"{where}.weight: {exc}") from exc
    if rec.get("track", "exact") not in ("exact", "grid"):
        raise ConfigError(f"{where}: unknown track {rec['track']!r}")
    verifies = rec.get("verifies", [])
    if isinstance(verifies, str):
        verifies = [verifies]
    return Scenario(str(rec["name"]), kind, rec, list(verifies))


def load_config(source) -> list[Scenario]:
    """Parse a YAML config from a path or a text string."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        text = Path(source).read_text()
    else:
        text = source
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    if not isinstance(doc, dict):
        raise ConfigError("config must be a mapping with a 'scenarios' list")
    _check_keys(doc, {"scenarios", "seed"}, {"scenarios"}, "config")
    scen = [parse_scenario(r, i) for i, r in enumerate(doc["scenarios"])]
    names = [s.name for s in scen]
    if len(set(names)) != len(names):
        raise ConfigError("scenario names must be unique")
    return scen


def standard_suite() -> list[Scenario]:
    text = resources.files("fwl").joinpath("suites/standard.yaml").read_text()
    return load_config(text)


# --------------------------------------------------------------------------
# execution
# --------------------------------------------------------------------------

@dataclass
class Overrides:
    grid: int | None = None
    steps: int | None = None
    tol: float | None = None
    seed: int = 0


def _ladder(spec: dict, ov: Overrides) -> dict:
    lad = dict(spec.get("ladder", {}))
    out = {"h0": float(lad.get("h0", 1e-2)), "steps": int(lad.get("steps", 5))}
    if ov.steps is not None:
        out["steps"] = int(ov.steps)
    return out


def _value_report(name: str, value: float, expected: float, tol: float, relative: bool,
                  track: str, grid, runtime: float) -> VariationReport:
    err = abs(value - expected)
    rel = err / abs(expected) if expected != 0 else err
    ok = (rel if relative else err) <= tol
    return VariationReport(name, "value", [], float(value), float(expected), 0.0, float(expected),
                           err, rel, bool(ok), {"total_s": runtime}, float("nan"), track, grid, tol)


def _run_transform(sc: Scenario, ov: Overrides) -> VariationReport:
    s = sc.spec
    track = s.get("track", "exact")
    grid = ov.grid or s.get("grid", 256)
    t0 = time.perf_counter()
    u = build_function(s["u"], track=track, grid=grid)
    op = s["op"]
    if op == "legendre":
        out = legendre(u)
        if track == "grid":
            out = out.grid
    elif op == "biconjugate":
        out = biconjugate(u)
    elif op == "perturb":
        out = perturb(u, build_perturbation(s["zeta"]), float(s["t"]))
    elif op == "inf_conv":
        out = inf_conv(u, build_function(s["v"], track=track, grid=grid, where="v"))
    elif op == "epi_scale":
        out = epi_scale(float(s["t"]), u)
    else:
        raise ConfigError(f"{sc.name}: unknown op {op!r}")
    exp_spec = s["expected"]
    if op == "legendre":
        # the expected conjugate is given as a function on the dual line
        _, formula, plq = _fn_parts(exp_spec, "expected")
        ref = plq if plq is not None else (lambda x: formula(x, 1))
        lo, hi = s.get("samples", [-3.0, 3.0])
        xs = np.linspace(lo, hi, 601)
        if track == "grid":
            (a, b), = out.box
            xs = xs[(xs >= a) & (xs <= b)]
    else:
        ref = build_function(exp_spec, track="exact", where="expected")
        dom = ref.domain()
        pad = 0.1 * (dom.hi - dom.lo + 1)
        xs = np.linspace(dom.lo - pad, dom.hi + pad, 601)
        if track == "grid":
            inner = 2 * float(max(out.steps))
            xs = xs[(xs > dom.lo + inner) & (xs < dom.hi - inner)]
    got = np.asarray(out(xs), dtype=float)
    want = np.asarray(ref(xs), dtype=float)
    same_inf = np.isinf(got) == np.isinf(want)
    fin = np.isfinite(got) & np.isfinite(want)
    err = float(np.abs(got[fin] - want[fin]).max()) if fin.any() else 0.0
    if not same_inf.all():
        err = float("inf")
    default_tol = EXACT_TOL if track == "exact" else 0.05
    tol = ov.tol if ov.tol is not None else float(s.get("tolerance", default_tol))
    r = _value_report(sc.name, err, 0.0, tol, False, track, grid if track == "grid" else None,
                      time.perf_counter() - t0)
    r.rhs_bulk = r.rhs_total = 0.0
    return r


def _run_measure(sc: Scenario, ov: Overrides) -> VariationReport:
    s = sc.spec
    track = s.get("track", "exact")
    grid = ov.grid or s.get("grid", 256)
    t0 = time.perf_counter()
    u = build_function(s["u"], track=track, grid=grid)
    w = WeightSpec.from_config(s.get("weight"))
    q = s["quantity"]
    if q == "mu":
        val = epigraph_measure(u, w)
    elif q == "bulk":
        val = bulk_integral(u, build_perturbation(s["zeta"]), w)
    elif q == "boundary":
        val = boundary_integral(u, build_perturbation(s["zeta"]), w)
    elif q == "moment_mass":
        val = moment_measure(u, w).total
    elif q == "density":
        val = density_integral(u, w)
    else:
        raise ConfigError(f"{sc.name}: unknown quantity {q!r}")
    default_tol = EXACT_TOL if track == "exact" else grid_tolerance(grid)
    tol = ov.tol if ov.tol is not None else float(s.get("tolerance", default_tol))
    return _value_report(sc.name, val, float(s["expected"]), tol, track == "grid", track,
                         grid if track == "grid" else None, time.perf_counter() - t0)


def _with_expected(r: VariationReport, s: dict, tol: float) -> VariationReport:
    """Also hold the right-hand side to a closed-form value when one is given."""
    if "expected" in s:
        exp = float(s["expected"])
        gap = abs(r.rhs_total - exp)
        if r.track == "grid":
            gap /= abs(exp) if exp else 1.0
        if gap > tol:
            r.passed = False
            r.notes = (r.notes + "; " if r.notes else "") + f"rhs differs from expected by {gap:.3g}"
    return r


def run_scenario(sc: Scenario, ov: Overrides | None = None) -> VariationReport:
    ov = Overrides() if ov is None else ov
    s = sc.spec
    lad = _ladder(s, ov)
    if sc.kind == "variation":
        track = s.get("track", "exact")
        grid = ov.grid or s.get("grid", 256)
        u = build_function(s["u"], track=track, grid=grid)
        zeta = build_perturbation(s["zeta"])
        w = WeightSpec.from_config(s.get("weight"))
        default = EXACT_TOL if track == "exact" else grid_tolerance(grid)
        tol = ov.tol if ov.tol is not None else float(s.get("tolerance", default))
        r = variation_check(sc.name, u, zeta, w, mode=s.get("mode", "auto"), tol=tol, **lad)
        r = _with_expected(r, s, tol)
        if s.get("boundary_free"):
            # the bulk-only formula must miss exactly the boundary term
            gap = abs((r.lhs - boundary_free_formula(u, zeta, w)) - r.rhs_boundary)
            if gap > tol * (1 if track == "exact" else abs(r.rhs_total)):
                r.passed = False
            r.notes = (r.notes + "; " if r.notes else "") + f"lhs - bulk - boundary = {gap:.3g}"
        if s.get("antisymmetry"):
            neg = variation_check(sc.name, u, -zeta, w, mode=s.get("mode", "auto"), tol=tol, **lad)
            gap = abs(neg.lhs + r.lhs)
            if gap > tol * (1 if track == "exact" else abs(r.rhs_total)) or not neg.passed:
                r.passed = False
            r.notes = (r.notes + "; " if r.notes else "") + f"lhs(zeta) + lhs(-zeta) = {gap:.3g}"
        return r
    if sc.kind in ("rotem", "dual"):
        u = build_function(s["u"])
        v = build_function(s["v"], where="v")
        tol = ov.tol if ov.tol is not None else float(s.get("tolerance", EXACT_TOL if sc.kind == "rotem" else 1e-8))
        if sc.kind == "rotem":
            r = rotem_check(u, v, name=sc.name, tol=tol, **lad)
        else:
            r = dual_check(u, v, float(s["q"]), name=sc.name, tol=tol, **lad)
        return _with_expected(r, s, tol)
    if sc.kind == "aleksandrov":
        K = ConvexPolygon(np.asarray(s["body"], dtype=float))
        tol = ov.tol if ov.tol is not None else float(s.get("tolerance", 1e-4))
        r = aleksandrov_polytope(K, build_spherical(s["f"]), directions=int(s.get("directions", 4096)),
                                 tol=tol, name=sc.name, **lad)
        return _with_expected(r, s, tol)
    if sc.kind == "weighted_aleksandrov":
        K = ConvexPolygon(np.asarray(s["body"], dtype=float))
        dens = s.get("density", "one")
        if dens not in _DENSITIES:
            raise ConfigError(f"{sc.name}: unknown density {dens!r}")
        Psi = _DENSITIES[dens]
        if "translate" in s:
            Y = np.asarray(s["translate"], dtype=float)
            K = K.translate(Y)
            Psi = (lambda P, Y=Y, base=Psi: base(P - Y))
        tol = ov.tol if ov.tol is not None else float(s.get("tolerance", 1e-3))
        r = kryvonos_langharst(K, build_spherical(s["f"]), Psi, s.get("q"),
                               directions=int(s.get("directions", 4096)), tol=tol, name=sc.name, **lad)
        if "expected" in s:
            exp = float(s["expected"])
            if abs(r.rhs_total - exp) > tol * abs(exp):
                r.passed = False
        return r
    if sc.kind == "measure":
        return _run_measure(sc, ov)
    if sc.kind == "transform":
        return _run_transform(sc, ov)
    raise ConfigError(f"unknown scenario kind {sc.kind!r}")


def finest_step(r: VariationReport):
    return r.ladder[-1]["h"] if r.ladder else None
