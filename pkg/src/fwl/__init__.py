"""Functional Wulff shapes, weighted epigraph measures and first-variation checks
for convex functions and convex bodies."""

from .convexfn import GridFn, ImproperFunction, PLQFn, PolyhedralFn
from .geometry import ConvexPolygon, Disk, Interval
from .measures import (DiscreteMeasure, SingularConfiguration, WeightSpec, boundary_integral,
                       bulk_integral, epigraph_measure, moment_measure, surface_area_measure,
                       surface_measure_fn, weighted_surface_area_measure)
from .scenarios import ConfigError, load_config, run_scenario, standard_suite
from .transform import (Perturbation, PerturbationError, biconjugate, epi_scale, hopf_lax_residual,
                        inf_conv, legendre, perturb, recession)
from .variation import (VariationReport, aleksandrov_polytope, analytic_first_variation, dual_check,
                        kryvonos_langharst, numeric_first_variation, rotem_check, variation_check)
from .wulff import SphericalFn, ZetaBar, functional_wulff, wulff_flow, wulff_shape

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "ConvexPolygon", "DiscreteMeasure", "Disk", "GridFn", "ImproperFunction",
    "Interval", "PLQFn", "Perturbation", "PerturbationError", "PolyhedralFn", "SingularConfiguration",
    "SphericalFn", "VariationReport", "WeightSpec", "ZetaBar", "aleksandrov_polytope",
    "analytic_first_variation", "biconjugate", "boundary_integral", "bulk_integral", "dual_check",
    "epi_scale", "epigraph_measure", "functional_wulff", "hopf_lax_residual", "inf_conv",
    "kryvonos_langharst", "legendre", "load_config", "moment_measure", "numeric_first_variation",
    "perturb", "recession", "rotem_check", "run_scenario", "standard_suite", "surface_area_measure",
    "surface_measure_fn", "variation_check", "weighted_surface_area_measure", "wulff_flow",
    "wulff_shape",
]
