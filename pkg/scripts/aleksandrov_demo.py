#!/usr/bin/env python3
"""Area variation of polygons under the Wulff flow, plain and weighted.

Compares the finite-difference derivative of Area(F_t K) (and of a weighted
measure of F_t K) with the surface-area-measure formula.

    python3 scripts/aleksandrov_demo.py [--directions 4096]
"""
import argparse

import numpy as np

from fwl.geometry import ConvexPolygon
from fwl.variation import aleksandrov_polytope, kryvonos_langharst, translated_recheck
from fwl.wulff import SphericalFn


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--directions", type=int, default=4096)
    a = p.parse_args()
    square = ConvexPolygon.box((0, 0), (1, 1))
    triangle = ConvexPolygon(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))
    cases = [
        ("square, f = 1", square, SphericalFn.constant(1.0)),
        ("square, f = h_K", square, SphericalFn.support_of(square)),
        ("triangle, f = 1", triangle, SphericalFn.constant(1.0)),
        ("triangle, f = h_square", triangle, SphericalFn.support_of(ConvexPolygon.box((-0.5, -0.5), (0.5, 0.5)))),
    ]
    for label, K, f in cases:
        r = aleksandrov_polytope(K, f, directions=a.directions)
        print(f"{label:24s} FD={r.lhs:.10f}  formula={r.rhs_total:.10f}  err={r.abs_err:.2e}")

    Psi = lambda X: np.exp(-X[..., 1])
    f = SphericalFn.constant(1.0)
    r = kryvonos_langharst(square, f, Psi, directions=a.directions)
    print(f"\nweighted, Psi = exp(-z)  FD={r.lhs:.10f}  formula={r.rhs_total:.10f}  rel={r.rel_err:.2e}")
    base, moved = translated_recheck(square, f, Psi, [5.0, 5.0], directions=a.directions)
    print(f"translated by (5, 5)     FD={moved.lhs:.10f}  formula={moved.rhs_total:.10f}  rel={moved.rel_err:.2e}")


if __name__ == "__main__":
    main()
