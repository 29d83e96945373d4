#!/usr/bin/env python3
"""Grid refinement study for the two planar scenarios of the standard suite.

Prints error against resolution for the square and the disk, plus the
Hopf-Lax residual of the square scenario, and writes plot-ready CSVs.

    python3 scripts/convergence_2d.py [--grids 64,128,256,512] [--out results]
"""
import argparse
import csv
from pathlib import Path

import numpy as np

from fwl.cli import fitted_order
from fwl.convexfn import GridFn
from fwl.geometry import ConvexPolygon
from fwl.scenarios import Overrides, run_scenario, standard_suite
from fwl.transform import Perturbation, hopf_lax_residual


def main() -> None:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--grids", default="64,128,256,512")
    p.add_argument("--out", default="results")
    a = p.parse_args()
    grids = [int(g) for g in a.grids.split(",")]
    out = Path(a.out)
    out.mkdir(parents=True, exist_ok=True)
    suite = {s.name: s for s in standard_suite()}

    for name in ("grid_square_2d", "grid_disk_2d"):
        rows = []
        for N in grids:
            r = run_scenario(suite[name], Overrides(grid=N))
            rows.append((N, r.lhs, r.rhs_total, r.rel_err))
            print(f"{name:16s} N={N:4d}  lhs={r.lhs:.10f}  rhs={r.rhs_total:.10f}  rel_err={r.rel_err:.3e}")
        order = fitted_order(grids, [row[3] for row in rows])
        print(f"{name:16s} fitted order: {'n/a' if order is None else f'{order:.3f}'}\n")
        with open(out / f"convergence_{name}.csv", "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["grid", "lhs", "rhs_total", "rel_err"])
            w.writerows(rows)

    box = ConvexPolygon.box((-1, -1), (1, 1))
    zeta = Perturbation.support(box.vertices)
    res = []
    for N in grids:
        u = GridFn.from_function(lambda x: np.sum(x * x, axis=-1), box, N)
        res.append(hopf_lax_residual(u, zeta, 0.1).max_residual)
        print(f"hopf_lax         N={N:4d}  max residual={res[-1]:.3e}")
    order = fitted_order(grids, res)
    print(f"hopf_lax         fitted order: {'n/a' if order is None else f'{order:.3f}'}")
    with open(out / "hopf_lax_residual.csv", "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["grid", "max_residual"])
        w.writerows(zip(grids, res))


if __name__ == "__main__":
    main()
