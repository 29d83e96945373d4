"""Command line front end: ``fwl run``, ``fwl convergence`` and ``fwl list``.

Exit codes: 0 when every selected scenario passes, 1 on a tolerance failure,
2 on a config error or an unknown scenario name.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace
from pathlib import Path

import numpy as np

from .scenarios import ConfigError, Overrides, Scenario, finest_step, load_config, run_scenario, standard_suite
from .variation import VariationReport

CSV_HEADER = ["scenario", "mode", "grid", "h", "lhs", "rhs_bulk", "rhs_boundary", "rhs_total",
              "abs_err", "rel_err", "pass", "runtime_ms"]
DEFAULT_GRIDS = (64, 128, 256, 512)


class UsageError(Exception):
    """Raised for conditions that map to exit code 2."""


def _num(x) -> str:
    if x is None:
        return ""
    x = float(x)
    if math.isnan(x):
        return "nan"
    return repr(x)


def _workers() -> int:
    raw = os.environ.get("FWL_THREADS")
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            raise UsageError(f"FWL_THREADS must be an integer, got {raw!r}")
    return os.cpu_count() or 1


# --------------------------------------------------------------------------
# scenario selection
# --------------------------------------------------------------------------

def _load(args) -> list[Scenario]:
    if args.config:
        path = Path(args.config)
        if not path.exists():
            raise UsageError(f"config file not found: {path}")
        return load_config(path)
    if args.suite != "standard":
        raise UsageError(f"unknown suite {args.suite!r} (available: standard)")
    return standard_suite()


def _select(scen: list[Scenario], names: list[str] | None) -> list[Scenario]:
    if not names:
        return scen
    by_name = {s.name: s for s in scen}
    missing = [n for n in names if n not in by_name]
    if missing:
        raise UsageError(f"unknown scenario: {', '.join(missing)}")
    return [by_name[n] for n in names]


def _overrides(args) -> Overrides:
    return Overrides(grid=args.grid, steps=args.steps, tol=args.tol, seed=args.seed)


def _execute(scen: list[Scenario], ov: Overrides) -> list[VariationReport]:
    """Run scenarios on a worker pool; results keep config order."""
    np.random.seed(ov.seed)
    workers = min(_workers(), max(1, len(scen)))
    if workers == 1:
        return [run_scenario(s, ov) for s in scen]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda s: run_scenario(s, ov), scen))


# --------------------------------------------------------------------------
# output
# --------------------------------------------------------------------------

def _runtime_ms(r: VariationReport) -> float:
    return 1000.0 * sum(float(v) for v in r.runtimes.values())


def format_csv(reports: list[VariationReport], timing: bool = False) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(CSV_HEADER)
    for r in reports:
        w.writerow([r.scenario, r.mode, "" if r.grid is None else int(r.grid), _num(finest_step(r)),
                    _num(r.lhs), _num(r.rhs_bulk), _num(r.rhs_boundary), _num(r.rhs_total),
                    _num(r.abs_err), _num(r.rel_err), "true" if r.passed else "false",
                    f"{_runtime_ms(r):.3f}" if timing else ""])
    return buf.getvalue()


def _clean(obj):
    if isinstance(obj, float):
        return None if math.isnan(obj) else obj
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.generic):
        return _clean(obj.item())
    return obj


def format_json(reports: list[VariationReport], seed: int, timing: bool = False) -> str:
    rows = []
    for r in reports:
        d = r.to_dict()
        if not timing:
            d.pop("runtimes")
        rows.append(d)
    doc = {"seed": seed, "passed": all(r.passed for r in reports), "reports": rows}
    return json.dumps(_clean(doc), indent=2, sort_keys=True) + "\n"


def _emit(text: str, out: str | None, filename: str) -> None:
    if out is None:
        sys.stdout.write(text)
        return
    d = Path(out)
    d.mkdir(parents=True, exist_ok=True)
    (d / filename).write_text(text)


# --------------------------------------------------------------------------
# commands
# --------------------------------------------------------------------------

def cmd_run(args) -> int:
    scen = _select(_load(args), args.scenario)
    reports = _execute(scen, _overrides(args))
    if args.format == "csv":
        _emit(format_csv(reports, args.timing), args.out, "results.csv")
    else:
        _emit(format_json(reports, args.seed, args.timing), args.out, "results.json")
    if args.out is not None:
        # both machine-readable forms land in the output directory
        other = ("results.json", format_json(reports, args.seed, args.timing)) if args.format == "csv" \
            else ("results.csv", format_csv(reports, args.timing))
        _emit(other[1], args.out, other[0])
    failed = [r.scenario for r in reports if not r.passed]
    for name in failed:
        print(f"FAIL {name}", file=sys.stderr)
    return 1 if failed else 0


def fitted_order(grids, errors) -> float | None:
    """Least-squares slope of -log(err) against log(N); None when undefined."""
    pts = [(g, e) for g, e in zip(grids, errors) if g and e > 0 and math.isfinite(e)]
    if len(pts) < 2:
        return None
    x = np.log([p[0] for p in pts])
    y = np.log([p[1] for p in pts])
    return float(-np.polyfit(x, y, 1)[0])


def convergence_table(sc: Scenario, grids, ov: Overrides) -> tuple[list[VariationReport], float | None]:
    if not sc.is_grid:
        return [run_scenario(sc, ov)], None
    reports = [run_scenario(sc, replace(ov, grid=int(g))) for g in grids]
    return reports, fitted_order([r.grid for r in reports], [r.rel_err for r in reports])


def cmd_convergence(args) -> int:
    scen = _select(_load(args), [args.scenario])[0]
    grids = [int(g) for g in args.grids.split(",")] if args.grids else list(DEFAULT_GRIDS)
    if any(g < 2 for g in grids):
        raise UsageError("grid sizes must be at least 2")
    reports, order = convergence_table(scen, grids, _overrides(args))
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["grid", "lhs", "rhs_total", "abs_err", "rel_err", "pass"])
    for r in reports:
        w.writerow(["" if r.grid is None else int(r.grid), _num(r.lhs), _num(r.rhs_total),
                    _num(r.abs_err), _num(r.rel_err), "true" if r.passed else "false"])
    table = buf.getvalue()
    errs = [r.rel_err for r in reports]
    monotone = all(b < a for a, b in zip(errs, errs[1:]))
    order_txt = "n/a" if order is None else f"{order:.3f}"
    if args.out is not None:
        _emit(table, args.out, f"convergence_{scen.name}.csv")
    sys.stdout.write(table)
    print(f"# fitted order: {order_txt}")
    if len(reports) > 1:
        print(f"# monotone decay: {'yes' if monotone else 'no'}")
    return 0 if all(r.passed for r in reports[-1:]) else 1


def cmd_list(args) -> int:
    for sc in _load(args):
        verifies = "; ".join(sc.verifies)
        print(f"{sc.name}\t{sc.kind}\t{sc.track}\t{verifies}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fwl", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def source(sp):
        sp.add_argument("--suite", default="standard", help="built-in suite name")
        sp.add_argument("--config", help="YAML config file (overrides --suite)")

    def knobs(sp):
        sp.add_argument("--grid", type=int, help="override grid resolution")
        sp.add_argument("--steps", type=int, help="override finite-difference ladder length")
        sp.add_argument("--tol", type=float, help="override pass tolerance")
        sp.add_argument("--seed", type=int, default=0)
        sp.add_argument("--out", help="directory for report files")

    r = sub.add_parser("run", help="run scenarios and report both sides")
    source(r)
    knobs(r)
    r.add_argument("--scenario", action="append", help="scenario name (repeatable)")
    r.add_argument("--format", choices=("csv", "json-like"), default="csv")
    r.add_argument("--timing", action="store_true", help="fill the runtime_ms column")
    r.set_defaults(func=cmd_run)

    c = sub.add_parser("convergence", help="error against grid resolution")
    source(c)
    knobs(c)
    c.add_argument("--scenario", required=True)
    c.add_argument("--grids", help="comma-separated resolutions (default 64,128,256,512)")
    c.set_defaults(func=cmd_convergence)

    ls = sub.add_parser("list", help="list scenarios")
    source(ls)
    ls.set_defaults(func=cmd_list)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, ConfigError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
