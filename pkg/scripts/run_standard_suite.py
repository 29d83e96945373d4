#!/usr/bin/env python3
"""Run the standard verification suite and write results.csv / results.json.

    python3 scripts/run_standard_suite.py [--out results]
"""
import argparse
import sys

from fwl.cli import main

if __name__ == "__main__":
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--out", default="results")
    p.add_argument("--timing", action="store_true")
    a = p.parse_args()
    argv = ["run", "--suite", "standard", "--out", a.out] + (["--timing"] if a.timing else [])
    code = main(argv)
    print(f"wrote {a.out}/results.csv and {a.out}/results.json (exit {code})")
    sys.exit(code)
