"""E[X] bounds for the 6-level single-proxy model.

Two tables: the nested assumption chain, then an epsilon grid for A0 on its
own and together with A2 and A3.

    python scripts/proxy_sweep.py [--spec specs/single_proxy.yaml] [--grid 0,0.05,...]
"""

from __future__ import annotations

import argparse
import csv
import sys

import numpy as np

from pidbounds.pipeline import ModelContext, solve_problem
from pidbounds.specfile import parse_spec


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--spec", default="specs/single_proxy.yaml")
    ap.add_argument("--grid", default=",".join(f"{v:.2f}" for v in np.arange(0.0, 0.51, 0.05)))
    args = ap.parse_args(argv)

    ctx = ModelContext(parse_spec(args.spec))
    out = csv.writer(sys.stdout)
    out.writerow(["assumptions", "epsilon", "lower", "upper", "width"])
    for subset in ([], ["A0"], ["A0", "A2"], ["A0", "A2", "A3"]):
        rec, _ = solve_problem(ctx.problem(subset))
        out.writerow([rec["subset"], "", f"{rec['lower']:.6f}", f"{rec['upper']:.6f}",
                      f"{rec['upper'] - rec['lower']:.6f}"])
    for subset in (["A0"], ["A0", "A2", "A3"]):
        for eps in (float(v) for v in args.grid.split(",")):
            rec, _ = solve_problem(ctx.problem(subset, "A0.epsilon", eps))
            if rec["status"] != "optimal":
                out.writerow([rec["subset"], eps, "", "", rec["status"]])
                continue
            out.writerow([rec["subset"], eps, f"{rec['lower']:.6f}", f"{rec['upper']:.6f}",
                          f"{rec['upper'] - rec['lower']:.6f}"])


if __name__ == "__main__":
    main()
