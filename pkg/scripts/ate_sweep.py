"""ATE bounds for the randomized-trial and partial-compliance examples.

For each spec: every assumption subset in its sweep, then an A0 epsilon grid
with all assumptions switched on. The randomized-trial space has about 1.7M
atoms; each solve takes a few seconds.

    python scripts/ate_sweep.py [--specs a.yaml b.yaml] [--grid 0.05,0.1,0.2]
"""

from __future__ import annotations

import argparse
import csv
import sys

from pidbounds.pipeline import ModelContext, solve_problem
from pidbounds.specfile import parse_spec


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--specs", nargs="+",
                    default=["specs/partial_compliance.yaml", "specs/randomized_trial.yaml"])
    ap.add_argument("--grid", default="0.05,0.1,0.2,0.3")
    args = ap.parse_args(argv)

    out = csv.writer(sys.stdout)
    out.writerow(["spec", "assumptions", "epsilon", "lower", "upper", "status", "seconds"])
    for path in args.specs:
        model = parse_spec(path)
        ctx = ModelContext(model)
        names = [a["name"] for a in model.assumptions]
        points = [(s, None) for s, _ in model.sweep.points(model.assumptions)]
        if "A0" in names:
            points += [(names, float(v)) for v in args.grid.split(",")]
        for subset, eps in points:
            problem = ctx.problem(subset, "A0.epsilon" if eps is not None else None, eps)
            rec, _ = solve_problem(problem)
            fmt = lambda v: "" if v is None else f"{v:.6f}"
            out.writerow([path, rec["subset"], "" if eps is None else eps, fmt(rec["lower"]),
                          fmt(rec["upper"]), rec["status"], f"{rec['runtime']:.2f}"])
            sys.stdout.flush()


if __name__ == "__main__":
    main()
