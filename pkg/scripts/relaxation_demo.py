"""Binary chain A -> X -> Y: relaxed LP bounds against the closed form.

The chain has no confounder, so the LP is solved on the relaxed graph and
gives outer bounds. For random chains this prints the LP interval, the
closed-form set (possibly two intervals) and a brute-force grid search.

    python scripts/relaxation_demo.py [--trials 10] [--seed 0]
"""

from __future__ import annotations

import argparse

import numpy as np

from pidbounds import NetworkSpec, VariableSpec
from pidbounds.analytic import prop3_bounds
from pidbounds.constraints import ObservedData
from pidbounds.oracle import parametric_chain_search, sample_chain
from pidbounds.pipeline import Model, ModelContext, solve_problem
from pidbounds.targets import TargetSpec

CHAIN = NetworkSpec(
    [VariableSpec("A", "observed", 2), VariableSpec("X", "latent-target", 2), VariableSpec("Y", "observed", 2)],
    [("A", "X"), ("X", "Y")],
)


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--trials", type=int, default=10)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    print(f"{'P(X=1)':>8}  {'relaxed LP':>18}  {'closed form':<34}  grid search")
    for _ in range(args.trials):
        s = sample_chain(rng)
        data = ObservedData(("A",), ("Y",), {(a,): float(s.p_a[a]) for a in range(2)},
                            {(a,): [1 - s.p1_given_a[a], s.p1_given_a[a]] for a in range(2)})
        ctx = ModelContext(Model(CHAIN, data, [], TargetSpec("pmf", "X", 1), relax=True))
        rec, _ = solve_problem(ctx.problem([]))
        exact = prop3_bounds(s.p1, s.p1_given_a)
        grid = parametric_chain_search(s.p1, s.p1_given_a, resolution=1e-2, refine=2)
        lp = f"[{rec['lower']:.4f}, {rec['upper']:.4f}]"
        print(f"{s.px1:8.4f}  {lp:>18}  {str(exact):<34}  {grid}")
    print("\nrelaxation:", ctx.report.as_dict())


if __name__ == "__main__":
    main()
