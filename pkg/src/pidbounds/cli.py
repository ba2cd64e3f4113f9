"""Command-line entry point.

    pidbounds solve SPEC [--verify oracle] [--witnesses OUT] [--jobs N]
                         [--dump-lp PATH] [--format ndjson|csv] [--relax] [-o OUT]
    pidbounds check-graph SPEC
    pidbounds prop3 SPEC [--unmerged]

``solve`` prints one record per sweep point. NDJSON records carry
index, target, subset, assumptions, parameter, value, lower, upper,
status, runtime, iterations, atoms, reduced_variables, max_residual, sharp
and, when requested, oracle_agrees. CSV has the columns
subset, parameter, value, lower, upper, status.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import sys

import numpy as np

from .analytic import prop3_bounds, prop3_corollary_bounds
from .constraints import AssumptionError, DataError
from .model import NetworkError, apply_prop2_reductions, check_fine_conditions, relax_to_linear
from .pipeline import run
from .response import ProblemTooLarge
from .specfile import SpecError, parse_spec
from .targets import TargetError

CSV_FIELDS = ("subset", "parameter", "value", "lower", "upper", "status")
USER_ERRORS = (SpecError, DataError, AssumptionError, NetworkError, TargetError, ProblemTooLarge, KeyError)


def _build_parser():
    p = argparse.ArgumentParser(prog="pidbounds", description="Bounds on partially identified parameters.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("solve", help="solve the bounds LP for every sweep point")
    s.add_argument("spec")
    s.add_argument("--verify", choices=["oracle"])
    s.add_argument("--witnesses", metavar="OUT", help="write witness distributions to this JSON file")
    s.add_argument("--jobs", type=int, default=1)
    s.add_argument("--dump-lp", metavar="PATH", help="write the LP in plain text (suffixed per sweep point)")
    s.add_argument("--format", choices=["ndjson", "csv"], default="ndjson")
    s.add_argument("--relax", action="store_true", help="relax graphs outside the linear class (outer bounds)")
    s.add_argument("-o", "--output", help="write records here instead of stdout")

    g = sub.add_parser("check-graph", help="classify the graph and report any relaxation")
    g.add_argument("spec")

    a = sub.add_parser("prop3", help="closed-form bounds for a binary chain A -> X -> Y")
    a.add_argument("spec")
    a.add_argument("--unmerged", action="store_true", help="keep the two label branches separate")
    return p


def _jsonable(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not np.isfinite(obj):
        return None
    return obj


def format_records(records, fmt: str) -> str:
    if fmt == "csv":
        buf = io.StringIO()
        w = csv.DictWriter(buf, CSV_FIELDS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for r in records:
            w.writerow({k: "" if r.get(k) is None else r.get(k) for k in CSV_FIELDS})
        return buf.getvalue()
    return "".join(json.dumps(_jsonable(r), sort_keys=False) + "\n" for r in records)


def cmd_solve(args) -> int:
    model = parse_spec(args.spec)
    if args.relax:
        model.relax = True
    records = run(model, verify=args.verify, jobs=max(1, args.jobs),
                  witnesses=bool(args.witnesses), dump_lp=args.dump_lp)
    if args.witnesses:
        side = [{"index": r["index"], **r.pop("_witnesses")} for r in records]
        with open(args.witnesses, "w") as fh:
            json.dump(_jsonable(side), fh, indent=1)
    text = format_records(records, args.format)
    if args.output:
        with open(args.output, "w") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    ok = all(r["status"] in ("optimal", "infeasible") for r in records)
    disagree = any(r.get("oracle_agrees") is False for r in records)
    return 0 if ok and not disagree else 1


def cmd_check_graph(args) -> int:
    model = parse_spec(args.spec)
    net = model.network
    res = check_fine_conditions(net)
    out = {"fine": res.is_fine}
    if res.is_fine:
        out["witness"] = _witness(res)
    else:
        out["failures"] = [f.__dict__ for f in res.failures]
        log = []
        reduced = apply_prop2_reductions(net, model.target.protected, log=log)
        res2 = check_fine_conditions(reduced)
        out["reduced_fine"] = res2.is_fine
        relaxed, report = relax_to_linear(net, model.target.protected)
        out["relaxation"] = report.as_dict()
        out["relaxed_edges"] = [list(e) for e in relaxed.edges]
        out["witness"] = _witness(check_fine_conditions(relaxed))
    sys.stdout.write(json.dumps(_jsonable(out), indent=1) + "\n")
    return 0


def _witness(w):
    return {"lambda": w.lambda_, "children": list(w.children), "instruments": list(w.instruments),
            "notes": list(w.notes)}


def cmd_prop3(args) -> int:
    model = parse_spec(args.spec)
    data = model.data
    if data is None or len(data.instruments) != 1 or len(data.observed) != 1:
        raise SpecError(f"{args.spec}: prop3 needs one instrument and one observed binary proxy")
    y = data.observed[0]
    if model.network.cardinality(y) != 2:
        raise SpecError(f"{args.spec}: prop3 needs a binary proxy")
    arms = data.active_arms()
    p_a = np.array([data.arm_probability(a) for a in arms])
    p1a = np.array([data.arm_conditionals[a][1] for a in arms])
    p1 = float(p_a @ p1a)
    merge = not args.unmerged
    out = {"p_y1": p1, "p_y1_given_a": p1a.tolist()}
    main = prop3_bounds(p1, p1a, merge)
    out["prop3"] = {"intervals": main.as_list(), "notes": list(main.notes)}
    for variant in ("A1", "A3", "label_independent"):
        res = prop3_corollary_bounds(variant, p1, p1a, merge)
        out[variant] = {"intervals": res.as_list(), "notes": list(res.notes)}
    sys.stdout.write(json.dumps(_jsonable(out), indent=1) + "\n")
    return 0


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    handler = {"solve": cmd_solve, "check-graph": cmd_check_graph, "prop3": cmd_prop3}[args.command]
    try:
        return handler(args)
    except USER_ERRORS as exc:
        msg = exc.args[0] if isinstance(exc, KeyError) and exc.args else exc
        print(f"pidbounds: error: {msg}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
