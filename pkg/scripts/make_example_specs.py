"""Write the example model files in specs/.

Observed tables are computed exactly from small structural models, so every
assumption listed in a file holds for the generating process and the LPs
are feasible. The generating numbers are synthetic (stated below).

    python scripts/make_example_specs.py [--out specs]
"""

from __future__ import annotations

import argparse
from pathlib import Path

import numpy as np
import yaml

BETA = 1.2  # error kernel decay: P(Y=y | X=x) proportional to exp(-BETA |x - y|)


def kernel(k: int, beta: float = BETA) -> np.ndarray:
    d = np.abs(np.subtract.outer(np.arange(k), np.arange(k)))
    K = np.exp(-beta * d)
    return K / K.sum(axis=1, keepdims=True)


def check_kernel(K):
    """Rows stochastically increasing (so a monotone coupling of Y(x) exists)."""
    cdf = np.cumsum(K, axis=1)
    assert np.all(np.diff(cdf, axis=0) <= 1e-12), "kernel rows are not stochastically ordered"


def tail_mass(K, px, threshold=1):
    d = np.abs(np.subtract.outer(np.arange(len(px)), np.arange(K.shape[1])))
    return float(np.sum(px[:, None] * K * (d > threshold)))


def r(x, nd=12):
    return [round(float(v), nd) for v in np.ravel(x)]


def fix(p):
    """Round to 12 places and put the rounding residue on the largest cell."""
    p = np.round(np.asarray(p, dtype=float).ravel(), 12)
    p[np.argmax(p)] += 1.0 - p.sum()
    return r(p)


def var(name, card=None, role="observed"):
    out = {"name": name, "role": role}
    if card is not None:
        out["cardinality"] = card
    return out


MEASUREMENT = [
    {"name": "A0", "kind": "A0", "params": {"threshold": 1, "epsilon": None}},
    {"name": "A2", "kind": "A2", "params": {"lambda": 0.01}},
    {"name": "A3", "kind": "A3"},
]


def measurement(eps, level="observed"):
    out = []
    for a in MEASUREMENT:
        a = {**a, "params": dict(a.get("params", {})), "level": level, "truth": "X", "proxy": "Y"}
        if a["kind"] == "A0":
            a["params"]["epsilon"] = eps
        if not a["params"]:
            del a["params"]
        out.append(a)
    return out


def single_proxy():
    K = kernel(6)
    px = np.array([0.1, 0.2, 0.3, 0.2, 0.15, 0.05])
    eps = float(np.ceil(tail_mass(K, px) * 20) / 20)
    base = {
        "variables": [var("X", 6, "latent-target"), var("Y", 6), var("Lambda", role="exogenous")],
        "edges": [["Lambda", "X"], ["Lambda", "Y"]],
        "observed": {"conditionals": fix(px @ K)},
        "assumptions": measurement(eps),
        "target": {"kind": "moment", "variable": "X"},
    }
    subsets = {**base, "sweep": {"subsets": [[], ["A0"], ["A0", "A2"], ["A0", "A2", "A3"]]}}
    grid = [round(eps + 0.05 * i, 4) for i in range(8)]
    epsilon = {**base, "sweep": {"subsets": [["A0"]], "parameter": "A0.epsilon", "values": grid}}
    return subsets, epsilon


def iv_two_proxies():
    K = kernel(6)
    px0 = np.array([0.3, 0.3, 0.2, 0.1, 0.05, 0.05])
    px1 = px0[::-1]
    eps = float(np.ceil(max(tail_mass(K, px0), tail_mass(K, px1)) * 20) / 20)
    return {
        "variables": [var("A", 2), var("X", 6, "latent-target"), var("Y", 6), var("Lambda", role="exogenous")],
        "edges": [["A", "X"], ["X", "Y"], ["Lambda", "X"], ["Lambda", "Y"]],
        "observed": {
            "instrument_marginal": [0.5, 0.5],
            "conditionals": {"0": fix(px0 @ K), "1": fix(px1 @ K)},
        },
        "assumptions": measurement(eps),
        "target": {"kind": "moment", "variable": "X"},
        "sweep": {"subsets": [[], ["A0"], ["A0", "A2"], ["A0", "A2", "A3"]]},
    }


def randomized_trial():
    K = kernel(6)
    check_kernel(K)
    x0 = np.array([0.25, 0.3, 0.2, 0.15, 0.07, 0.03])
    shift = np.array([0.3, 0.5, 0.2])  # X(1) = min(X(0) + s, 5), s ~ shift
    x1 = np.zeros(6)
    for s, ps in enumerate(shift):
        for x, p in enumerate(x0):
            x1[min(x + s, 5)] += p * ps
    eps = float(np.ceil(max(tail_mass(K, x0), tail_mass(K, x1)) * 20) / 20)
    causal = [
        {"name": "A4", "kind": "A4", "treatment": "A", "outcome": "X"},
        {"name": "A5", "kind": "A5", "treatment": "X", "outcome": "Y"},
    ]
    return {
        "variables": [var("A", 2), var("X", 6, "latent-target"), var("Y", 6), var("U", role="exogenous")],
        "edges": [["A", "X"], ["X", "Y"], ["U", "X"], ["U", "Y"]],
        "observed": {
            "instrument_marginal": [0.5, 0.5],
            "conditionals": {"0": fix(x0 @ K), "1": fix(x1 @ K)},
        },
        "assumptions": causal + measurement(eps, "per-arm-counterfactual"),
        "target": {"kind": "ate", "variable": "X", "intervention": "A", "t": 1, "t_prime": 0},
        "sweep": {"subsets": [[], ["A4"], ["A4", "A5"], ["A4", "A5", "A0", "A2", "A3"]]},
    }


def partial_compliance(k=4):
    """Z -> A -> X -> Y with U confounding A, X, Y.

    Compliance types (P(A=1|Z=1) = P(A=0|Z=0) = 0.8): compliers 0.6,
    always-takers 0.2, never-takers 0.2. X(0) depends on the type; the
    treatment adds 0 or 1 level (capped), so X(1) >= X(0).
    """
    K = kernel(k)
    check_kernel(K)
    types = {"complier": (0.6, (0, 1)), "always": (0.2, (1, 1)), "never": (0.2, (0, 0))}
    base = {
        "complier": np.array([0.35, 0.35, 0.2, 0.1]),
        "always": np.array([0.2, 0.3, 0.3, 0.2]),
        "never": np.array([0.5, 0.3, 0.15, 0.05]),
    }
    shift = np.array([0.3, 0.7])
    table = {z: np.zeros((2, k)) for z in (0, 1)}
    tails = []
    for t, (pt, a_of_z) in types.items():
        xa = {0: base[t], 1: np.zeros(k)}
        for s, ps in enumerate(shift):
            for x, p in enumerate(base[t]):
                xa[1][min(x + s, k - 1)] += p * ps
        tails += [tail_mass(K, xa[0]), tail_mass(K, xa[1])]
        for z in (0, 1):
            a = a_of_z[z]
            table[z][a] += pt * (xa[a] @ K)
    eps = float(np.ceil(max(tails) * 20) / 20)
    causal = [
        {"name": "A4", "kind": "A4", "treatment": "A", "outcome": "X"},
        {"name": "A5", "kind": "A5", "treatment": "X", "outcome": "Y"},
    ]
    return {
        "variables": [var("Z", 2), var("A", 2), var("X", k, "latent-target"), var("Y", k),
                      var("U", role="exogenous")],
        "edges": [["Z", "A"], ["A", "X"], ["X", "Y"], ["U", "A"], ["U", "X"], ["U", "Y"]],
        "observed": {
            "instrument_marginal": [0.5, 0.5],
            "conditionals": {str(z): fix(table[z]) for z in (0, 1)},
        },
        "assumptions": causal + measurement(eps, "per-arm-counterfactual"),
        "target": {"kind": "ate", "variable": "X", "intervention": "A", "t": 1, "t_prime": 0},
        "sweep": {"subsets": [[], ["A4", "A5"], ["A4", "A5", "A0", "A2", "A3"]]},
    }


def small_iv_family():
    """Same observed data on the IV graph and two confounded-instrument variants."""
    K = kernel(3)
    px = {0: np.array([0.6, 0.3, 0.1]), 1: np.array([0.15, 0.35, 0.5])}
    observed = {
        "instruments": ["A"],
        "variables": ["Y"],
        "instrument_marginal": [0.4, 0.6],
        "conditionals": {str(a): fix(px[a] @ K) for a in (0, 1)},
    }
    common = {
        "observed": observed,
        "assumptions": [{"name": "A3", "kind": "A3", "truth": "X", "proxy": "Y"}],
        "target": {"kind": "moment", "variable": "X"},
        "sweep": {"subsets": [[], ["A3"]]},
    }
    vs = [var("A", 2), var("X", 3, "latent-target"), var("Y", 3)]
    iv = {"variables": vs + [var("Lambda", role="exogenous")],
          "edges": [["A", "X"], ["X", "Y"], ["Lambda", "X"], ["Lambda", "Y"]], **common}
    c = {"variables": vs + [var("U", role="exogenous"), var("Lambda", role="exogenous")],
         "edges": [["U", "A"], ["U", "X"], ["A", "X"], ["X", "Y"], ["Lambda", "X"], ["Lambda", "Y"]],
         **common}
    d = {"variables": c["variables"],
         "edges": [["U", "A"], ["U", "X"], ["X", "Y"], ["Lambda", "X"], ["Lambda", "Y"]], **common}
    return iv, c, d


def chain():
    return {
        "variables": [var("A", 2), var("X", 2, "latent-target"), var("Y", 2)],
        "edges": [["A", "X"], ["X", "Y"]],
        "observed": {
            "instruments": ["A"],
            "variables": ["Y"],
            "instrument_marginal": [0.5, 0.5],
            "conditionals": {"0": [0.7, 0.3], "1": [0.3, 0.7]},
        },
        "target": {"kind": "pmf", "variable": "X", "value": 1},
        "options": {"relax": True},
    }


HEADERS = {
    "single_proxy": "6-level truth X with one proxy Y; E[X] under nested measurement assumptions.",
    "single_proxy_epsilon": "6-level single proxy; E[X] as the A0 error budget grows.",
    "iv_two_proxies": "Binary instrument A, 6-level X and Y, P(A=0)=1/2; E[X].",
    "randomized_trial": "Randomized binary treatment A, 6-level outcome X seen through proxy Y; ATE.",
    "partial_compliance": "Assignment Z, received treatment A (80% compliance), 4-level X and Y; ATE.",
    "iv_small": "IV graph, ternary X and Y; reference for the two confounded-instrument variants.",
    "iv_confounded_instrument": "Instrument A confounded with X by U, plus the edge A -> X.",
    "iv_proxy_instrument": "Instrument A confounded with X by U, no edge A -> X (A proxies the true instrument).",
    "chain": "Binary chain A -> X -> Y without confounding; outer LP bounds need options.relax.",
}


def main(argv=None):
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default=str(Path(__file__).resolve().parent.parent / "specs"))
    args = ap.parse_args(argv)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sp, eps = single_proxy()
    iv, c, d = small_iv_family()
    files = {
        "single_proxy": sp,
        "single_proxy_epsilon": eps,
        "iv_two_proxies": iv_two_proxies(),
        "randomized_trial": randomized_trial(),
        "partial_compliance": partial_compliance(),
        "iv_small": iv,
        "iv_confounded_instrument": c,
        "iv_proxy_instrument": d,
        "chain": chain(),
    }
    for name, doc in files.items():
        text = f"# {HEADERS[name]}\n# Generated by scripts/make_example_specs.py (synthetic data).\n"
        text += yaml.safe_dump(doc, sort_keys=False, default_flow_style=None, width=100)
        (out / f"{name}.yaml").write_text(text)
        print(out / f"{name}.yaml")


if __name__ == "__main__":
    main()
