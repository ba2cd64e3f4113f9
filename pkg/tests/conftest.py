from pathlib import Path

import numpy as np
import pytest

from pidbounds import NetworkSpec, ResponseSpace, VariableSpec, prepare_network

SPECS = Path(__file__).resolve().parent.parent / "specs"


def iv_network(cx=2, cy=2, ca=2):
    return NetworkSpec(
        [VariableSpec("A", "observed", ca), VariableSpec("X", "latent-target", cx),
         VariableSpec("Y", "observed", cy), VariableSpec("L", "exogenous")],
        [("A", "X"), ("X", "Y"), ("L", "X"), ("L", "Y")],
    )


def proxy_network(k=6, ky=None):
    return NetworkSpec(
        [VariableSpec("X", "latent-target", k), VariableSpec("Y", "observed", ky or k),
         VariableSpec("L", "exogenous")],
        [("L", "X"), ("L", "Y")],
    )


def chain_network(ca=2, cx=2, cy=2):
    return NetworkSpec(
        [VariableSpec("A", "observed", ca), VariableSpec("X", "latent-target", cx),
         VariableSpec("Y", "observed", cy)],
        [("A", "X"), ("X", "Y")],
    )


def space_for(network, relax=False):
    net, witness, _ = prepare_network(network, relax=relax)
    return ResponseSpace(net, witness)


@pytest.fixture
def iv_space():
    return space_for(iv_network())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one summary line per acceptance criterion, echoed after the test run
ACCEPTANCE: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
