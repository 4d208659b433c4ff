import time
from dataclasses import dataclass

import pytest

from mfgtorus import (
    DriftSpec,
    GridSpec,
    PotentialSpec,
    ProblemSpec,
    TrigForm,
    continuation_solve,
)

SUITE_ALPHAS = (0.0, 0.25, 0.5, 0.75, 0.9)
SUITE_KAPPAS = (0.5, 1.0)


def suite_problem(alpha: float, kappa: float = 1.0, n: int = 128) -> ProblemSpec:
    """The 1-D reference problem family: a(x) = 0.5 cos(2 pi x), b(x) = 0.3 sin(2 pi x)."""
    pot = PotentialSpec("separable", TrigForm(0.0, (0.5,), (0.0,)), kappa)
    drift = DriftSpec((TrigForm(0.0, (0.0,), (0.3,)),))
    return ProblemSpec(GridSpec(1, n), alpha, pot, drift)


def problem_2d(alpha: float = 0.5, kappa: float = 1.0, n: int = 32) -> ProblemSpec:
    pot = PotentialSpec("separable", TrigForm(0.0, (0.3, 0.0), (0.0, 0.2)), kappa)
    drift = DriftSpec(
        (
            TrigForm(0.0, (0.0, 0.0), (0.2, 0.0)),
            TrigForm(0.0, (0.0, 0.0), (0.0, 0.2)),
        )
    )
    return ProblemSpec(GridSpec(2, n), alpha, pot, drift)


@pytest.fixture(scope="session")
def reference_solution():
    """Converged alpha=0.5, kappa=1 problem at n=128."""
    spec = suite_problem(0.5)
    s, trace = continuation_solve(spec)
    return spec, s, trace


@pytest.fixture(scope="session")
def refined_solutions():
    """Converged alpha=0.5, kappa=1 solutions at n in {64, 128, 256}."""
    out = {}
    for n in (64, 128, 256):
        spec = suite_problem(0.5, n=n)
        s, _ = continuation_solve(spec)
        out[n] = (spec, s)
    return out


@dataclass(frozen=True)
class SuiteRun:
    solutions: dict
    elapsed: float

    def items(self):
        return self.solutions.items()


@pytest.fixture(scope="session")
def suite_solutions():
    """All ten (alpha, kappa) suite problems solved to lambda = 1, with wall time."""
    out = {}
    start = time.perf_counter()
    for a in SUITE_ALPHAS:
        for k in SUITE_KAPPAS:
            spec = suite_problem(a, k)
            s, trace = continuation_solve(spec)
            out[(a, k)] = (spec, s, trace)
    return SuiteRun(out, time.perf_counter() - start)
