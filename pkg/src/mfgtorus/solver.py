"""Damped Newton at fixed lambda, and the lambda-continuation driver 0 -> 1.

Newton damping enforces two guards before accepting a step fraction t:
(a) positivity: min(m + t dm) >= positivity_fraction * min(m_current), and
(b) Armijo decrease of the residual sup-norm.
Positivity is handled entirely by the line search; the equations themselves
are never floored or regularized.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sparse
from scipy.sparse.linalg import MatrixRankWarning, lsqr, spsolve

from .diagnostics import DiagnosticsSnapshot, make_snapshot
from .errors import (
    ContinuationStalled,
    LinearSolveFailure,
    MaxItersExceeded,
    NoDescent,
    SolverFailure,
)
from .linearization import LinearizedSystem, assemble_jacobian
from .problem import Field, ProblemSpec, State, exact_initial, residual

log = logging.getLogger("mfgtorus")


@dataclass(frozen=True)
class NewtonOptions:
    tol_residual: float = 1e-10
    max_iters: int = 50
    positivity_fraction: float = 0.1
    armijo_c: float = 1e-4
    min_damping: float = 1e-6

    def __post_init__(self):
        if not 0.0 < self.positivity_fraction < 1.0:
            raise ValueError("positivity_fraction must lie in (0, 1)")
        if min(self.tol_residual, self.max_iters, self.armijo_c, self.min_damping) <= 0:
            raise ValueError("all Newton options must be positive")


@dataclass(frozen=True)
class StepOptions:
    """Continuation schedule: grow after easy steps, halve after failures."""

    initial_step: float = 0.1
    growth: float = 1.5
    shrink: float = 0.5
    max_step: float = 0.25
    min_step: float = 1e-6
    grow_iters: int = 3

    def __post_init__(self):
        if min(self.initial_step, self.max_step, self.min_step) <= 0:
            raise ValueError("all continuation steps must be positive")
        if not 0.0 < self.shrink < 1.0:
            raise ValueError("shrink must lie in (0, 1)")
        if self.growth < 1.0:
            raise ValueError("growth must be >= 1")


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_history: list[float]
    damping_history: list[float]
    final_min_m: float

    def to_dict(self) -> dict:
        return {
            "converged": self.converged,
            "iterations": self.iterations,
            "residual_history": self.residual_history,
            "damping_history": self.damping_history,
            "final_min_m": self.final_min_m,
        }


@dataclass
class ContinuationStep:
    lam: float
    newton: NewtonReport
    diagnostics: DiagnosticsSnapshot

    def to_dict(self) -> dict:
        return {
            "lambda": self.lam,
            "newton": self.newton.to_dict(),
            "diagnostics": self.diagnostics.to_dict(),
        }


@dataclass
class FailureRecord:
    lam_attempted: float
    error: str
    step_after: float

    def to_dict(self) -> dict:
        return {
            "lambda_attempted": self.lam_attempted,
            "error": self.error,
            "step_after": self.step_after,
        }


@dataclass
class ContinuationTrace:
    steps: list[ContinuationStep] = field(default_factory=list)
    failures: list[FailureRecord] = field(default_factory=list)
    reached_lambda: float = 0.0
    success: bool = False

    def to_dict(self) -> dict:
        return {
            "steps": [s.to_dict() for s in self.steps],
            "failures": [f.to_dict() for f in self.failures],
            "reached_lambda": self.reached_lambda,
            "success": self.success,
        }


def _solve_linear(sys: LinearizedSystem) -> np.ndarray:
    """Direct sparse solve; on a (near-)singular factorization retry with a
    mean-value constraint appended on the v block, least squares."""
    with warnings.catch_warnings():
        warnings.simplefilter("error", MatrixRankWarning)
        try:
            delta = spsolve(sys.matrix, sys.rhs)
        except (MatrixRankWarning, RuntimeError):
            delta = None
    if delta is not None and np.all(np.isfinite(delta)):
        return delta
    return _solve_pinned(sys.matrix, sys.rhs, sys.grid.size)


def _solve_pinned(matrix: sparse.csr_matrix, rhs: np.ndarray, n: int) -> np.ndarray:
    row = sparse.csr_matrix(
        (np.full(n, 1.0 / n), (np.zeros(n, dtype=int), np.arange(n))), shape=(1, 2 * n)
    )
    aug = sparse.vstack([matrix, row]).tocsr()
    aug_rhs = np.concatenate([rhs, [0.0]])
    delta = lsqr(aug, aug_rhs, atol=1e-14, btol=1e-14, iter_lim=20 * n)[0]
    if not np.all(np.isfinite(delta)):
        raise LinearSolveFailure("linear solve produced non-finite values")
    return delta


def newton_solve(
    spec: ProblemSpec,
    lam: float,
    s0: State,
    opts: NewtonOptions | None = None,
    sources: tuple[Field, Field] | None = None,
) -> tuple[State, NewtonReport]:
    """Damped Newton on F(lam, .) from s0 (m > 0 required) down to the sup-norm tolerance."""
    opts = opts or NewtonOptions()
    grid = spec.grid
    s = s0
    r1, r2 = residual(spec, lam, s, sources)
    res_norm = max(np.max(np.abs(r1.values)), np.max(np.abs(r2.values)))
    history = [float(res_norm)]
    damping: list[float] = []

    it = 0
    while True:
        if res_norm <= opts.tol_residual:
            report = NewtonReport(True, it, history, damping, s.min_m())
            return s, report
        if it >= opts.max_iters:
            raise MaxItersExceeded(
                f"no convergence in {opts.max_iters} iterations (residual {res_norm:.3e})",
                report=NewtonReport(False, it, history, damping, s.min_m()),
            )

        sys = assemble_jacobian(spec, lam, s, sources)
        try:
            delta = _solve_linear(sys)
        except LinearSolveFailure as err:
            err.report = NewtonReport(False, it, history, damping, s.min_m())
            raise
        dv, dm = delta[: grid.size], delta[grid.size :]

        min_m = s.min_m()
        floor = opts.positivity_fraction * min_m
        t = 1.0
        accepted = None
        while t >= opts.min_damping:
            trial_m = s.m.values + t * dm
            if np.min(trial_m) >= floor:
                trial = State(Field(grid, s.u.values + t * dv), Field(grid, trial_m))
                t1, t2 = residual(spec, lam, trial, sources)
                trial_norm = max(np.max(np.abs(t1.values)), np.max(np.abs(t2.values)))
                if trial_norm <= (1.0 - opts.armijo_c * t) * res_norm:
                    accepted = (trial, trial_norm)
                    break
            t *= 0.5
        if accepted is None:
            raise NoDescent(
                f"damping underflowed below {opts.min_damping:g} at iteration {it}",
                report=NewtonReport(False, it, history, damping, s.min_m()),
            )

        s, res_norm = accepted
        history.append(float(res_norm))
        damping.append(t)
        it += 1


def continuation_solve(
    spec: ProblemSpec,
    opts: NewtonOptions | None = None,
    step_opts: StepOptions | None = None,
    r_values: tuple[float, ...] = (1.0, 2.0, 4.0),
) -> tuple[State, ContinuationTrace]:
    """Track the solution branch from the explicit lam=0 state up to lam=1.

    Warm-starts every step from the last accepted state, halves the step on any
    Newton failure, grows it after fast steps, and clamps the final step to
    land on lam=1 exactly.
    """
    if not spec.solvable:
        raise ValueError(f"the solver requires alpha < 1, got alpha = {spec.alpha}")
    opts = opts or NewtonOptions()
    step_opts = step_opts or StepOptions()
    trace = ContinuationTrace()

    s, report = newton_solve(spec, 0.0, exact_initial(spec), opts)
    trace.steps.append(
        ContinuationStep(0.0, report, make_snapshot(spec, s, 0.0, r_values, opts.tol_residual))
    )
    lam = 0.0
    dlam = step_opts.initial_step

    while lam < 1.0:
        lam_try = min(lam + dlam, 1.0)
        try:
            s_new, report = newton_solve(spec, lam_try, s, opts)
        except SolverFailure as err:
            dlam *= step_opts.shrink
            trace.failures.append(FailureRecord(lam_try, type(err).__name__, dlam))
            log.info("newton failed at lambda=%.6f (%s); step -> %.3e", lam_try, type(err).__name__, dlam)
            if dlam < step_opts.min_step:
                trace.reached_lambda = lam
                raise ContinuationStalled(
                    f"continuation step underflowed at lambda = {lam:.6f}", trace=trace
                ) from err
            continue
        lam, s = lam_try, s_new
        trace.steps.append(
            ContinuationStep(lam, report, make_snapshot(spec, s, lam, r_values, opts.tol_residual))
        )
        log.debug("accepted lambda=%.6f in %d iterations", lam, report.iterations)
        if report.iterations <= step_opts.grow_iters:
            dlam = min(dlam * step_opts.growth, step_opts.max_step)

    trace.reached_lambda = lam
    trace.success = lam == 1.0
    return s, trace


def perturbation_solve(
    spec: ProblemSpec,
    eps_sequence: list[float],
    opts: NewtonOptions | None = None,
    step_opts: StepOptions | None = None,
) -> list[tuple[float, State]]:
    """Solve the strictly-monotonized problems for a decreasing sequence of
    perturbation strengths, warm-starting each lam=1 solve from the previous one.

    The returned states realize the vanishing-perturbation limit as a Cauchy
    trend in the sup-norm.
    """
    eps_list = [float(e) for e in eps_sequence]
    if not eps_list or any(e <= 0 for e in eps_list):
        raise ValueError("eps_sequence must contain positive values")
    if any(b >= a for a, b in zip(eps_list, eps_list[1:])):
        raise ValueError("eps_sequence must be strictly decreasing")

    results: list[tuple[float, State]] = []
    prev: State | None = None
    for eps in eps_list:
        spec_eps = ProblemSpec(
            grid=spec.grid,
            alpha=spec.alpha,
            potential=spec.potential,
            drift=spec.drift,
            epsilon_monotone=eps,
        )
        if prev is None:
            s, _ = continuation_solve(spec_eps, opts, step_opts)
        else:
            try:
                s, _ = newton_solve(spec_eps, 1.0, prev, opts)
            except SolverFailure:
                s, _ = continuation_solve(spec_eps, opts, step_opts)
        results.append((eps, s))
        prev = s
    return results
