"""Manufactured-solutions harness: known exact pairs with appended sources,
plus the grid-refinement rate measurement.

For trig closed forms every continuum operator has a closed-form value: the
congestion flux divergence expands by the chain rule to
(1-a) m^-a Dm.Du + m^(1-a) lap(u) per axis, all pointwise-evaluable.  The
sources therefore carry no discretization error of their own, and the rate
study measures the scheme alone.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import NotPositive
from .grid import Field, GridSpec, mesh
from .problem import ProblemSpec, State, TrigForm, exact_initial
from .solver import NewtonOptions, newton_solve


@dataclass(frozen=True)
class ManufacturedCase:
    """An exact trig pair (u*, m*) for the lam=1 system of a given ProblemSpec.

    m* must be uniformly positive: its constant term has to exceed the sum of
    its harmonic amplitudes.  m* is not mass-normalized; the sources absorb
    the defect, so the unit-mass diagnostics do not apply to augmented runs.
    """

    spec: ProblemSpec
    u_exact: TrigForm
    m_exact: TrigForm

    def __post_init__(self):
        d = self.spec.grid.dim
        if self.u_exact.dim != d or self.m_exact.dim != d:
            raise ValueError("manufactured forms must match the grid dimension")
        if self.m_exact.const - self.m_exact.harmonic_sum() <= 0.0:
            raise NotPositive(
                "manufactured m must have constant term exceeding its harmonic amplitudes"
            )

    def sample(self, grid: GridSpec) -> State:
        xs = mesh(grid)
        u = np.broadcast_to(self.u_exact.value(xs), grid.shape).ravel().copy()
        m = np.broadcast_to(self.m_exact.value(xs), grid.shape).ravel().copy()
        return State(Field(grid, u), Field(grid, m))


def mms_source(case: ManufacturedCase, grid: GridSpec) -> tuple[Field, Field]:
    """Evaluate the continuum lam=1 operators on the closed forms, restricted to the grid.

    The returned pair (S1, S2) makes (u*, m*) an exact continuum solution of the
    augmented system F(1, u, m) = (S1, S2).
    """
    spec = case.spec
    a = spec.alpha
    xs = mesh(grid)
    dim = grid.dim

    u = case.u_exact.value(xs)
    m = case.m_exact.value(xs)
    du = [case.u_exact.deriv(xs, ax) for ax in range(dim)]
    ddu = [case.u_exact.second_deriv(xs, ax) for ax in range(dim)]
    dm = [case.m_exact.deriv(xs, ax) for ax in range(dim)]
    ddm = [case.m_exact.second_deriv(xs, ax) for ax in range(dim)]
    lap_u = sum(ddu)
    lap_m = sum(ddm)
    du_sq = sum(d * d for d in du)

    bvals = [c.value(xs) for c in spec.drift.components]
    db = [spec.drift.components[ax].deriv(xs, ax) for ax in range(dim)]

    v_eff = spec.potential.value(xs, m) + spec.epsilon_monotone * np.arctan(m)
    s1 = u - lap_u + du_sq / (2.0 * m**a) + sum(b * d for b, d in zip(bvals, du)) - v_eff

    # div(m^(1-a) Du) by the chain rule, then div(b m) likewise
    flux_div = sum(
        (1.0 - a) * m**-a * dmi * dui + m ** (1.0 - a) * ddui
        for dmi, dui, ddui in zip(dm, du, ddu)
    )
    drift_div = sum(dbi * m + bi * dmi for dbi, bi, dmi in zip(db, bvals, dm))
    s2 = m - lap_m - flux_div - drift_div - 1.0

    full = np.broadcast_to
    return (
        Field(grid, full(s1, grid.shape).ravel().copy()),
        Field(grid, full(s2, grid.shape).ravel().copy()),
    )


@dataclass(frozen=True)
class RateRow:
    n: int
    error_u: float
    error_m: float
    rate_u: float  # NaN on the coarsest grid or at roundoff
    rate_m: float
    exact: bool  # errors at roundoff, rates meaningless


@dataclass(frozen=True)
class RateTable:
    rows: tuple[RateRow, ...]
    observed_order_u: float
    observed_order_m: float

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["grid", "error_u", "error_m", "rate_u", "rate_m"])
            for row in self.rows:
                fmt = lambda x: "exact" if row.exact else ("" if math.isnan(x) else f"{x:.17g}")
                writer.writerow(
                    [row.n, f"{row.error_u:.17g}", f"{row.error_m:.17g}", fmt(row.rate_u), fmt(row.rate_m)]
                )


ROUNDOFF_ERROR = 1e-12


def convergence_study(
    case: ManufacturedCase,
    grids: list[int],
    opts: NewtonOptions | None = None,
) -> RateTable:
    """Solve the augmented lam=1 system on each grid and fit the observed order.

    Requires at least three grids, each doubling the previous.  The order is the
    mean of the successive log2 error ratios.
    """
    if len(grids) < 3:
        raise ValueError("need at least 3 grids")
    if any(b != 2 * a for a, b in zip(grids, grids[1:])):
        raise ValueError("each grid must double the previous one")
    opts = opts or NewtonOptions()
    dim = case.spec.grid.dim

    errors = []
    for n in grids:
        grid = GridSpec(dim, n)
        spec_n = ProblemSpec(
            grid=grid,
            alpha=case.spec.alpha,
            potential=case.spec.potential,
            drift=case.spec.drift,
            epsilon_monotone=case.spec.epsilon_monotone,
        )
        sources = mms_source(case, grid)
        s, _ = newton_solve(spec_n, 1.0, exact_initial(spec_n), opts, sources=sources)
        exact = case.sample(grid)
        err_u = float(np.max(np.abs(s.u.values - exact.u.values)))
        err_m = float(np.max(np.abs(s.m.values - exact.m.values)))
        errors.append((n, err_u, err_m))

    rows = []
    rates_u, rates_m = [], []
    for i, (n, eu, em) in enumerate(errors):
        exact_flag = eu < ROUNDOFF_ERROR and em < ROUNDOFF_ERROR
        if i == 0 or exact_flag:
            ru = rm = float("nan")
        else:
            _, eu_prev, em_prev = errors[i - 1]
            ru = math.log2(eu_prev / eu) if eu > 0 else float("nan")
            rm = math.log2(em_prev / em) if em > 0 else float("nan")
            rates_u.append(ru)
            rates_m.append(rm)
        rows.append(RateRow(n, eu, em, ru, rm, exact_flag))

    order_u = float(np.mean(rates_u)) if rates_u else float("nan")
    order_m = float(np.mean(rates_m)) if rates_m else float("nan")
    return RateTable(tuple(rows), order_u, order_m)
