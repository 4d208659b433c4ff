"""Numerical verification of the a-priori estimates and integral identities.

Each check turns one piece of the existence/uniqueness analysis into a
computable certificate on a discrete state: sup bounds on u, unit mass and
positivity of m, inverse moments of m against explicit Young-inequality
majorants, two exact-in-the-continuum integral identities (verified at O(h^2)
under refinement), and the convexity-in-theta machinery behind uniqueness.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import BadExponent, NonPositiveDensity, NotASolution
from .grid import (
    divergence_arrays,
    gradient_arrays,
    integral,
    laplacian_array,
    mesh,
)
from .problem import ProblemSpec, State, _drift_arrays, residual

SUP_TOL = 1e-8  # roundoff slack on certified sup bounds


def _integral(grid, arr: np.ndarray) -> float:
    return grid.h**grid.dim * float(np.sum(arr))


def certified_u_bound(spec: ProblemSpec, lam: float = 1.0) -> float:
    """Sup bound on u from evaluating the u-equation at extrema of u.

    At lam=1 the potential term is V_eff; along the homotopy the convex
    combination with arctan(m) is bounded by max(||V||_inf, pi/2).  The
    monotonization adds at most eps * pi/2.
    """
    v_bound = spec.potential.sup_bound()
    eps_part = spec.epsilon_monotone * math.pi / 2
    if lam == 1.0:
        return v_bound + eps_part
    return max(v_bound, math.pi / 2) + eps_part


def sup_bound_check(spec: ProblemSpec, s: State, lam: float = 1.0) -> tuple[float, float, bool]:
    """(sup |u|, certified bound, pass)."""
    sup_u = float(np.max(np.abs(s.u.values)))
    bound = certified_u_bound(spec, lam)
    return sup_u, bound, sup_u <= bound + SUP_TOL


def mass_positivity_check(s: State) -> tuple[float, float]:
    """(|integral(m) - 1|, min m).  Mass defect equals the integrated m-equation residual."""
    return abs(integral(s.m) - 1.0), s.min_m()


def _generic_constant(spec: ProblemSpec, r: float) -> float:
    """Explicit majorant for the generic constant absorbed in the moment estimate.

    Deliberately loose: ||V||_inf + certified ||u||_inf + ||b||_inf^2
    + 1/(r+1-alpha) + 1 dominates every coefficient the estimate hides.
    """
    return (
        spec.potential.sup_bound()
        + certified_u_bound(spec, lam=0.5)
        + spec.drift.sup_bound() ** 2
        + 1.0 / (r + 1.0 - spec.alpha)
        + 1.0
    )


def moment_majorant(spec: ProblemSpec, r: float) -> float:
    """Closed-form bound on integral(m^-(r+1-alpha)) via two Young splittings:

        C1 = (1-a) 4^(r/(1-a)) C^((r+1-a)/(1-a)) / (r (r+1-a))
        C2 = 4^(r-a) C^(r+1-a) (r-a)^(r-a-1) / (r+1-a)^(r+1-a)
        bound = 2 (r+1-a) (C1 + C2)
    """
    a = spec.alpha
    if a >= 1.0:
        raise BadExponent("the moment majorant requires alpha < 1")
    if r <= a:
        raise BadExponent(f"need r > alpha, got r = {r}, alpha = {a}")
    c = _generic_constant(spec, r)
    p = r + 1.0 - a
    c1 = (1.0 - a) * 4.0 ** (r / (1.0 - a)) * c ** (p / (1.0 - a)) / (r * p)
    c2 = 4.0 ** (r - a) * c**p * (r - a) ** (r - a - 1.0) / p**p
    return 2.0 * p * (c1 + c2)


def inverse_moment(spec: ProblemSpec, s: State, r: float) -> tuple[float, float]:
    """(integral(m^-(r+1-alpha)), certified majorant); finite value quantifies m staying away from 0."""
    if r <= spec.alpha:
        raise BadExponent(f"need r > alpha, got r = {r}, alpha = {spec.alpha}")
    m = s.m.values
    if np.min(m) <= 0.0:
        raise NonPositiveDensity("inverse moment needs m > 0")
    value = _integral(spec.grid, m ** -(r + 1.0 - spec.alpha))
    return value, moment_majorant(spec, r)


def cancellation_check(spec: ProblemSpec, s: State, r: float) -> float:
    """integral(lap(u) / (r m^r)) - integral(div(m^(1-a) Du) / ((r+1-a) m^(r+1-a))).

    Zero in the continuum for any smooth pair with m > 0 (both sides integrate
    by parts to integral(Du.Dm / m^(r+1))); discretely O(h^2).
    """
    if r <= spec.alpha:
        raise BadExponent(f"need r > alpha, got r = {r}, alpha = {spec.alpha}")
    grid = spec.grid
    m = s.m.reshaped()
    if np.min(m) <= 0.0:
        raise NonPositiveDensity("cancellation check needs m > 0")
    a = spec.alpha
    lap_u = laplacian_array(s.u.reshaped(), grid)
    du = gradient_arrays(s.u)
    flux_div = divergence_arrays([m ** (1.0 - a) * d for d in du], grid)
    term1 = _integral(grid, lap_u / (r * m**r))
    term2 = _integral(grid, flux_div / ((r + 1.0 - a) * m ** (r + 1.0 - a)))
    return term1 - term2


def moment_identity_check(
    spec: ProblemSpec, s: State, r: float, tol: float = 1e-10
) -> tuple[float, float, float]:
    """Both sides of the rearranged master identity on a lam=1 solution; returns (lhs, rhs, defect).

        lhs = int m^-(r+1-a)/(r+1-a) + int |Du|^2/(2 r m^(r+a)) + int |Dm|^2/m^(r+2-a)
        rhs = int (V_eff - u)/(r m^r) - int b.Du/(r m^r)
              + int m^-(r-a)/(r+1-a) - int div(b) m^-(r-a)/(r-a)

    Only holds on solutions: raises NotASolution above 100x the Newton tolerance.
    The defect is O(h^2): the discrete chain rule behind the |Dm|^2 term is not
    exact, so the identity is verified by refinement, not equality.
    """
    if r <= spec.alpha:
        raise BadExponent(f"need r > alpha, got r = {r}, alpha = {spec.alpha}")
    grid = spec.grid
    m = s.m.reshaped()
    if np.min(m) <= 0.0:
        raise NonPositiveDensity("identity check needs m > 0")
    r1, r2 = residual(spec, 1.0, s)
    res = max(np.max(np.abs(r1.values)), np.max(np.abs(r2.values)))
    if res > 100.0 * tol:
        raise NotASolution(f"residual sup-norm {res:.3e} exceeds {100 * tol:.1e}")

    a = spec.alpha
    u = s.u.reshaped()
    du = gradient_arrays(s.u)
    dm = gradient_arrays(s.m)
    du_sq = sum(d * d for d in du)
    dm_sq = sum(d * d for d in dm)
    bvals = _drift_arrays(spec.drift, grid)
    b_dot_du = sum(b * d for b, d in zip(bvals, du))
    div_b = divergence_arrays(list(bvals), grid)
    xs = mesh(grid)
    v_eff = spec.potential.value(xs, m) + spec.epsilon_monotone * np.arctan(m)

    p = r + 1.0 - a
    lhs = (
        _integral(grid, m**-p) / p
        + _integral(grid, du_sq * m ** -(r + a)) / (2.0 * r)
        + _integral(grid, dm_sq * m ** -(r + 2.0 - a))
    )
    rhs = (
        _integral(grid, (v_eff - u) * m**-r) / r
        - _integral(grid, b_dot_du * m**-r) / r
        + _integral(grid, m ** -(r - a)) / p
        - _integral(grid, div_b * m ** -(r - a)) / (r - a)
    )
    return lhs, rhs, abs(lhs - rhs)


@dataclass(frozen=True)
class MonotonicityGapReport:
    """Pairing of two states against the system's monotone structure.

    lhs is the sign-definite quantity (congestion + flux terms), rhs the
    potential-difference pairing; on two solutions of the same problem they
    coincide and force uniqueness when V is strictly increasing.  The curve
    holds the theta-derivative samples of the interpolation functional with
    their guaranteed lower bounds, and `i1_trapezoid` integrates the curve
    back as a cross-check on lhs.
    """

    lhs: float
    rhs: float
    thetas: tuple[float, ...]
    di_dtheta: tuple[float, ...]
    lower_bounds: tuple[float, ...]
    i1_trapezoid: float


def monotonicity_gap(
    spec: ProblemSpec, s0: State, s1: State, n_theta: int = 11
) -> MonotonicityGapReport:
    """Evaluate the uniqueness pairing for two states and the derivative curve
    along the segment (u_t, m_t) = (1-t) s0 + t s1.

    Each derivative sample is certified against (1 - a/2) int m_t^(1-a) |D(u1-u0)|^2,
    which is nonnegative for alpha in [0, 2].
    """
    grid = spec.grid
    a = spec.alpha
    m0 = s0.m.reshaped()
    m1 = s1.m.reshaped()
    if min(np.min(m0), np.min(m1)) <= 0.0:
        raise NonPositiveDensity("both states need m > 0")
    u0 = s0.u.reshaped()
    u1 = s1.u.reshaped()
    du0 = gradient_arrays(s0.u)
    du1 = gradient_arrays(s1.u)
    ddiff = [g1 - g0 for g0, g1 in zip(du0, du1)]  # D(u1 - u0)
    ddiff_sq = sum(d * d for d in ddiff)
    du0_sq = sum(d * d for d in du0)
    du1_sq = sum(d * d for d in du1)

    xs = mesh(grid)

    def v_eff(m):
        return spec.potential.value(xs, m) + spec.epsilon_monotone * np.arctan(m)

    lhs = _integral(
        grid, (du1_sq / (2.0 * m1**a) - du0_sq / (2.0 * m0**a)) * (m0 - m1)
    ) + _integral(
        grid,
        sum((m0 ** (1.0 - a) * g0 - m1 ** (1.0 - a) * g1) * d for g0, g1, d in zip(du0, du1, ddiff)) * -1.0,
    )
    rhs = _integral(grid, (v_eff(m1) - v_eff(m0)) * (m0 - m1))

    thetas = np.linspace(0.0, 1.0, n_theta)
    dmi = m1 - m0
    curve = []
    bounds = []
    for t in thetas:
        m_t = m0 + t * dmi
        if np.min(m_t) <= 0.0:
            raise NonPositiveDensity(f"m_theta touches zero at theta = {t:g}")
        du_t = [(1.0 - t) * g0 + t * g1 for g0, g1 in zip(du0, du1)]
        du_t_dot = sum(g * d for g, d in zip(du_t, ddiff))
        du_t_sq = sum(g * g for g in du_t)
        cross = -a * _integral(grid, du_t_dot * dmi * m_t**-a)
        square = 0.5 * a * _integral(grid, du_t_sq * dmi * dmi * m_t ** -(1.0 + a))
        main = _integral(grid, m_t ** (1.0 - a) * ddiff_sq)
        curve.append(cross + square + main)
        bounds.append((1.0 - 0.5 * a) * main)
    i1 = float(np.trapezoid(curve, thetas))

    return MonotonicityGapReport(
        lhs=lhs,
        rhs=rhs,
        thetas=tuple(float(t) for t in thetas),
        di_dtheta=tuple(curve),
        lower_bounds=tuple(bounds),
        i1_trapezoid=i1,
    )


@dataclass(frozen=True)
class DiagnosticsSnapshot:
    """Per-state certificate bundle recorded along the continuation."""

    sup_u: float
    sup_bound_V: float
    min_m: float
    mass_defect: float
    inverse_moments: tuple[tuple[float, float, float], ...]  # (r, value, majorant)
    cancellation_residuals: tuple[tuple[float, float], ...]  # (r, value)
    moment_identity_defects: tuple[tuple[float, float], ...]  # (r, defect); lam=1 solutions only

    def to_dict(self) -> dict:
        return {
            "sup_u": self.sup_u,
            "sup_bound_V": self.sup_bound_V,
            "min_m": self.min_m,
            "mass_defect": self.mass_defect,
            "inverse_moments": [list(t) for t in self.inverse_moments],
            "cancellation_residuals": [list(t) for t in self.cancellation_residuals],
            "moment_identity_defects": [list(t) for t in self.moment_identity_defects],
        }


def make_snapshot(
    spec: ProblemSpec,
    s: State,
    lam: float = 1.0,
    r_values: tuple[float, ...] = (1.0, 2.0, 4.0),
    newton_tol: float = 1e-10,
) -> DiagnosticsSnapshot:
    sup_u, bound, _ = sup_bound_check(spec, s, lam)
    mass_defect, min_m = mass_positivity_check(s)
    moments = []
    cancels = []
    identities = []
    for r in r_values:
        if r <= spec.alpha:
            continue
        value, majorant = inverse_moment(spec, s, r)
        moments.append((float(r), value, majorant))
        cancels.append((float(r), cancellation_check(spec, s, r)))
        if lam == 1.0:
            try:
                _, _, defect = moment_identity_check(spec, s, r, newton_tol)
                identities.append((float(r), defect))
            except NotASolution:
                pass
    return DiagnosticsSnapshot(
        sup_u=sup_u,
        sup_bound_V=bound,
        min_m=min_m,
        mass_defect=mass_defect,
        inverse_moments=tuple(moments),
        cancellation_residuals=tuple(cancels),
        moment_identity_defects=tuple(identities),
    )
