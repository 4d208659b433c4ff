"""Problem definition: congestion exponent, coefficient catalog, homotopy residual.

The target system on the unit torus is

    u - lap(u) + |Du|^2 / (2 m^alpha) + b(x).Du = V(x, m)
    m - lap(m) - div(m^(1-alpha) Du) - div(m b)  = 1,      m > 0.

It is embedded in the one-parameter family

    F(lam, u, m) = ( u - lap(u) + |Du|^2/(2 m^alpha) + lam b.Du
                         - lam V_eff(x, m) - (1 - lam) arctan(m),
                     m - lap(m) - div(m^(1-alpha) Du) - lam div(b m) - 1 )

with V_eff = V + epsilon_monotone * arctan(m) (the strict-monotonization of a
merely nondecreasing V).  At lam = 0 the family has the explicit solution
(u, m) = (pi/4, 1), the start of the continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from .errors import NonPositiveDensity
from .grid import (
    Field,
    GridSpec,
    VectorField,
    constant_field,
    divergence_arrays,
    gradient_arrays,
    laplacian_array,
    mesh,
)


@dataclass(frozen=True)
class TrigForm:
    """Constant plus one cos/sin harmonic per axis: c + sum_i A_i cos(2 pi x_i) + B_i sin(2 pi x_i)."""

    const: float = 0.0
    cos_amp: tuple[float, ...] = ()
    sin_amp: tuple[float, ...] = ()

    def __post_init__(self):
        object.__setattr__(self, "cos_amp", tuple(float(a) for a in self.cos_amp))
        object.__setattr__(self, "sin_amp", tuple(float(a) for a in self.sin_amp))
        if len(self.cos_amp) != len(self.sin_amp):
            raise ValueError("cos_amp and sin_amp must have the same length")

    @property
    def dim(self) -> int:
        return len(self.cos_amp)

    def value(self, xs):
        out = np.full(np.shape(xs[0]), self.const)
        for i, (a, b) in enumerate(zip(self.cos_amp, self.sin_amp)):
            out = out + a * np.cos(2 * np.pi * xs[i]) + b * np.sin(2 * np.pi * xs[i])
        return out

    def deriv(self, xs, axis: int):
        a, b = self.cos_amp[axis], self.sin_amp[axis]
        w = 2 * np.pi
        return w * (-a * np.sin(w * xs[axis]) + b * np.cos(w * xs[axis]))

    def second_deriv(self, xs, axis: int):
        a, b = self.cos_amp[axis], self.sin_amp[axis]
        w = 2 * np.pi
        return -w * w * (a * np.cos(w * xs[axis]) + b * np.sin(w * xs[axis]))

    def sup_bound(self) -> float:
        return abs(self.const) + sum(abs(a) + abs(b) for a, b in zip(self.cos_amp, self.sin_amp))

    def harmonic_sum(self) -> float:
        return sum(abs(a) + abs(b) for a, b in zip(self.cos_amp, self.sin_amp))

    def scaled(self, factor: float) -> "TrigForm":
        return TrigForm(
            self.const * factor,
            tuple(a * factor for a in self.cos_amp),
            tuple(b * factor for b in self.sin_amp),
        )

    @staticmethod
    def zero(dim: int) -> "TrigForm":
        return TrigForm(0.0, (0.0,) * dim, (0.0,) * dim)


POTENTIAL_FORMS = ("separable", "saturating", "x_only")


@dataclass(frozen=True)
class PotentialSpec:
    """Coupling V(x, m): a trig part a(x) plus a bounded nondecreasing m-part.

    separable:  V = a(x) + kappa * arctan(m)
    saturating: V = a(x) + kappa * m / (1 + m)
    x_only:     V = a(x)

    All forms are smooth, globally bounded with bounded derivatives, and
    nondecreasing in m; strictly increasing in m iff kappa > 0 (first two forms).
    """

    form: str
    a: TrigForm
    kappa: float = 0.0

    def __post_init__(self):
        if self.form not in POTENTIAL_FORMS:
            raise ValueError(f"unknown potential form {self.form!r}")
        if self.kappa < 0:
            raise ValueError("kappa must be >= 0")
        if self.form == "x_only" and self.kappa != 0.0:
            raise ValueError("x_only potential takes no kappa")

    def value(self, xs, m):
        ax = self.a.value(xs)
        if self.form == "separable":
            return ax + self.kappa * np.arctan(m)
        if self.form == "saturating":
            return ax + self.kappa * m / (1.0 + m)
        return ax * np.ones_like(m)

    def dm(self, m):
        """Partial derivative in m; >= 0 on m > 0 for every catalog entry."""
        if self.form == "separable":
            return self.kappa / (1.0 + m * m)
        if self.form == "saturating":
            return self.kappa / (1.0 + m) ** 2
        return np.zeros_like(m)

    def sup_bound(self) -> float:
        """Certified bound on sup |V| over the torus and m > 0."""
        if self.form == "separable":
            return self.a.sup_bound() + self.kappa * math.pi / 2
        if self.form == "saturating":
            return self.a.sup_bound() + self.kappa
        return self.a.sup_bound()

    @property
    def strictly_increasing(self) -> bool:
        return self.form in ("separable", "saturating") and self.kappa > 0


@dataclass(frozen=True)
class DriftSpec:
    """Reference vector field b(x), one TrigForm per component."""

    components: tuple[TrigForm, ...]

    def sample(self, grid: GridSpec) -> VectorField:
        xs = mesh(grid)
        comps = tuple(
            Field(grid, np.broadcast_to(c.value(xs), grid.shape).ravel().copy())
            for c in self.components
        )
        return VectorField(grid, comps)

    def sup_bound(self) -> float:
        """Certified bound on sup |b| (Euclidean norm)."""
        return math.sqrt(sum(c.sup_bound() ** 2 for c in self.components))

    def scaled(self, factor: float) -> "DriftSpec":
        return DriftSpec(tuple(c.scaled(factor) for c in self.components))

    def is_zero(self) -> bool:
        return all(c.sup_bound() == 0.0 for c in self.components)

    @staticmethod
    def zero(dim: int) -> "DriftSpec":
        return DriftSpec(tuple(TrigForm.zero(dim) for _ in range(dim)))


@dataclass(frozen=True)
class ProblemSpec:
    """Full problem data: grid, congestion exponent, coefficients, monotonization strength.

    alpha < 1 is required by the solver; values in [1, 2) are admitted so the
    linearization and the monotonicity diagnostics can be probed on
    manufactured states beyond the solvable range.
    """

    grid: GridSpec
    alpha: float
    potential: PotentialSpec
    drift: DriftSpec
    epsilon_monotone: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.alpha < 2.0:
            raise ValueError(f"alpha must lie in [0, 2), got {self.alpha}")
        if self.epsilon_monotone < 0:
            raise ValueError("epsilon_monotone must be >= 0")
        d = self.grid.dim
        if self.potential.a.dim != d:
            raise ValueError("potential harmonics must match grid dimension")
        if len(self.drift.components) != d or any(c.dim != d for c in self.drift.components):
            raise ValueError("drift components must match grid dimension")

    @property
    def solvable(self) -> bool:
        return self.alpha < 1.0


@dataclass(frozen=True)
class State:
    """A (u, m) pair on a common grid; m is positive at solver-accepted states."""

    u: Field
    m: Field

    def __post_init__(self):
        if self.u.grid != self.m.grid:
            raise ValueError("u and m must share the grid")

    @property
    def grid(self) -> GridSpec:
        return self.u.grid

    def stacked(self) -> np.ndarray:
        return np.concatenate([self.u.values, self.m.values])

    @staticmethod
    def from_stacked(grid: GridSpec, vec: np.ndarray) -> "State":
        n = grid.size
        return State(Field(grid, vec[:n].copy()), Field(grid, vec[n:].copy()))

    def min_m(self) -> float:
        return float(np.min(self.m.values))


@lru_cache(maxsize=64)
def _drift_arrays(drift: DriftSpec, grid: GridSpec) -> tuple[np.ndarray, ...]:
    xs = mesh(grid)
    return tuple(np.broadcast_to(c.value(xs), grid.shape).copy() for c in drift.components)


def potential_term(spec: ProblemSpec, lam: float, m: np.ndarray) -> np.ndarray:
    """lam * (V + eps * arctan(m)) + (1 - lam) * arctan(m), evaluated on the grid."""
    xs = mesh(spec.grid)
    v_eff = spec.potential.value(xs, m) + spec.epsilon_monotone * np.arctan(m)
    return lam * v_eff + (1.0 - lam) * np.arctan(m)


def potential_term_dm(spec: ProblemSpec, lam: float, m: np.ndarray) -> np.ndarray:
    """m-derivative of `potential_term` (feeds the linearization)."""
    arctan_dm = 1.0 / (1.0 + m * m)
    v_eff_dm = spec.potential.dm(m) + spec.epsilon_monotone * arctan_dm
    return lam * v_eff_dm + (1.0 - lam) * arctan_dm


def residual(
    spec: ProblemSpec,
    lam: float,
    s: State,
    sources: tuple[Field, Field] | None = None,
) -> tuple[Field, Field]:
    """Both components of F(lam, u, m); zero at lam=1, eps=0 certifies a discrete solution.

    `sources` subtracts manufactured right-hand sides (verification harness).
    Raises NonPositiveDensity when min(m) <= 0: the caller must damp its step.
    """
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")
    grid = spec.grid
    m = s.m.reshaped()
    if np.min(m) <= 0.0:
        raise NonPositiveDensity(f"min(m) = {np.min(m):g} <= 0 in residual")
    u = s.u.reshaped()
    alpha = spec.alpha

    du = gradient_arrays(s.u)
    du_sq = sum(d * d for d in du)
    bvals = _drift_arrays(spec.drift, grid)

    r1 = (
        u
        - laplacian_array(u, grid)
        + du_sq / (2.0 * m**alpha)
        + lam * sum(b * d for b, d in zip(bvals, du))
        - potential_term(spec, lam, m)
    )

    flux = [m ** (1.0 - alpha) * d for d in du]
    r2 = (
        m
        - laplacian_array(m, grid)
        - divergence_arrays(flux, grid)
        - lam * divergence_arrays([b * m for b in bvals], grid)
        - 1.0
    )

    if sources is not None:
        r1 = r1 - sources[0].reshaped()
        r2 = r2 - sources[1].reshaped()
    return Field(grid, r1), Field(grid, r2)


def residual_sup(spec, lam, s, sources=None) -> float:
    r1, r2 = residual(spec, lam, s, sources)
    return max(float(np.max(np.abs(r1.values))), float(np.max(np.abs(r2.values))))


def exact_initial(spec: ProblemSpec) -> State:
    """The lam = 0 solution (u, m) = (pi/4, 1): arctan(1) = pi/4 and the m-equation is 1 = 1."""
    return State(constant_field(spec.grid, math.pi / 4), constant_field(spec.grid, 1.0))


def drift_field(spec: ProblemSpec, s: State) -> VectorField:
    """Optimal feedback drift Du / m^alpha (pointwise; centered gradient)."""
    m = s.m.reshaped()
    if np.min(m) <= 0.0:
        raise NonPositiveDensity("drift_field needs m > 0")
    scale = m**-spec.alpha
    comps = tuple(Field(spec.grid, g * scale) for g in gradient_arrays(s.u))
    return VectorField(spec.grid, comps)
