"""Discrete periodic torus: uniform grids, difference operators, quadrature.

All operators act on the unit torus [0,1)^d sampled at n points per axis.
First derivatives are centered differences, the Laplacian is the compact
(2d+1)-point stencil.  On a periodic grid the centered difference is exactly
skew-adjoint under the plain grid sum, which is what every discrete
integration-by-parts identity in the diagnostics relies on.  Note that the
compact Laplacian is *not* divergence(gradient(.)): the composition is the
wide stencil.  Identities that pair the Laplacian against a divergence
therefore hold at O(h^2), not machine precision.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.sparse as sparse


@dataclass(frozen=True)
class GridSpec:
    """Uniform periodic grid: `n` points per axis on the unit torus, dim in {1, 2}."""

    dim: int
    n: int

    def __post_init__(self):
        if self.dim not in (1, 2):
            raise ValueError(f"dim must be 1 or 2, got {self.dim}")
        if self.n < 8:
            raise ValueError(f"need at least 8 points per axis, got {self.n}")

    @property
    def h(self) -> float:
        return 1.0 / self.n

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.dim

    @property
    def size(self) -> int:
        return self.n**self.dim


@dataclass(frozen=True)
class Field:
    """Real grid function, stored flat in row-major order (axis 0 slowest)."""

    grid: GridSpec
    values: np.ndarray

    def __post_init__(self):
        vals = np.ascontiguousarray(self.values, dtype=np.float64).ravel()
        if vals.size != self.grid.size:
            raise ValueError(f"expected {self.grid.size} values, got {vals.size}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("field contains non-finite values")
        object.__setattr__(self, "values", vals)

    def reshaped(self) -> np.ndarray:
        return self.values.reshape(self.grid.shape)


@dataclass(frozen=True)
class VectorField:
    """One Field per axis, all on the same grid."""

    grid: GridSpec
    components: tuple[Field, ...]

    def __post_init__(self):
        if len(self.components) != self.grid.dim:
            raise ValueError("component count must equal grid dimension")
        if any(c.grid != self.grid for c in self.components):
            raise ValueError("all components must share the grid")


def constant_field(grid: GridSpec, value: float) -> Field:
    return Field(grid, np.full(grid.size, float(value)))


def field_from_function(grid: GridSpec, fn) -> Field:
    """Sample fn(x) (d=1) or fn(x, y) (d=2) at the grid points."""
    vals = np.broadcast_to(np.asarray(fn(*mesh(grid)), dtype=float), grid.shape)
    return Field(grid, np.array(vals).ravel())


@lru_cache(maxsize=64)
def mesh(grid: GridSpec) -> tuple[np.ndarray, ...]:
    """Coordinate arrays (one per axis), each of full grid shape."""
    axis = np.arange(grid.n) * grid.h
    if grid.dim == 1:
        return (axis,)
    return tuple(np.meshgrid(axis, axis, indexing="ij"))


# ---------------------------------------------------------------------------
# difference operators (roll-based, periodic)
# ---------------------------------------------------------------------------


def _diff(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(arr, -1, axis=axis) - np.roll(arr, 1, axis=axis)) / (2.0 * h)


def _second_diff(arr: np.ndarray, axis: int, h: float) -> np.ndarray:
    return (np.roll(arr, -1, axis=axis) - 2.0 * arr + np.roll(arr, 1, axis=axis)) / (h * h)


def gradient_arrays(f: Field) -> list[np.ndarray]:
    arr = f.reshaped()
    h = f.grid.h
    return [_diff(arr, ax, h) for ax in range(f.grid.dim)]


def gradient(f: Field) -> VectorField:
    """Centered-difference gradient, second-order consistent."""
    comps = tuple(Field(f.grid, g) for g in gradient_arrays(f))
    return VectorField(f.grid, comps)


def divergence_arrays(comps: list[np.ndarray], grid: GridSpec) -> np.ndarray:
    h = grid.h
    out = np.zeros(grid.shape)
    for ax, c in enumerate(comps):
        out += _diff(c.reshape(grid.shape), ax, h)
    return out


def divergence(F: VectorField) -> Field:
    """Centered-difference divergence; exact negative adjoint of `gradient`."""
    comps = [c.reshaped() for c in F.components]
    return Field(F.grid, divergence_arrays(comps, F.grid))


def laplacian_array(arr: np.ndarray, grid: GridSpec) -> np.ndarray:
    arr = arr.reshape(grid.shape)
    out = np.zeros(grid.shape)
    for ax in range(grid.dim):
        out += _second_diff(arr, ax, grid.h)
    return out


def laplacian(f: Field) -> Field:
    """Compact-stencil Laplacian, second-order consistent."""
    return Field(f.grid, laplacian_array(f.reshaped(), f.grid))


def grid_sum(f: Field) -> float:
    return float(np.sum(f.values))


def integral(f: Field) -> float:
    """Trapezoid rule on the uniform periodic grid: h^dim times the plain sum."""
    return f.grid.h**f.grid.dim * float(np.sum(f.values))


def sup_norm(f: Field) -> float:
    return float(np.max(np.abs(f.values)))


# ---------------------------------------------------------------------------
# sparse operator matrices (flat row-major indexing, axis 0 slowest)
# ---------------------------------------------------------------------------


def _diff_1d(n: int, h: float) -> sparse.csr_matrix:
    ones = np.ones(n - 1)
    mat = sparse.diags(
        [ones, -ones, np.array([1.0]), np.array([-1.0])],
        offsets=[1, -1, -(n - 1), n - 1],
        format="csr",
    )
    return (mat / (2.0 * h)).tocsr()


def _laplacian_1d(n: int, h: float) -> sparse.csr_matrix:
    ones = np.ones(n - 1)
    mat = sparse.diags(
        [ones, -2.0 * np.ones(n), ones, np.array([1.0]), np.array([1.0])],
        offsets=[1, 0, -1, -(n - 1), n - 1],
        format="csr",
    )
    return (mat / (h * h)).tocsr()


@lru_cache(maxsize=64)
def diff_matrix(grid: GridSpec, axis: int) -> sparse.csr_matrix:
    """Centered difference along `axis` as a sparse matrix on flat fields."""
    d1 = _diff_1d(grid.n, grid.h)
    if grid.dim == 1:
        return d1
    eye = sparse.identity(grid.n, format="csr")
    if axis == 0:
        return sparse.kron(d1, eye, format="csr")
    return sparse.kron(eye, d1, format="csr")


@lru_cache(maxsize=64)
def laplacian_matrix(grid: GridSpec) -> sparse.csr_matrix:
    """Compact Laplacian as a sparse matrix on flat fields."""
    l1 = _laplacian_1d(grid.n, grid.h)
    if grid.dim == 1:
        return l1
    eye = sparse.identity(grid.n, format="csr")
    return (sparse.kron(l1, eye) + sparse.kron(eye, l1)).tocsr()


# ---------------------------------------------------------------------------
# field file format
# ---------------------------------------------------------------------------


def save_field(f: Field, path) -> None:
    """CSV with header `# n=<n> dim=<dim>`; 17 significant digits.

    d=1: one value per line; d=2: one row of n comma-separated values per line.
    """
    grid = f.grid
    with open(path, "w") as fh:
        fh.write(f"# n={grid.n} dim={grid.dim}\n")
        if grid.dim == 1:
            for v in f.values:
                fh.write(f"{v:.17g}\n")
        else:
            for row in f.reshaped():
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")


def load_field(path) -> Field:
    with open(path) as fh:
        header = fh.readline().strip()
        if not header.startswith("#"):
            raise ValueError(f"{path}: missing field header")
        items = dict(part.split("=") for part in header[1:].split())
        grid = GridSpec(dim=int(items["dim"]), n=int(items["n"]))
        values = np.loadtxt(fh, delimiter=",", ndmin=1)
    return Field(grid, values.reshape(-1))
