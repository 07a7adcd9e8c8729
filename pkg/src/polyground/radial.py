"""Radial fields on R^N: quadrature, iterated Laplacians and polyharmonic solves.

A radial function u(|x|) is sampled at r_i = i*h, i = 0..n-1, with h = R/n.
The continuation is even at the origin and zero for r >= R (one ghost node
u_n = 0 at r = R).

The Laplacian is discretised in flux form,

    (-L u)_i = [s_{i-1/2} (u_i - u_{i-1}) + s_{i+1/2} (u_i - u_{i+1})] / (h^2 w_i),

with node weights w_i = i^(N-1) (the trapezoid rule for the radial measure) and
w_0 = 2^-N / N (the ball of radius h/2).  The face weights s_{i+1/2} are fixed by
requiring that L be exact on r^2 at every node, which gives the recursion
s_{i+1/2} (2i + 1) = 2N (w_0 + ... + w_i).  They satisfy
s_{i+1/2} = (i + 1/2)^(N-1) (1 + O(i^-2)); at the origin the stencil reduces to
2N (u_1 - u_0) / h^2, i.e. Delta u(0) = N u''(0) with an even ghost value.

-L is self-adjoint and positive definite in the weighted inner product, so
|u|_m^2 = u^T W (-L)^m u exactly and (-L)^-m is the Riesz map of the discrete
D^{m,2} inner product.  Every coefficient is a fixed array times a power of h,
so replacing R by R/r rescales all quantities by exact powers of r.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np
from scipy import sparse
from scipy.linalg import LinAlgError, solve_banded
from scipy.special import gamma


class NonFiniteError(ValueError):
    """Raised when a pointwise map produces a non-finite value on a grid node."""

    def __init__(self, index: int, value: float):
        super().__init__(f"non-finite integrand value {value!r} at node {index}")
        self.index = index
        self.value = value


class DegenerateGridError(RuntimeError):
    pass


def sphere_area(dim: int) -> float:
    """Area of the unit sphere S^(dim-1)."""
    return 2.0 * np.pi ** (dim / 2) / gamma(dim / 2)


@dataclass(frozen=True)
class RadialGrid:
    dim: int
    radius: float
    n: int

    def __post_init__(self):
        if int(self.dim) != self.dim or self.dim < 3:
            raise ValueError(f"dim must be an integer >= 3, got {self.dim}")
        if int(self.n) != self.n or self.n < 8:
            raise ValueError(f"n must be an integer >= 8, got {self.n}")
        if not (np.isfinite(self.radius) and self.radius > 0):
            raise ValueError(f"radius must be positive, got {self.radius}")

    @property
    def spacing(self) -> float:
        return self.radius / self.n

    @cached_property
    def nodes(self) -> np.ndarray:
        return np.arange(self.n) * self.spacing

    @cached_property
    def _unit_weights(self) -> tuple[np.ndarray, np.ndarray]:
        N = self.dim
        i = np.arange(self.n, dtype=float)
        w = i ** (N - 1)
        w[0] = 0.5**N / N
        s = 2.0 * N * np.cumsum(w) / (2.0 * i + 1.0)
        return w, s

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights at the nodes, including the sphere area."""
        return sphere_area(self.dim) * self.spacing**self.dim * self._unit_weights[0]

    @cached_property
    def face_weights(self) -> np.ndarray:
        """Quadrature weights at the faces r_{i+1/2}, i = 0..n-1.

        The last face sits between node n-1 and the ghost node at R.
        """
        return sphere_area(self.dim) * self.spacing**self.dim * self._unit_weights[1]

    @cached_property
    def _stencil(self) -> tuple[np.ndarray, np.ndarray]:
        w, s = self._unit_weights
        lower = np.zeros(self.n)
        lower[1:] = s[:-1] / w[1:]
        upper = s / w
        h2 = self.spacing**2
        return lower / h2, upper / h2

    def check_order(self, m: int) -> None:
        if m < 1 or 2 * m >= self.dim:
            raise ValueError(f"order m={m} requires 1 <= m and 2m < N={self.dim}")


def make_grid(dim: int, radius: float, n: int) -> RadialGrid:
    return RadialGrid(dim, float(radius), n)


@dataclass(frozen=True)
class RadialField:
    grid: RadialGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        v = np.array(self.values, dtype=float)
        if v.shape != (self.grid.n,):
            raise ValueError(f"expected {self.grid.n} values, got shape {v.shape}")
        if not np.all(np.isfinite(v)):
            bad = int(np.flatnonzero(~np.isfinite(v))[0])
            raise NonFiniteError(bad, float(v[bad]))
        v.flags.writeable = False
        object.__setattr__(self, "values", v)

    @property
    def dim(self) -> int:
        return self.grid.dim

    def with_values(self, values) -> "RadialField":
        return RadialField(self.grid, values)

    def __add__(self, other: "RadialField") -> "RadialField":
        return self.with_values(self.values + other.values)

    def __sub__(self, other: "RadialField") -> "RadialField":
        return self.with_values(self.values - other.values)

    def __mul__(self, c: float) -> "RadialField":
        return self.with_values(c * self.values)

    __rmul__ = __mul__


def field_from_function(grid: RadialGrid, f: Callable[[np.ndarray], np.ndarray]) -> RadialField:
    return RadialField(grid, f(grid.nodes))


def integrate(u: RadialField, f: Callable[[np.ndarray], np.ndarray]) -> float:
    """Approximate the integral over R^N of f(u(x)) dx."""
    vals = np.asarray(f(u.values), dtype=float)
    if vals.shape != u.values.shape:
        vals = np.broadcast_to(vals, u.values.shape)
    bad = ~np.isfinite(vals)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise NonFiniteError(i, float(vals[i]))
    return float(np.sum(u.grid.weights * vals))


def l2_norm_sq(u: RadialField) -> float:
    return float(np.sum(u.grid.weights * u.values**2))


def inner_l2(u: RadialField, v: RadialField) -> float:
    return float(np.sum(u.grid.weights * u.values * v.values))


def _neg_lap(grid: RadialGrid, v: np.ndarray) -> np.ndarray:
    lower, upper = grid._stencil
    out = (lower + upper) * v
    out[1:] -= lower[1:] * v[:-1]
    out[:-1] -= upper[:-1] * v[1:]
    return out


def radial_laplacian(u: RadialField) -> RadialField:
    return u.with_values(-_neg_lap(u.grid, u.values))


def apply_polyharmonic(u: RadialField, m: int) -> RadialField:
    """(-Delta)^m u, as m applications of the discrete negative Laplacian."""
    u.grid.check_order(m)
    v = u.values
    for _ in range(m):
        v = _neg_lap(u.grid, v)
    return u.with_values(v)


def _derivative_at_faces(grid: RadialGrid, v: np.ndarray) -> np.ndarray:
    return np.diff(np.append(v, 0.0)) / grid.spacing


def _order_component(grid: RadialGrid, v: np.ndarray, m: int) -> np.ndarray:
    """nabla^m v: Delta^(m/2) v at nodes for even m, d/dr Delta^((m-1)/2) v at faces for odd m."""
    for _ in range(m // 2):
        v = -_neg_lap(grid, v)
    if m % 2:
        v = _derivative_at_faces(grid, v)
    return v


def polyharmonic_inner(u: RadialField, v: RadialField, m: int) -> float:
    """The D^{m,2} inner product, integral of nabla^m u . nabla^m v."""
    grid = u.grid
    grid.check_order(m)
    a = _order_component(grid, u.values, m)
    b = _order_component(grid, v.values, m)
    if m % 2:
        return float(np.sum(grid.face_weights * a * b))
    return float(np.sum(grid.weights * a * b))


def polyharmonic_seminorm_sq(u: RadialField, m: int) -> float:
    return polyharmonic_inner(u, u, m)


def _neg_lap_banded(grid: RadialGrid) -> np.ndarray:
    lower, upper = grid._stencil
    ab = np.zeros((3, grid.n))
    ab[0, 1:] = -upper[:-1]
    ab[1] = lower + upper
    ab[2, :-1] = -lower[1:]
    return ab


def neg_laplacian_matrix(grid: RadialGrid) -> sparse.csr_matrix:
    """The tridiagonal matrix of -L (ghost value 0 at R)."""
    lower, upper = grid._stencil
    return sparse.diags([-lower[1:], lower + upper, -upper[:-1]], [-1, 0, 1], format="csr")


def energy_matrix(grid: RadialGrid, m: int) -> sparse.csr_matrix:
    """Symmetric banded A = W (-L)^m with |u|_m^2 = u^T A u."""
    T = neg_laplacian_matrix(grid)
    A = sparse.identity(grid.n, format="csr")
    for _ in range(m):
        A = T @ A
    A = sparse.diags(grid.weights) @ A
    # symmetric in exact arithmetic; symmetrise the rounding
    return ((A + A.T) * 0.5).tocsr()


def solve_polyharmonic(f: RadialField, m: int) -> RadialField:
    """Solve (-Delta)^m w = f by m tridiagonal solves with Navier conditions at R."""
    grid = f.grid
    grid.check_order(m)
    ab = _neg_lap_banded(grid)
    v = np.array(f.values)
    for _ in range(m):
        try:
            x = solve_banded((1, 1), ab, v)
        except LinAlgError as exc:
            raise DegenerateGridError(f"singular tridiagonal factorization: {exc}") from exc
        # one step of iterative refinement keeps the composed residual at roundoff
        x += solve_banded((1, 1), ab, v - _neg_lap(grid, x))
        v = x
    return f.with_values(v)


def dilate(u: RadialField, r: float) -> RadialField:
    """The field x -> u(r x), represented exactly by shrinking the grid radius to R/r."""
    if not (np.isfinite(r) and r > 0):
        raise ValueError(f"dilation factor must be positive, got {r}")
    if r == 1.0:
        return u
    return RadialField(RadialGrid(u.grid.dim, u.grid.radius / r, u.grid.n), u.values)


def conforming_padding(m: int) -> int:
    """Outer nodes pinned to zero so that zero extension beyond R is exact for order m."""
    return m // 2


def solve_polyharmonic_conforming(f: RadialField, m: int) -> RadialField:
    """Riesz map of the D^{m,2} product restricted to fields vanishing on the outer nodes.

    With the last m//2 nodes held at zero every (-L)^k u entering the seminorm is
    the value of the zero-extended field on the unbounded lattice, so the
    truncation at R imposes no Navier condition.  Computed from the Navier solve
    by a small capacitance correction.
    """
    grid = f.grid
    p = conforming_padding(m)
    x0 = solve_polyharmonic(f, m).values
    if p == 0:
        return f.with_values(x0)
    idx = np.arange(grid.n - p, grid.n)
    Z = np.empty((grid.n, p))
    for k, j in enumerate(idx):
        e = np.zeros(grid.n)
        e[j] = 1.0 / grid.weights[j]
        Z[:, k] = solve_polyharmonic(f.with_values(e), m).values
    lam = np.linalg.solve(Z[idx, :], x0[idx])
    x = x0 - Z @ lam
    x[idx] = 0.0
    return f.with_values(x)
