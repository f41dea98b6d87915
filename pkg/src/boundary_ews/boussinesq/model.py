"""Physics of the 2D convection model: fields, boundary handling, residual, Jacobian.

The state is (psi, omega, T, S) on the full grid (boundary layer included).
Unknowns live on interior nodes; boundary values are recovered through sparse
*extension operators* ``full = E @ interior + b`` encoding the boundary
conditions (Dirichlet walls for psi and omega, no-flux walls for T and S except
at the surface, where T obeys a Newtonian-cooling row and S a prescribed-flux
row).  Every interior equation is then a composition of full-grid stencils with
these extensions, which makes the analytic Jacobian mechanically consistent
with the residual.

Block layout for the linearization around a steady state, acting on stacked
interior vectors [omega; T; S] (psi is eliminated through the elliptic
constraint lap psi = -omega):

    a11 = lap (Dirichlet psi rows)    a12 = [I 0 0]
    a21 = advection of the base-state gradients by the perturbation flow
    a22 = base-flow advection + diffusion + buoyancy coupling

and the reduced generator is the Schur complement a22 - a21 a11^{-1} a12.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace
from functools import cached_property

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .grid import DiffOps, Grid2D, build_diff_ops, one_sided_first_derivative

__all__ = [
    "BoussinesqParams",
    "StateFields",
    "forcing_profiles",
    "BoundaryScheme",
    "build_boundary_scheme",
    "ModelOperators",
    "build_operators",
    "reconstruct_state",
    "interior_vector",
    "residual",
    "LinearBlocks",
    "assemble_linearization",
    "schur_apply",
    "schur_dense",
    "salt_project",
    "salt_project_stacked",
    "transfer_state",
]


@dataclass(frozen=True)
class BoussinesqParams:
    """Physical parameters; ``kappa=math.inf`` selects the fixed-temperature surface."""

    rayleigh: float
    kappa: float
    length: float
    nu: float
    delta: float
    p: float
    prandtl: float = 2.25
    lewis: float = 1.0
    height: float = 1.0
    sigma: float = 0.01

    def __post_init__(self) -> None:
        for name in ("prandtl", "lewis", "rayleigh", "length", "height"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.kappa <= 0:
            raise ValueError("kappa must be positive (math.inf allowed)")
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    def with_p(self, p: float) -> "BoussinesqParams":
        return replace(self, p=p)


def forcing_profiles(x2: np.ndarray | float, length: float):
    """Surface forcing profiles (freshwater flux, its tilt, restoring temperature)."""
    x2 = np.asarray(x2, dtype=float)
    if np.any(x2 < 0) or np.any(x2 > length):
        raise ValueError("x2 outside [0, L]")
    s = x2 / length - 0.5
    q_s = 3.0 * np.cos(2.0 * math.pi * s)
    v_s = -np.sin(math.pi * s)
    t_s = 0.5 * (np.cos(2.0 * math.pi * s) + 1.0)
    return q_s, v_s, t_s


@dataclass(frozen=True)
class StateFields:
    """Full-grid fields, each of shape (m+2, n+2)."""

    psi: np.ndarray
    omega: np.ndarray
    temperature: np.ndarray
    salinity: np.ndarray

    def __post_init__(self) -> None:
        shape = self.psi.shape
        for arr in (self.omega, self.temperature, self.salinity):
            if arr.shape != shape:
                raise ValueError("field shapes disagree")

    @property
    def shape(self) -> tuple[int, int]:
        return self.psi.shape

    def copy(self) -> "StateFields":
        return StateFields(
            self.psi.copy(),
            self.omega.copy(),
            self.temperature.copy(),
            self.salinity.copy(),
        )


# ---------------------------------------------------------------------------
# Boundary-condition elimination
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class _FieldExtension:
    """full = extend @ interior + offset, plus the raw boundary-row operator.

    ``bc_rows @ full - bc_data`` vanishes exactly on consistent states; the
    rows double as the boundary entries of the public residual.
    """

    extend: sparse.csr_matrix
    offset: np.ndarray
    bc_rows: sparse.csr_matrix
    bc_data: np.ndarray


def _edge_nodes(grid: Grid2D):
    """Boundary nodes excluding corners, as (side, i, j) triples."""
    m, n = grid.m, grid.n
    nodes = []
    for j in range(1, n + 1):
        nodes.append(("floor", 0, j))
        nodes.append(("surface", m + 1, j))
    for i in range(1, m + 1):
        nodes.append(("west", i, 0))
        nodes.append(("east", i, n + 1))
    return nodes


class BoundaryScheme:
    """Extension operators for all four fields under the active parameters."""

    def __init__(self, grid: Grid2D, params: BoussinesqParams):
        self.grid = grid
        self.params = params
        self._build()

    def _build(self) -> None:
        g = self.grid
        q_s, v_s, t_s = forcing_profiles(g.x2[1:-1], self.params.length)
        self.surface_flux = self.params.p * (q_s + self.params.nu * v_s)
        z = g.x1
        h = g.h2
        # One-sided first-derivative weights at each wall (outward coordinate order).
        self._floor_w = one_sided_first_derivative(z[1] - z[0], z[2] - z[0])
        self._surface_w = one_sided_first_derivative(z[-2] - z[-1], z[-3] - z[-1])
        self._west_w = one_sided_first_derivative(h, 2 * h)
        self._east_w = one_sided_first_derivative(-h, -2 * h)

        self.psi = self._dirichlet_zero()
        self.omega = self._dirichlet_zero()
        self.temperature = self._scalar_extension(
            surface_kind="robin", surface_data=t_s - self.params.delta
        )
        self.salinity = self._scalar_extension(
            surface_kind="flux", surface_data=self.surface_flux
        )

    # -- builders -----------------------------------------------------------

    def _dirichlet_zero(self) -> _FieldExtension:
        g = self.grid
        rows, cols, vals = [], [], []
        bcr, bcc, bcv = [], [], []
        ii, jj = np.meshgrid(
            np.arange(1, g.m + 1), np.arange(1, g.n + 1), indexing="ij"
        )
        rows.extend(g.full_index(ii.ravel(), jj.ravel()))
        cols.extend(g.interior_index(ii.ravel(), jj.ravel()))
        vals.extend(np.ones(g.num_interior))
        edges = _edge_nodes(g)
        for k, (_, i, j) in enumerate(edges):
            bcr.append(k)
            bcc.append(g.full_index(i, j))
            bcv.append(1.0)
        extend = sparse.coo_matrix(
            (vals, (rows, cols)), shape=(g.num_full, g.num_interior)
        ).tocsr()
        bc_rows = sparse.coo_matrix(
            (bcv, (bcr, bcc)), shape=(len(edges), g.num_full)
        ).tocsr()
        return _FieldExtension(
            extend=extend,
            offset=np.zeros(g.num_full),
            bc_rows=bc_rows,
            bc_data=np.zeros(len(edges)),
        )

    def _scalar_extension(
        self, surface_kind: str, surface_data: np.ndarray
    ) -> _FieldExtension:
        g = self.grid
        kappa = self.params.kappa
        rows, cols, vals = [], [], []
        offset = np.zeros(g.num_full)
        bcr, bcc, bcv = [], [], []
        bc_data = []
        ii, jj = np.meshgrid(
            np.arange(1, g.m + 1), np.arange(1, g.n + 1), indexing="ij"
        )
        rows.extend(g.full_index(ii.ravel(), jj.ravel()))
        cols.extend(g.interior_index(ii.ravel(), jj.ravel()))
        vals.extend(np.ones(g.num_interior))

        edges = _edge_nodes(g)
        for k, (side, i, j) in enumerate(edges):
            node = g.full_index(i, j)
            if side == "floor":
                w0, w1, w2 = self._floor_w
                nbrs = [g.full_index(1, j), g.full_index(2, j)]
                datum = 0.0
                scale = w0
            elif side == "west":
                w0, w1, w2 = self._west_w
                nbrs = [g.full_index(i, 1), g.full_index(i, 2)]
                datum = 0.0
                scale = w0
            elif side == "east":
                w0, w1, w2 = self._east_w
                nbrs = [g.full_index(i, g.n), g.full_index(i, g.n - 1)]
                datum = 0.0
                scale = w0
            else:  # surface
                w0, w1, w2 = self._surface_w
                nbrs = [g.full_index(g.m, j), g.full_index(g.m - 1, j)]
                if surface_kind == "flux":
                    datum = surface_data[j - 1]
                    scale = w0
                elif math.isinf(kappa):
                    # Fixed-value surface row: value = datum, no neighbours.
                    offset[node] = surface_data[j - 1]
                    bcr.append(k)
                    bcc.append(node)
                    bcv.append(1.0)
                    bc_data.append(surface_data[j - 1])
                    continue
                else:
                    # d/dx1 + kappa * value = kappa * datum
                    datum = kappa * surface_data[j - 1]
                    scale = w0 + kappa
            # value = (datum - w1 f1 - w2 f2) / scale
            rows.extend([node, node])
            cols.extend([self._to_interior(nbrs[0]), self._to_interior(nbrs[1])])
            vals.extend([-w1 / scale, -w2 / scale])
            offset[node] = datum / scale
            # Residual form of the boundary row.
            bcr.extend([k, k, k])
            bcc.extend([node, nbrs[0], nbrs[1]])
            if surface_kind == "robin" and side == "surface" and not math.isinf(kappa):
                bcv.extend([w0 + kappa, w1, w2])
            else:
                bcv.extend([w0, w1, w2])
            bc_data.append(datum)

        extend = sparse.coo_matrix(
            (vals, (rows, cols)), shape=(g.num_full, g.num_interior)
        ).tocsr()
        bc_rows = sparse.coo_matrix(
            (bcv, (bcr, bcc)), shape=(len(edges), g.num_full)
        ).tocsr()
        return _FieldExtension(
            extend=extend,
            offset=offset,
            bc_rows=bc_rows,
            bc_data=np.asarray(bc_data),
        )

    def _to_interior(self, full_idx: int) -> int:
        g = self.grid
        i, j = divmod(int(full_idx), g.n + 2)
        return int(g.interior_index(i, j))

    # -- noise plumbing -----------------------------------------------------

    @cached_property
    def surface_datum_response(self) -> sparse.csr_matrix:
        """Sparse (full, n) map from a surface-flux datum per column to S values.

        Column j holds the derivative of the full salinity field with respect
        to the flux datum at surface column j (only the surface node moves).
        """
        g = self.grid
        rows = [g.full_index(g.m + 1, j) for j in range(1, g.n + 1)]
        cols = list(range(g.n))
        vals = [1.0 / self._surface_w[0]] * g.n
        return sparse.coo_matrix(
            (vals, (rows, cols)), shape=(g.num_full, g.n)
        ).tocsr()


def build_boundary_scheme(grid: Grid2D, params: BoussinesqParams) -> BoundaryScheme:
    return BoundaryScheme(grid, params)


# ---------------------------------------------------------------------------
# Assembled operators
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ModelOperators:
    """Grid, stencils, and boundary scheme bundled for one parameter set."""

    grid: Grid2D
    params: BoussinesqParams
    diff: DiffOps
    bounds: BoundaryScheme

    @cached_property
    def lap_psi(self) -> sparse.csr_matrix:
        """Interior Laplacian with homogeneous Dirichlet rows (the psi block)."""
        return (self.diff.laplacian @ self.bounds.psi.extend).tocsr()

    @cached_property
    def lap_psi_lu(self):
        return splu(self.lap_psi.tocsc())

    def with_p(self, p: float) -> "ModelOperators":
        """Same grid and stencils, new forcing amplitude p (boundary data rebuilt)."""
        params = self.params.with_p(p)
        return ModelOperators(
            grid=self.grid,
            params=params,
            diff=self.diff,
            bounds=build_boundary_scheme(self.grid, params),
        )


def build_operators(grid: Grid2D, params: BoussinesqParams) -> ModelOperators:
    return ModelOperators(
        grid=grid,
        params=params,
        diff=build_diff_ops(grid),
        bounds=build_boundary_scheme(grid, params),
    )


# ---------------------------------------------------------------------------
# State plumbing
# ---------------------------------------------------------------------------


def interior_vector(ops: ModelOperators, state: StateFields) -> np.ndarray:
    """Stacked interior unknowns [psi; omega; T; S] read from full fields."""
    g = ops.grid
    sl = (slice(1, g.m + 1), slice(1, g.n + 1))
    return np.concatenate(
        [
            state.psi[sl].ravel(),
            state.omega[sl].ravel(),
            state.temperature[sl].ravel(),
            state.salinity[sl].ravel(),
        ]
    )


def reconstruct_state(ops: ModelOperators, x: np.ndarray) -> StateFields:
    """Full fields from stacked interior unknowns via the extension operators."""
    g = ops.grid
    k = g.num_interior
    if x.shape != (4 * k,):
        raise ValueError("interior vector has wrong length")
    b = ops.bounds
    parts = []
    for ext, block in zip(
        (b.psi, b.omega, b.temperature, b.salinity),
        (x[:k], x[k : 2 * k], x[2 * k : 3 * k], x[3 * k :]),
    ):
        parts.append((ext.extend @ block + ext.offset).reshape(g.full_shape))
    return StateFields(*parts)


def transfer_state(state: StateFields, grid_from: Grid2D, grid_to: Grid2D) -> StateFields:
    """Bilinear transfer of all four fields onto another grid.

    Both grids must cover the same physical box.  Used to warm-start Newton on
    a refined grid from a coarse solution, which is far more robust than
    re-relaxing at high Rayleigh number (explicit advection limits the time
    step there).
    """
    from scipy.interpolate import RegularGridInterpolator

    if (grid_from.length, grid_from.height) != (grid_to.length, grid_to.height):
        raise ValueError("grids cover different boxes")
    pts1, pts2 = np.meshgrid(grid_to.x1, grid_to.x2, indexing="ij")
    query = np.column_stack([pts1.ravel(), pts2.ravel()])
    out = []
    for field_vals in (state.psi, state.omega, state.temperature, state.salinity):
        interp = RegularGridInterpolator(
            (grid_from.x1, grid_from.x2), field_vals, method="linear"
        )
        out.append(interp(query).reshape(grid_to.full_shape))
    return StateFields(*out)


def velocity(ops: ModelOperators, state: StateFields):
    """Interior velocity components (u along x2, w along x1) from psi."""
    psi = state.psi.ravel()
    u = ops.diff.dx1 @ psi
    w = -(ops.diff.dx2 @ psi)
    return u, w


def salt_project(grid: Grid2D, values: np.ndarray) -> np.ndarray:
    """Remove the weighted mean from an interior salinity-block array.

    The continuous salinity operator conserves the salt integral identically
    (no-flux walls, zero-mean surface forcing).  The discrete tendency keeps
    that structure by construction: its weighted mean is projected out.  The
    projection leaves every nonzero eigenvalue of the reduced generator
    unchanged and anchors the conserved direction exactly.
    """
    w = grid.weights_flat
    mean = (w @ values) / grid.weights_flat.sum()
    return values - mean


def salt_project_stacked(grid: Grid2D, stacked: np.ndarray) -> np.ndarray:
    """Apply :func:`salt_project` to the S block of stacked [omega; T; S] data."""
    out = np.array(stacked, copy=True)
    k = grid.num_interior
    w = grid.weights_flat
    total = w.sum()
    out[2 * k :] -= (w @ out[2 * k :]) / total
    return out


# ---------------------------------------------------------------------------
# Residual
# ---------------------------------------------------------------------------


def _dynamic_residual(ops: ModelOperators, state: StateFields):
    """Interior residuals of the constraint and the three transport equations."""
    d = ops.diff
    p = ops.params
    psi = state.psi.ravel()
    omega = state.omega.ravel()
    temp = state.temperature.ravel()
    sal = state.salinity.ravel()
    u, w = velocity(ops, state)
    omega_i = d.interior_selector @ omega

    r_psi = d.laplacian @ psi + omega_i
    r_omega = (
        -(u * (d.dx2 @ omega) + w * (d.dx1 @ omega))
        + p.prandtl * (d.laplacian @ omega)
        + p.prandtl * p.rayleigh * (d.dx2 @ temp - d.dx2 @ sal)
    )
    r_temp = -(u * (d.dx2 @ temp) + w * (d.dx1 @ temp)) + d.laplacian @ temp
    r_sal = -(u * (d.dx2 @ sal) + w * (d.dx1 @ sal)) + (
        1.0 / p.lewis
    ) * (d.laplacian @ sal)
    return r_psi, r_omega, r_temp, salt_project(ops.grid, r_sal)


def residual(ops: ModelOperators, state: StateFields) -> np.ndarray:
    """Steady-state residual: interior equations followed by boundary rows.

    Zero (to tolerance) exactly when the state is a steady solution whose
    boundary layer satisfies the active boundary conditions.
    """
    for arr in (state.psi, state.omega, state.temperature, state.salinity):
        if not np.all(np.isfinite(arr)):
            raise ValueError("non-finite field values")
    parts = list(_dynamic_residual(ops, state))
    b = ops.bounds
    for ext, field_arr in zip(
        (b.psi, b.omega, b.temperature, b.salinity),
        (state.psi, state.omega, state.temperature, state.salinity),
    ):
        parts.append(ext.bc_rows @ field_arr.ravel() - ext.bc_data)
    return np.concatenate(parts)


# ---------------------------------------------------------------------------
# Linearization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LinearBlocks:
    """Sparse blocks of the linearization about a base state.

    ``a11`` acts on interior psi; ``a12 = [I 0 0]`` selects omega; ``a21`` and
    ``a22`` act on the stacked interior vector [omega; T; S].
    """

    ops: ModelOperators
    a11: sparse.csr_matrix
    a21: sparse.csr_matrix
    a22: sparse.csr_matrix
    base_velocity: tuple[np.ndarray, np.ndarray]

    @property
    def block_size(self) -> int:
        return self.ops.grid.num_interior

    @cached_property
    def a12(self) -> sparse.csr_matrix:
        k = self.block_size
        return sparse.hstack(
            [sparse.identity(k), sparse.csr_matrix((k, 2 * k))]
        ).tocsr()

    @cached_property
    def a11_lu(self):
        return splu(self.a11.tocsc())

    @cached_property
    def noise_input(self) -> sparse.csr_matrix:
        """(3 m n, n) response of the [omega; T; S] equations to a surface S-flux datum."""
        ops = self.ops
        d = ops.diff
        p = ops.params
        u, w = self.base_velocity
        resp = ops.bounds.surface_datum_response
        du = sparse.diags(u)
        dw = sparse.diags(w)
        raw_omega = (-p.prandtl * p.rayleigh) * d.dx2
        raw_sal = -(du @ d.dx2) - (dw @ d.dx1) + (1.0 / p.lewis) * d.laplacian
        zero = sparse.csr_matrix((ops.grid.num_interior, ops.grid.n))
        return sparse.vstack(
            [(raw_omega @ resp).tocsr(), zero, (raw_sal @ resp).tocsr()]
        ).tocsr()

    @cached_property
    def p_derivative(self) -> np.ndarray:
        """d(residual)/dp for the dynamic rows (the flux datum is linear in p)."""
        ops = self.ops
        q_s, v_s, _ = forcing_profiles(ops.grid.x2[1:-1], ops.params.length)
        raw = self.noise_input @ (q_s + ops.params.nu * v_s)
        return salt_project_stacked(ops.grid, raw)

    @cached_property
    def salt_drift_row(self) -> np.ndarray:
        """Weighted column sums of the raw S-equation rows, over [psi | omega T S].

        This is the rank-one data of the conservation projection: the true
        Jacobian of the projected residual is the raw block Jacobian minus
        (salt-row indicator / total weight) times this row.  Solvers fold it in
        through one extra bordering pair, keeping every factorization sparse.
        """
        k = self.block_size
        w = self.ops.grid.weights_flat
        from_psi = self.a21[2 * k : 3 * k].T @ w
        from_v = self.a22[2 * k : 3 * k].T @ w
        return np.concatenate([from_psi, from_v])


def assemble_linearization(ops: ModelOperators, state: StateFields) -> LinearBlocks:
    """Analytic Jacobian blocks of the transport system about ``state``."""
    d = ops.diff
    p = ops.params
    b = ops.bounds
    u, w = velocity(ops, state)
    du = sparse.diags(u)
    dw = sparse.diags(w)

    grad_x2 = {
        "omega": d.dx2 @ state.omega.ravel(),
        "temperature": d.dx2 @ state.temperature.ravel(),
        "salinity": d.dx2 @ state.salinity.ravel(),
    }
    grad_x1 = {
        "omega": d.dx1 @ state.omega.ravel(),
        "temperature": d.dx1 @ state.temperature.ravel(),
        "salinity": d.dx1 @ state.salinity.ravel(),
    }

    dx1_psi = (d.dx1 @ b.psi.extend).tocsr()
    dx2_psi = (d.dx2 @ b.psi.extend).tocsr()

    def a21_row(name: str) -> sparse.csr_matrix:
        return (
            -sparse.diags(grad_x2[name]) @ dx1_psi
            + sparse.diags(grad_x1[name]) @ dx2_psi
        ).tocsr()

    a21 = sparse.vstack(
        [a21_row("omega"), a21_row("temperature"), a21_row("salinity")]
    ).tocsr()

    def advection(ext) -> sparse.csr_matrix:
        return (du @ (d.dx2 @ ext.extend) + dw @ (d.dx1 @ ext.extend)).tocsr()

    lap_omega = (d.laplacian @ b.omega.extend).tocsr()
    lap_t = (d.laplacian @ b.temperature.extend).tocsr()
    lap_s = (d.laplacian @ b.salinity.extend).tocsr()
    dx2_t = (d.dx2 @ b.temperature.extend).tocsr()
    dx2_s = (d.dx2 @ b.salinity.extend).tocsr()

    k = ops.grid.num_interior
    zero = sparse.csr_matrix((k, k))
    a22 = sparse.bmat(
        [
            [
                -advection(b.omega) + p.prandtl * lap_omega,
                p.prandtl * p.rayleigh * dx2_t,
                -p.prandtl * p.rayleigh * dx2_s,
            ],
            [zero, -advection(b.temperature) + lap_t, zero],
            [zero, zero, -advection(b.salinity) + (1.0 / p.lewis) * lap_s],
        ]
    ).tocsr()

    return LinearBlocks(
        ops=ops,
        a11=(d.laplacian @ b.psi.extend).tocsr(),
        a21=a21,
        a22=a22,
        base_velocity=(u, w),
    )


def schur_apply(blocks: LinearBlocks, v: np.ndarray) -> np.ndarray:
    """Apply the reduced generator a22 - a21 a11^{-1} a12 to a stacked vector.

    The salinity rows are returned mean-free (conservation projection)."""
    k = blocks.block_size
    if v.shape != (3 * k,):
        raise ValueError("vector has wrong length")
    if np.iscomplexobj(v):
        poisson = blocks.a11_lu.solve(v[:k].real) + 1j * blocks.a11_lu.solve(
            v[:k].imag
        )
    else:
        poisson = blocks.a11_lu.solve(v[:k])
    return salt_project_stacked(blocks.ops.grid, blocks.a22 @ v - blocks.a21 @ poisson)


def schur_dense(blocks: LinearBlocks) -> np.ndarray:
    """Dense reduced generator (column count 3 m n); one Poisson solve per omega column."""
    k = blocks.block_size
    inv_cols = blocks.a11_lu.solve(np.eye(k))
    correction = blocks.a21 @ inv_cols
    dense = blocks.a22.toarray()
    dense[:, :k] -= correction
    w = blocks.ops.grid.weights_flat
    dense[2 * k :] -= np.outer(
        np.ones(k) / w.sum(), w @ dense[2 * k :]
    )
    return dense
