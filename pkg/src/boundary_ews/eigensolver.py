"""Dense modal analysis of discretized drift operators.

Everything here works relative to a *weighted* discrete pairing

    <a, b>_W = sum_i w_i a_i conj(b_i),

linear in the first argument, where ``w`` holds quadrature cell areas of the
(possibly non-uniform) grid.  On a stretched mesh the plain Euclidean
transpose converges to the wrong adjoint; reweighting the left eigenvectors
by ``1/w`` makes the discrete left/right system biorthogonal under the same
pairing that approximates the continuous one.

The solver path is dense-only by design: the operators of interest stay
below a few thousand rows, and a dense decomposition with explicit left
vectors is both simpler and easier to validate than an iterative scheme.
Defective (Jordan) structure is never extracted numerically -- discretized
problems generically have simple spectra, and isolation can be checked with
:func:`isolation_margin`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from scipy import linalg
from scipy.optimize import linear_sum_assignment

__all__ = [
    "DENSIFY_CAP",
    "DiscreteOperator",
    "EigenSet",
    "TrackedEigs",
    "operator_from_matrix",
    "verify_linearity",
    "densify",
    "weighted_pairing",
    "adjoint_matrix",
    "eig_dense",
    "leading_eigs",
    "isolation_margin",
    "track_branch_eigs",
    "coupling_from_noise",
]

DENSIFY_CAP = 6000


@dataclass(frozen=True)
class DiscreteOperator:
    """A linear map given by its action, with an optional dense cache."""

    dimension: int
    apply: Callable[[np.ndarray], np.ndarray]
    matrix: np.ndarray | None = None

    def __post_init__(self):
        if self.dimension <= 0:
            raise ValueError("dimension must be positive")
        if self.matrix is not None and self.matrix.shape != (
            self.dimension,
            self.dimension,
        ):
            raise ValueError("cached matrix shape disagrees with dimension")


def operator_from_matrix(matrix) -> DiscreteOperator:
    mat = np.asarray(matrix)
    if mat.ndim != 2 or mat.shape[0] != mat.shape[1]:
        raise ValueError("expected a square matrix")
    return DiscreteOperator(mat.shape[0], lambda v: mat @ v, matrix=mat)


def verify_linearity(op: DiscreteOperator, rng=None, trials: int = 3) -> float:
    """Largest deviation of apply(a v + b w) from a apply(v) + b apply(w).

    A stochastic sanity check for operator wrappers (closures over solver
    state are easy to get subtly wrong); callers assert against their own
    tolerance, typically 1e-10 relative.
    """
    rng = np.random.default_rng(0) if rng is None else rng
    worst = 0.0
    for _ in range(trials):
        v = rng.standard_normal(op.dimension)
        u = rng.standard_normal(op.dimension)
        a, b = rng.standard_normal(2)
        lhs = op.apply(a * v + b * u)
        rhs = a * op.apply(v) + b * op.apply(u)
        scale = max(float(np.abs(lhs).max()), 1.0)
        worst = max(worst, float(np.abs(lhs - rhs).max()) / scale)
    return worst


def densify(op: DiscreteOperator, cap: int = DENSIFY_CAP) -> np.ndarray:
    """Materialize the matrix, column by column if no cache is present."""
    if op.dimension > cap:
        raise ValueError(f"dimension {op.dimension} exceeds densify cap {cap}")
    if op.matrix is not None:
        return np.array(op.matrix)
    unit = np.zeros(op.dimension)
    unit[0] = 1.0
    first = np.asarray(op.apply(unit))
    out = np.empty((op.dimension, op.dimension), dtype=first.dtype)
    out[:, 0] = first
    unit[0] = 0.0
    for j in range(1, op.dimension):
        unit[j] = 1.0
        out[:, j] = op.apply(unit)
        unit[j] = 0.0
    return out


def weighted_pairing(a, b, weights) -> complex:
    """<a, b>_W, linear in ``a`` and conjugate-linear in ``b``."""
    return complex(np.sum(np.asarray(weights) * np.asarray(a) * np.conj(b)))


def adjoint_matrix(matrix, weights) -> np.ndarray:
    """W-adjoint W^{-1} A^H W; its spectrum is the conjugate of A's."""
    w = np.asarray(weights, dtype=float)
    a = np.asarray(matrix)
    return (a.conj().T * w[None, :]) / w[:, None]


@dataclass(frozen=True)
class EigenSet:
    """Spectrum with paired right/left vectors, biorthonormal under W.

    Eigenvalues are sorted by descending real part, ties by ascending
    imaginary part (so conjugate pairs sit adjacent, minus-first).  Right
    vectors have unit W-norm and their largest-magnitude entry is real
    positive; left vectors are scaled so <l_i, v_i>_W = 1.
    """

    eigenvalues: np.ndarray
    right: np.ndarray
    left: np.ndarray
    weights: np.ndarray
    residuals: np.ndarray

    @property
    def dimension(self) -> int:
        return self.right.shape[0]


def eig_dense(matrix, weights) -> EigenSet:
    """Full nonsymmetric decomposition with W-adjoint left vectors.

    The backend (LAPACK via scipy: Hessenberg reduction + shifted QR) is a
    swappable detail; the contract is the output normalization described on
    :class:`EigenSet`.
    """
    a = np.asarray(matrix)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("expected a square matrix")
    w = np.asarray(weights, dtype=float)
    if w.shape != (a.shape[0],) or np.any(w <= 0):
        raise ValueError("weights must be a positive vector matching the matrix")

    vals, vl, vr = linalg.eig(a, left=True, right=True)
    order = np.lexsort((vals.imag, -vals.real))
    vals = vals[order]
    # scipy hands back float vector arrays when the whole spectrum is real
    vl = vl[:, order].astype(complex, copy=True)
    vr = vr[:, order].astype(complex, copy=True)

    n = a.shape[0]
    residuals = np.empty(n)
    for i in range(n):
        v = vr[:, i]
        v = v / np.sqrt(weighted_pairing(v, v, w).real)
        peak = int(np.argmax(np.abs(v)))
        v = v * (np.abs(v[peak]) / v[peak])
        vr[:, i] = v
        residuals[i] = float(
            np.linalg.norm(a @ v - vals[i] * v) / np.linalg.norm(v)
        )
        ell = vl[:, i] / w
        vl[:, i] = ell / weighted_pairing(ell, v, w)
    return EigenSet(eigenvalues=vals, right=vr, left=vl, weights=w, residuals=residuals)


def leading_eigs(eigs: EigenSet, m: int) -> EigenSet:
    """Slice of the ``m`` largest-real-part modes (order already canonical)."""
    if not 0 < m <= eigs.eigenvalues.size:
        raise ValueError("m out of range")
    return EigenSet(
        eigenvalues=eigs.eigenvalues[:m].copy(),
        right=eigs.right[:, :m].copy(),
        left=eigs.left[:, :m].copy(),
        weights=eigs.weights,
        residuals=eigs.residuals[:m].copy(),
    )


def isolation_margin(eigs: EigenSet, i: int) -> float:
    """Distance from eigenvalue i to the rest of the spectrum.

    Used to assert that a mode is numerically simple before trusting its
    single right/left pair (a margin below ~1e-6 means the biorthogonal
    normalization may mix a near-degenerate cluster).
    """
    lam = eigs.eigenvalues
    others = np.abs(lam - lam[i])
    others[i] = np.inf
    return float(others.min())


@dataclass(frozen=True)
class TrackedEigs:
    """Leading eigenvalues followed continuously along a parameter sweep."""

    p_values: np.ndarray
    eigenvalues: np.ndarray  # (num p, m), row order = consistent mode labels
    ambiguous: np.ndarray  # per-p flag: candidates too close to match reliably

    def gap(self, i: int, j: int) -> np.ndarray:
        """Per-p difference lambda_i - lambda_j of the tracked labels."""
        return self.eigenvalues[:, i] - self.eigenvalues[:, j]


def track_branch_eigs(
    p_values: Sequence[float], eigen_sets: Sequence[EigenSet], m: int
) -> TrackedEigs:
    """Match the leading ``m`` modes between consecutive sweep points.

    Nearest-neighbour assignment in the complex plane keeps labels stable
    through crossings and complex-pair collisions.  When two candidates at
    some p sit within 1e-10 of each other the assignment there is arbitrary;
    the point is flagged rather than rejected.
    """
    ps = np.asarray(list(p_values), dtype=float)
    sets = list(eigen_sets)
    if len(sets) == 0 or len(sets) != ps.size:
        raise ValueError("need one eigen set per parameter value")
    tracked = np.empty((ps.size, m), dtype=complex)
    flags = np.zeros(ps.size, dtype=bool)
    tracked[0] = leading_eigs(sets[0], m).eigenvalues
    for idx in range(1, ps.size):
        cand = leading_eigs(sets[idx], m).eigenvalues
        pair_dist = np.abs(cand[:, None] - cand[None, :])
        np.fill_diagonal(pair_dist, np.inf)
        flags[idx] = bool(pair_dist.min() < 1e-10)
        cost = np.abs(tracked[idx - 1][:, None] - cand[None, :])
        rows, cols = linear_sum_assignment(cost)
        tracked[idx, rows] = cand[cols]
    return TrackedEigs(p_values=ps, eigenvalues=tracked, ambiguous=flags)


def coupling_from_noise(eigs: EigenSet, noise_maps) -> np.ndarray:
    """Gram matrix of the modal noise couplings.

    ``noise_maps`` holds one lifted boundary datum per channel (a vector of
    the operator's dimension, or a (dimension, channels) array).  Entry
    C_{ib} = <l_i, map_b>_W measures how strongly channel b excites mode i;
    the returned G = C C^H feeds the stationary-covariance formulas, and a
    vanishing row marks a silenced mode.
    """
    maps = np.asarray(noise_maps)
    if maps.ndim == 1:
        maps = maps[:, None]
    if maps.shape[0] != eigs.dimension:
        raise ValueError("noise map length disagrees with operator dimension")
    w = eigs.weights
    coeff = np.empty((eigs.eigenvalues.size, maps.shape[1]), dtype=complex)
    for b in range(maps.shape[1]):
        coeff[:, b] = (eigs.left * (w * np.conj(maps[:, b]))[:, None]).sum(axis=0)
    return coeff @ coeff.conj().T
