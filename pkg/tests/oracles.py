"""Independent brute-force oracles used across the test suite.

Everything here deliberately avoids the closed-form code paths under test:
covariances come from direct numerical quadrature of the defining stationary
integral using matrix exponentials on the slot basis, and boundary-lift
integrals come from adaptive quadrature against explicitly constructed
solutions.  Slow is fine; independent is the point.
"""

from __future__ import annotations

import numpy as np
from scipy.integrate import quad_vec
from scipy.linalg import expm

from boundary_ews.spectral import SpectralModel


def jordan_matrix(model: SpectralModel) -> np.ndarray:
    """Upper-bidiagonal block matrix of the drift on the slot basis.

    Block i is lam_i * I + superdiagonal ones, i.e. column (i, k) maps to
    lam_i * (i, k) + (i, k-1).
    """
    n = model.n_slots
    A = np.zeros((n, n), dtype=complex)
    off = 0
    for lam, m in zip(model.eigenvalues, model.chain_lengths):
        for k in range(m):
            A[off + k, off + k] = lam
            if k > 0:
                A[off + k - 1, off + k] = 1.0
        off += m
    return A


def slot_permutation(model: SpectralModel) -> np.ndarray:
    """Matrix index of adjoint chain vector for each slot.

    With the drift in the upper-bidiagonal form above and the Euclidean
    pairing, the adjoint chain vector (i, k) is the standard basis vector at
    position (i, M_i - k + 1): the adjoint chains run backwards through each
    block.
    """
    sigma = np.empty(model.n_slots, dtype=int)
    off = 0
    for i, m in enumerate(model.chain_lengths):
        for k in range(1, m + 1):
            sigma[off + (k - 1)] = off + (m - k)
        off += m
    return sigma


def noise_matrix(model: SpectralModel) -> np.ndarray:
    """Lifted-noise covariance as a matrix on the slot basis.

    Reconstructed from the coupling matrix via the adjoint-vector pairing
    <u_r, P u_s> = conj(P[r, s]) with u_r the standard basis vector at the
    permuted position of the adjoint chain vector.
    """
    sigma = slot_permutation(model)
    n = model.n_slots
    P = np.zeros((n, n), dtype=complex)
    G = model.coupling
    for a in range(n):
        for b in range(n):
            P[sigma[a], sigma[b]] = np.conj(G[a, b])
    return P


def covariance_quadrature(
    model: SpectralModel, tau: float, tol: float = 1e-12
) -> np.ndarray:
    """Directly integrate the stationary lagged covariance matrix.

    Computes expm(A tau) @ integral_0^inf (A - q) expm(A s) P expm(A^H s)
    (A^H - q) ds by adaptive quadrature on a horizon long enough for the
    integrand to decay below machine precision.
    """
    A = jordan_matrix(model)
    P = noise_matrix(model)
    q = model.shift
    n = model.n_slots
    Aq = A - q * np.eye(n)
    alpha = max(z.real for z in model.eigenvalues)
    if alpha >= 0:
        raise ValueError("quadrature oracle needs strictly stable blocks")
    kmax = max(model.chain_lengths)
    # horizon: exp(2 alpha T) * T^(2 kmax) below 1e-18, iterated estimate
    T = 45.0 / (-2.0 * alpha)
    for _ in range(3):
        T = (45.0 + 2.0 * kmax * np.log1p(T)) / (-2.0 * alpha)

    def integrand(s: float) -> np.ndarray:
        Es = expm(A * s)
        M = Aq @ Es @ P @ Es.conj().T @ Aq.conj().T
        return M

    V, _ = quad_vec(integrand, 0.0, T, epsabs=tol, epsrel=tol)
    if tau != 0.0:
        V = expm(A * tau) @ V
    return V


def covariance_pairing_quadrature(
    model: SpectralModel, i: int, k1: int, j: int, k2: int, tau: float
) -> complex:
    """Oracle value of the lagged pairing for chain slots (i, k1), (j, k2)."""
    V = covariance_quadrature(model, tau)
    sigma = slot_permutation(model)
    a = sigma[model.slot(i, k1)]
    b = sigma[model.slot(j, k2)]
    # pairing is linear in the first adjoint vector, conjugated in the second
    return complex(np.conj(V[a, b]))


def covariance_pairing_matrix(model: SpectralModel, tau: float) -> np.ndarray:
    """All slot pairings at once (rows: first index, columns: second)."""
    V = covariance_quadrature(model, tau)
    sigma = slot_permutation(model)
    return np.conj(V[np.ix_(sigma, sigma)])
