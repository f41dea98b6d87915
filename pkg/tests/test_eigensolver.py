"""Tests for the weighted dense modal-analysis layer."""

from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.sparse import diags

from boundary_ews import eigensolver as es
from boundary_ews import heat1d


def dirichlet_laplacian(n: int, length: float = 1.0) -> np.ndarray:
    h = length / (n + 1)
    return diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n, n)).toarray() / h**2


def random_stable(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    rng = np.random.default_rng(seed)
    a = rng.standard_normal((n, n)) - (n / 2.0) * np.eye(n)
    w = rng.uniform(0.3, 3.0, n)
    return a, w


class TestDensify:
    def test_identity(self):
        op = es.DiscreteOperator(5, lambda v: v.copy())
        assert np.array_equal(es.densify(op), np.eye(5))

    def test_dirichlet_stencil_pattern(self):
        n, h = 8, 1.0 / 9
        mat = dirichlet_laplacian(n)
        op = es.DiscreteOperator(n, lambda v: mat @ v)
        dense = es.densify(op)
        assert dense[3, 3] == pytest.approx(-2.0 / h**2)
        assert dense[3, 4] == pytest.approx(1.0 / h**2)
        assert np.all(dense[np.abs(np.subtract.outer(range(n), range(n))) > 1] == 0)

    def test_cache_short_circuit(self):
        mat = np.arange(9.0).reshape(3, 3)
        op = es.operator_from_matrix(mat)
        out = es.densify(op)
        assert np.array_equal(out, mat)
        out[0, 0] = 99.0  # caller owns the copy
        assert op.matrix[0, 0] == 0.0

    def test_cap_enforced(self):
        op = es.DiscreteOperator(10, lambda v: v)
        with pytest.raises(ValueError, match="cap"):
            es.densify(op, cap=9)

    def test_linearity_probe(self):
        mat, _ = random_stable(6, 3)
        op = es.DiscreteOperator(6, lambda v: mat @ v)
        assert es.verify_linearity(op) < 1e-12
        affine = es.DiscreteOperator(6, lambda v: mat @ v + 1.0)
        assert es.verify_linearity(affine) > 1e-3


class TestEigDense:
    def test_known_diagonal_sorted(self):
        a = np.diag([-1.0, -2.0 + 1.0j, -2.0 - 1.0j])
        out = es.eig_dense(a, np.ones(3))
        assert out.eigenvalues[0] == pytest.approx(-1.0)
        # conjugate pair adjacent, minus-imaginary first
        assert out.eigenvalues[1] == pytest.approx(-2.0 - 1.0j)
        assert out.eigenvalues[2] == pytest.approx(-2.0 + 1.0j)

    def test_dirichlet_chain_spectrum(self):
        # second-difference matrix has eigenvalues 2(cos(k pi/(n+1)) - 1)/h^2
        n = 50
        h = 1.0 / (n + 1)
        out = es.eig_dense(dirichlet_laplacian(n), np.full(n, h))
        want = 2.0 * (np.cos(np.arange(1, n + 1) * np.pi / (n + 1)) - 1.0) / h**2
        got = np.sort(out.eigenvalues.real)
        assert np.abs(np.sort(want) - got).max() < 1e-8 * np.abs(want).max()
        assert np.abs(out.eigenvalues.imag).max() == 0.0

    def test_biorthonormal_pairing(self):
        a, w = random_stable(24, 11)
        out = es.eig_dense(a, w)
        gram = np.array(
            [
                [es.weighted_pairing(out.left[:, i], out.right[:, j], w) for j in range(24)]
                for i in range(24)
            ]
        )
        assert np.abs(gram - np.eye(24)).max() < 1e-8

    def test_right_and_left_residuals(self):
        a, w = random_stable(20, 5)
        out = es.eig_dense(a, w)
        assert out.residuals.max() < 1e-6
        adj = es.adjoint_matrix(a, w)
        for i in range(20):
            ell = out.left[:, i]
            r = adj @ ell - np.conj(out.eigenvalues[i]) * ell
            assert np.linalg.norm(r) / np.linalg.norm(ell) < 1e-6

    def test_adjoint_spectrum_conjugate(self):
        a, w = random_stable(18, 9)
        got = np.sort_complex(np.linalg.eigvals(es.adjoint_matrix(a, w)))
        want = np.sort_complex(np.conj(es.eig_dense(a, w).eigenvalues))
        assert np.abs(got - want).max() < 1e-8

    def test_deterministic_output(self):
        a, w = random_stable(15, 21)
        one, two = es.eig_dense(a, w), es.eig_dense(a, w)
        assert np.array_equal(one.eigenvalues, two.eigenvalues)
        assert np.array_equal(one.right, two.right)
        assert np.array_equal(one.left, two.left)

    def test_phase_convention(self):
        a, w = random_stable(12, 2)
        out = es.eig_dense(a, w)
        for i in range(12):
            v = out.right[:, i]
            peak = v[np.argmax(np.abs(v))]
            assert peak.imag == pytest.approx(0.0, abs=1e-12)
            assert peak.real > 0
            assert es.weighted_pairing(v, v, w).real == pytest.approx(1.0)

    def test_expansion_reconstructs_vectors(self):
        # coefficients against the left system reassemble any vector
        a, w = random_stable(10, 31)
        out = es.eig_dense(a, w)
        rng = np.random.default_rng(1)
        f = rng.standard_normal(10)
        coeff = np.array(
            [np.conj(es.weighted_pairing(out.left[:, i], f, w)) for i in range(10)]
        )
        assert np.abs(out.right @ coeff - f).max() < 1e-8

    def test_rejects_bad_weights(self):
        a, _ = random_stable(4, 0)
        with pytest.raises(ValueError):
            es.eig_dense(a, np.array([1.0, -1.0, 1.0, 1.0]))
        with pytest.raises(ValueError):
            es.eig_dense(a, np.ones(3))

    @settings(max_examples=25, deadline=None)
    @given(st.integers(min_value=2, max_value=9), st.integers(min_value=0, max_value=10**6))
    def test_sort_invariant_random(self, n, seed):
        a, w = random_stable(n, seed)
        lam = es.eig_dense(a, w).eigenvalues
        for i in range(n - 1):
            assert lam[i].real >= lam[i + 1].real - 1e-13
            if abs(lam[i].real - lam[i + 1].real) < 1e-13:
                assert lam[i].imag <= lam[i + 1].imag + 1e-13


class TestLeadingAndIsolation:
    def test_slice_and_full(self):
        a, w = random_stable(9, 40)
        out = es.eig_dense(a, w)
        top = es.leading_eigs(out, 4)
        assert np.array_equal(top.eigenvalues, out.eigenvalues[:4])
        assert np.array_equal(top.right, out.right[:, :4])
        full = es.leading_eigs(out, 9)
        assert np.array_equal(full.eigenvalues, out.eigenvalues)

    def test_all_real_descending(self):
        out = es.eig_dense(np.diag([-3.0, -1.0, -2.0]), np.ones(3))
        assert np.array_equal(out.eigenvalues.real, [-1.0, -2.0, -3.0])

    def test_m_out_of_range(self):
        out = es.eig_dense(np.diag([-1.0, -2.0]), np.ones(2))
        with pytest.raises(ValueError):
            es.leading_eigs(out, 3)
        with pytest.raises(ValueError):
            es.leading_eigs(out, 0)

    def test_isolation_margin(self):
        out = es.eig_dense(np.diag([-1.0, -1.5, -4.0]), np.ones(3))
        assert es.isolation_margin(out, 0) == pytest.approx(0.5)
        assert es.isolation_margin(out, 2) == pytest.approx(2.5)


class TestTracking:
    @staticmethod
    def sweep_sets(p_values, builder):
        return [es.eig_dense(builder(p), np.ones(builder(p).shape[0])) for p in p_values]

    def test_single_point_passthrough(self):
        sets = self.sweep_sets([0.0], lambda p: np.diag([-1.0, -2.0]))
        tr = es.track_branch_eigs([0.0], sets, 2)
        assert np.array_equal(tr.eigenvalues[0], np.array([-1.0, -2.0], dtype=complex))
        assert not tr.ambiguous.any()

    def test_labels_follow_real_part_crossing(self):
        # real parts trade places mid-sweep while the modes stay apart in the
        # complex plane: descending-Re sorting would swap rows, matching must not
        ps = np.linspace(0.0, 1.0, 20)
        builder = lambda p: np.diag([-2.0 + 1.6 * p + 2.0j, -1.2 - 1.6 * p + 0.0j])
        tr = es.track_branch_eigs(ps, self.sweep_sets(ps, builder), 2)
        by_start = tr.eigenvalues if tr.eigenvalues[0, 0].imag > 1 else tr.eigenvalues[:, ::-1]
        assert np.allclose(by_start[:, 0], -2.0 + 1.6 * ps + 2.0j)
        assert np.allclose(by_start[:, 1], -1.2 - 1.6 * ps)

    def test_ambiguity_flagged(self):
        ps = [0.0, 1.0]
        mats = [np.diag([-1.0, -2.0]), np.diag([-1.5, -1.5 - 5e-11])]
        sets = [es.eig_dense(m, np.ones(2)) for m in mats]
        tr = es.track_branch_eigs(ps, sets, 2)
        assert not tr.ambiguous[0]
        assert tr.ambiguous[1]

    def test_gap_series(self):
        ps = [0.0, 0.5]
        sets = self.sweep_sets(ps, lambda p: np.diag([-1.0 + p, -3.0]))
        tr = es.track_branch_eigs(ps, sets, 2)
        assert np.allclose(tr.gap(0, 1), np.array([2.0, 2.5]))

    def test_length_mismatch(self):
        sets = self.sweep_sets([0.0], lambda p: np.diag([-1.0, -2.0]))
        with pytest.raises(ValueError):
            es.track_branch_eigs([0.0, 1.0], sets, 2)


class TestNoiseCoupling:
    def test_zero_map_silences_everything(self):
        a, w = random_stable(8, 50)
        out = es.leading_eigs(es.eig_dense(a, w), 3)
        assert np.abs(es.coupling_from_noise(out, np.zeros(8))).max() == 0.0

    def test_gram_structure(self):
        a, w = random_stable(14, 51)
        out = es.leading_eigs(es.eig_dense(a, w), 5)
        chans = np.random.default_rng(4).standard_normal((14, 3))
        G = es.coupling_from_noise(out, chans)
        assert np.abs(G - G.conj().T).max() < 1e-12 * np.abs(G).max()
        assert np.all(G.diagonal().real >= 0)
        assert np.linalg.eigvalsh(G).min() > -1e-10 * np.abs(G).max()

    def test_single_channel_rank_one(self):
        a, w = random_stable(10, 52)
        out = es.leading_eigs(es.eig_dense(a, w), 4)
        G = es.coupling_from_noise(out, np.ones(10))
        s = np.linalg.svd(G, compute_uv=False)
        assert s[1] < 1e-12 * s[0]

    def test_dimension_mismatch(self):
        a, w = random_stable(6, 53)
        out = es.eig_dense(a, w)
        with pytest.raises(ValueError):
            es.coupling_from_noise(out, np.ones(7))


def discrete_neumann_heat(n: int, cfg: heat1d.HeatModelConfig):
    """Vertex-centered discretization of the flux-driven diffusion.

    Returns (drift matrix with homogeneous flux rows, trapezoid weights,
    lifted channel vectors for a unit flux datum at each end).
    """
    h = cfg.L / n
    lap = diags([1.0, -2.0, 1.0], [-1, 0, 1], shape=(n + 1, n + 1)).toarray() / h**2
    lap[0, 1] = 2.0 / h**2
    lap[-1, -2] = 2.0 / h**2
    w = np.full(n + 1, h)
    w[0] = w[-1] = h / 2
    lift = np.empty((n + 1, 2))
    shifted = lap - cfg.c * np.eye(n + 1)
    rhs0 = np.zeros(n + 1)
    rhs0[0] = 2.0 / h
    rhsL = np.zeros(n + 1)
    rhsL[-1] = -2.0 / h
    lift[:, 0] = np.linalg.solve(shifted, rhs0)
    lift[:, 1] = np.linalg.solve(shifted, rhsL)
    return lap + cfg.p * np.eye(n + 1), w, lift


class TestHeatCrossCheck:
    """The exactly solvable 1-D problem as an oracle for the discrete chain."""

    CFG = heat1d.HeatModelConfig(p=-0.3, bc="neumann", L=1.0, c=0.7, K=4)

    def lift_error(self, n):
        _, _, lift = discrete_neumann_heat(n, self.CFG)
        x = np.linspace(0.0, self.CFG.L, n + 1)
        err = 0.0
        for b, datum in enumerate([(1.0, 0.0), (0.0, 1.0)]):
            err = max(err, np.abs(lift[:, b] - heat1d.dirichlet_map(self.CFG, datum, x)).max())
        return err

    def coupling_error(self, n):
        drift, w, lift = discrete_neumann_heat(n, self.CFG)
        out = es.leading_eigs(es.eig_dense(drift, w), self.CFG.K)
        got = np.array(
            [
                [es.weighted_pairing(out.left[:, k], lift[:, b], w).real for b in range(2)]
                for k in range(self.CFG.K)
            ]
        )
        return np.abs(got - heat1d.mode_noise_coeffs(self.CFG)).max()

    def test_lift_matches_closed_form(self):
        assert self.lift_error(64) < 5e-4

    def test_coupling_converges_to_closed_form(self):
        coarse, fine = self.coupling_error(24), self.coupling_error(48)
        assert fine < coarse / 2  # at least first order, expect second
        assert fine < 5e-4

    def test_discrete_spectrum_near_modes(self):
        drift, w, _ = discrete_neumann_heat(60, self.CFG)
        out = es.leading_eigs(es.eig_dense(drift, w), 4)
        want = self.CFG.p - heat1d.hat_lambda(self.CFG, np.arange(4))
        # second-order stencil: relative eigenvalue error grows like (k h)^2
        assert np.abs((out.eigenvalues.real - want) / want).max() < 3e-3
        # slowest discrete mode is the constant: flux rows annihilate it
        assert out.eigenvalues[0] == pytest.approx(self.CFG.p, abs=1e-9)
        v0 = out.right[:, 0]
        assert np.abs(v0 - v0[0]).max() < 1e-8
