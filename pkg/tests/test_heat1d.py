"""Tests for the boundary-driven 1-D diffusion module."""

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.integrate import quad

import oracles
from boundary_ews import heat1d as h
from boundary_ews.spectral import fit_scaling_exponent


def neumann(p=-0.5, **kw):
    return h.HeatModelConfig(p=p, bc="neumann", **kw)


def dirichlet(p=None, L=1.0, **kw):
    if p is None:
        p = 0.5 * (math.pi / L) ** 2
    return h.HeatModelConfig(p=p, bc="dirichlet", L=L, **kw)


class TestConfig:
    def test_p_above_threshold_rejected(self):
        with pytest.raises(ValueError):
            h.HeatModelConfig(p=0.0, bc="neumann")
        with pytest.raises(ValueError):
            h.HeatModelConfig(p=math.pi**2, bc="dirichlet")

    def test_dirichlet_alpha_range(self):
        dirichlet(alpha=-0.6)
        with pytest.raises(ValueError):
            dirichlet(alpha=-0.4)

    def test_degenerate_shift_rejected(self):
        with pytest.raises(ValueError):
            h.HeatModelConfig(p=-1.0, c=0.0)


class TestBoundaryLift:
    def test_zero_datum_gives_zero(self):
        cfg = dirichlet()
        x = np.linspace(0, 1, 11)
        assert np.all(h.dirichlet_map(cfg, (0.0, 0.0), x) == 0.0)

    def test_dirichlet_closed_form(self):
        # value datum (1, 0) with c = 1 on [0, 1]: w = sinh(1-x)/sinh(1)
        cfg = dirichlet()
        x = np.linspace(0.0, 1.0, 1001)
        w = h.dirichlet_map(cfg, (1.0, 0.0), x)
        want = np.sinh(1.0 - x) / np.sinh(1.0)
        assert np.abs(w - want).max() < 1e-12

    def test_ode_residual_small_on_fine_grid(self):
        cfg = neumann(c=2.5)
        hgrid = 1e-3
        x = np.arange(0.0, 1.0 + hgrid / 2, hgrid)
        w = h.dirichlet_map(cfg, (0.7, -0.3), x)
        wxx = (w[2:] - 2 * w[1:-1] + w[:-2]) / hgrid**2
        # central-difference truncation is h^2 c^2 |w| / 12 ~ 3e-7 here
        assert np.abs(wxx - cfg.c * w[1:-1]).max() < 1e-6

    def test_neumann_datum_recovered_by_finite_differences(self):
        cfg = neumann()
        eps = 1e-6
        d0 = (h.dirichlet_map(cfg, (1, 0), eps) - h.dirichlet_map(cfg, (1, 0), 0.0)) / eps
        dL = (h.dirichlet_map(cfg, (1, 0), 1.0) - h.dirichlet_map(cfg, (1, 0), 1 - eps)) / eps
        assert d0 == pytest.approx(1.0, abs=1e-5)
        assert dL == pytest.approx(0.0, abs=1e-5)


class TestModeCoeffs:
    @pytest.mark.parametrize("make", [neumann, dirichlet])
    def test_matches_quadrature_oracle(self, make):
        cfg = make(K=6)
        d = h.mode_noise_coeffs(cfg)
        for row, k in enumerate(h.mode_numbers(cfg)):
            for b, datum in enumerate([(1.0, 0.0), (0.0, 1.0)]):
                want, err = quad(
                    lambda x: h.dirichlet_map(cfg, datum, x)
                    * h.eigenfunction(cfg, int(k), x),
                    0.0,
                    cfg.L,
                    epsabs=1e-13,
                    limit=200,
                )
                assert err < 1e-8
                assert d[row, b] == pytest.approx(want, abs=1e-10)

    def test_slowest_neumann_mode_is_coupled(self):
        # the warning sign lives on the constant mode only if this is nonzero
        d = h.mode_noise_coeffs(neumann())
        assert abs(d[0, 0]) > 0.1 and abs(d[0, 1]) > 0.1

    def test_symmetric_lift_decouples_antisymmetric_modes(self):
        # a mirror-symmetric lift has zero overlap with antisymmetric modes:
        # value datum (1,1), or flux datum (1,-1)
        dd = h.mode_noise_coeffs(dirichlet(K=8))
        sym = dd[:, 0] + dd[:, 1]
        for row, k in enumerate(h.mode_numbers(dirichlet(K=8))):
            if k % 2 == 0:
                assert sym[row] == pytest.approx(0.0, abs=1e-14)
        dn = h.mode_noise_coeffs(neumann(K=8))
        sym = dn[:, 0] - dn[:, 1]
        for k in range(8):
            if k % 2 == 1:
                assert sym[k] == pytest.approx(0.0, abs=1e-14)

    def test_rows_decay(self):
        d = np.abs(h.mode_noise_coeffs(neumann(K=16))).sum(axis=1)
        assert d[-1] < d[1] / 10


class TestStationaryCov:
    def test_slowest_entry_closed_form(self):
        cfg = neumann(p=-0.25)
        d = h.mode_noise_coeffs(cfg)
        g00 = d[0, 0] ** 2 + d[0, 1] ** 2
        for tau in (0.0, 2.0):
            want = cfg.c**2 * g00 / (-2 * cfg.p) * math.exp(cfg.p * tau)
            assert h.stationary_cov_entry(cfg, 0, 0, tau) == pytest.approx(want)

    def test_inverse_gap_scaling(self):
        # doubling the distance to the transition halves the variance
        v1 = h.stationary_cov_entry(neumann(p=-0.1), 0, 0, 0.0)
        v2 = h.stationary_cov_entry(neumann(p=-0.2), 0, 0, 0.0)
        assert (v1 / v2).real == pytest.approx(2.0, rel=1e-3)

    def test_parity_zero_for_mixed_indices(self):
        assert h.stationary_cov_entry(neumann(), 0, 1, 0.0) == pytest.approx(0.0, abs=1e-15)

    def test_matches_defining_integral(self):
        cfg = neumann(p=-0.35, K=4)
        model = h.spectral_model(cfg)
        want = oracles.covariance_pairing_matrix(model, 0.0)
        got = np.array(
            [[h.stationary_cov_entry(cfg, k, l, 0.0) for l in range(4)] for k in range(4)]
        )
        np.testing.assert_allclose(got, want, rtol=1e-9, atol=1e-12)

    def test_closed_form_neumann_slope(self):
        ps = np.array([-0.4, -0.2, -0.1, -0.05, -0.025])
        vals = [h.stationary_cov_entry(neumann(p=p), 0, 0, 0.0).real for p in ps]
        fit = fit_scaling_exponent(-ps, vals)
        assert abs(fit.exponent + 1.0) < 1e-6


class TestWeightedCov:
    def test_alpha_zero_reduces_to_unweighted(self):
        cfg = dirichlet(alpha=-0.6)
        undamped = h.stationary_cov_entry(cfg, 1, 2, 0.5)
        assert h.weighted_cov_entry(cfg, 1, 2, 0.5, alpha=0.0) == pytest.approx(undamped)

    def test_scaling_exponent_minus_one_plus_alpha(self):
        lam1 = math.pi**2
        alpha = -0.6
        gaps = np.array([0.3, 0.1, 0.03, 0.01, 0.003])
        vals = [
            abs(h.weighted_cov_entry(dirichlet(p=lam1 - g, alpha=alpha), 1, 1, 0.0))
            for g in gaps
        ]
        fit = fit_scaling_exponent(gaps, vals)
        assert abs(fit.exponent - (-1 + alpha)) < 0.05

    def test_requires_dirichlet(self):
        with pytest.raises(ValueError):
            h.weighted_cov_entry(neumann(), 0, 0, 0.0, alpha=-0.6)


class TestWellposedness:
    def test_neumann_truncation_converges(self):
        cfg = neumann(p=-0.3, K=64)
        v16 = h.wellposedness_integral(cfg, 16)
        v32 = h.wellposedness_integral(cfg, 32)
        v64 = h.wellposedness_integral(cfg, 64)
        assert abs(v64 - v32) / v64 < 0.01
        assert abs(v64 - v16) / v64 < 0.01

    def test_dirichlet_diverges(self):
        cfg = dirichlet(K=64)
        assert h.wellposedness_integral(cfg, 64) > 2 * h.wellposedness_integral(cfg, 16)

    def test_single_mode_is_that_variance(self):
        cfg = neumann(p=-0.7, K=8)
        want = h.stationary_cov_entry(cfg, 0, 0, 0.0).real
        assert h.wellposedness_integral(cfg, 1) == pytest.approx(want)


class TestSimulation:
    def test_zero_gains_stay_at_zero(self):
        cfg = neumann(noise_gains=(0.0, 0.0), K=4)
        traj = h.simulate_modes(cfg, t_end=1.0, dt=0.01, seed=0)
        assert np.all(traj.coeffs == 0.0)

    def test_deterministic_per_seed(self):
        cfg = neumann(K=4)
        a = h.simulate_modes(cfg, t_end=5.0, dt=0.01, seed=9)
        b = h.simulate_modes(cfg, t_end=5.0, dt=0.01, seed=9)
        c = h.simulate_modes(cfg, t_end=5.0, dt=0.01, seed=10)
        assert np.array_equal(a.coeffs, b.coeffs)
        assert not np.array_equal(a.coeffs, c.coeffs)

    def test_single_mode_temporal_variance(self):
        # correlation time 1/(2|p|) = 0.25, so 5% is ~3 standard errors
        # for the seed-averaged variance over this window
        cfg = neumann(p=-2.0, K=1)
        want = h.stationary_cov_entry(cfg, 0, 0, 0.0).real
        got = []
        for seed in (3, 4, 5):
            traj = h.simulate_modes(cfg, t_end=1000.0, dt=0.01, seed=seed)
            got.append(traj.coeffs[0, 10_000:].var())
        assert abs(np.mean(got) - want) / want < 0.05

    def test_cross_covariances_match_closed_form(self):
        # shared boundary drivers induce specific cross-mode covariances
        cfg = neumann(p=-0.4, K=3)
        want = np.array(
            [[h.stationary_cov_entry(cfg, k, l, 0.0).real for l in range(3)] for k in range(3)]
        )
        samples = []
        for seed in range(24):
            traj = h.simulate_modes(cfg, t_end=200.0, dt=0.02, seed=seed)
            u = traj.coeffs[:, 2000:]
            samples.append(np.cov(u))
        emp = np.array(samples)
        mean = emp.mean(axis=0)
        se = emp.std(axis=0, ddof=1) / math.sqrt(len(samples))
        assert np.all(np.abs(mean - want) <= 3 * se + 1e-12)

    def test_exact_step_has_no_dt_bias(self):
        # the same stationary variance must emerge at coarse and fine dt
        cfg = neumann(p=-0.5, K=1)
        out = {}
        for dt in (0.25, 0.01):
            acc = []
            for seed in range(8):
                traj = h.simulate_modes(cfg, t_end=400.0, dt=dt, seed=seed)
                n0 = int(40 / dt)
                acc.append(traj.coeffs[0, n0:].var())
            out[dt] = np.mean(acc)
        want = h.stationary_cov_entry(cfg, 0, 0, 0.0).real
        assert abs(out[0.25] - want) / want < 0.1
        assert abs(out[0.01] - want) / want < 0.1
