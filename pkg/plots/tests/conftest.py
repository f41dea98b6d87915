"""Synthesized CSVs in each schema the experiment runners emit."""

import numpy as np
import pandas as pd
import pytest


@pytest.fixture()
def gap_csv(tmp_path):
    p = np.linspace(0.04, 0.068, 8)
    df = pd.DataFrame(
        {
            "p": p,
            "re_lambda1": np.full_like(p, 1e-13),
            "im_lambda1": np.zeros_like(p),
            "re_lambda2": -0.05 + 0.8 * (p - 0.04),
            "im_lambda2": np.zeros_like(p),
            "re_lambda3": -0.3 - 0.1 * p,
            "im_lambda3": np.full_like(p, 0.2),
            "re_lambda4": -0.3 - 0.1 * p,
            "im_lambda4": np.full_like(p, -0.2),
        }
    )
    path = tmp_path / "eigs.csv"
    df.to_csv(path, index=False)
    return path


@pytest.fixture()
def branch_csv(tmp_path):
    rows = []
    # an arc that folds back: stable up, unstable returning
    for i, p in enumerate(np.r_[np.linspace(0.3, 1.05, 8),
                                np.linspace(1.0, 0.6, 5)]):
        rows.append(("southward", p, 2.0 + 0.1 * i, 0 if i < 8 else 1))
    for p in np.linspace(0.3, 1.2, 6):
        rows.append(("connected", p, 1.0 + p, 0))
    df = pd.DataFrame(rows, columns=["branch", "p", "max_psi", "num_unstable"])
    path = tmp_path / "branch.csv"
    df.to_csv(path, index=False)
    return path


@pytest.fixture()
def variance_csv(tmp_path):
    rng = np.random.default_rng(7)
    rows = []
    for lam in (-0.4, -0.2, -0.1, -0.05, -0.025):
        rate = -1.0 / lam
        for obs, offset in (("omega_box", 0.0), ("temp_box", -0.7)):
            for seed in range(3):
                var = 10.0 ** (offset + np.log10(rate) + rng.normal(0, 0.05))
                rows.append(
                    (0.05 - lam, seed, obs, var, lam, np.log10(rate),
                     offset + np.log10(rate))
                )
    df = pd.DataFrame(
        rows,
        columns=["p", "seed", "observable", "variance", "re_lambda2",
                 "log10_rate", "theory_log10_variance"],
    )
    path = tmp_path / "variance.csv"
    df.to_csv(path, index=False)
    return path


@pytest.fixture()
def heat_csv(tmp_path):
    rng = np.random.default_rng(3)
    rows = []
    for p in (-0.4, -0.2, -0.1, -0.05):
        exact = 1.0 / (-2.0 * p)
        for seed in range(5):
            rows.append((p, seed, exact * rng.lognormal(0, 0.08), exact))
    df = pd.DataFrame(rows, columns=["p", "seed", "variance_mc",
                                     "variance_exact"])
    path = tmp_path / "heat.csv"
    df.to_csv(path, index=False)
    return path


@pytest.fixture()
def autocorr_csv(tmp_path):
    rng = np.random.default_rng(11)
    taus = np.arange(0.0, 10.01, 0.5)
    rows = []
    for p, lam in ((0.4, -4.1), (1.0, -0.29)):
        for seed in range(2):
            theory = np.exp(lam * taus)
            est = np.clip(theory + rng.normal(0, 0.02, taus.size), 0, None)
            for t, e, th in zip(taus, est, theory):
                rows.append((p, seed, t, e, 0.0, e, th))
    df = pd.DataFrame(
        rows,
        columns=["p", "seed", "tau", "autocorr_re", "autocorr_im",
                 "autocorr_abs", "theory_abs"],
    )
    path = tmp_path / "autocorr.csv"
    df.to_csv(path, index=False)
    return path
