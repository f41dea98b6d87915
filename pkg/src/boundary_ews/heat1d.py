r"""One-dimensional diffusion on [0, L] driven by white noise at the endpoints.

The drift is the Laplacian plus a constant ``p`` with either flux (Neumann)
or value (Dirichlet) data at the two boundary points.  Everything is exactly
diagonalizable, which makes this module the fully checkable anchor for the
spectral pairing formulas:

* Neumann modes  phi_0 = 1/sqrt(L), phi_k = sqrt(2/L) cos(k pi x / L), k >= 1
* Dirichlet modes phi_k = sqrt(2/L) sin(k pi x / L), k >= 1

with Laplacian eigenvalues -hat_lambda_k, hat_lambda_k = (k pi / L)^2, so
the drift spectrum is p - hat_lambda_k.  The boundary datum is lifted into
the domain by solving w'' = c w with the datum as boundary data (shift
q = p + c, c > 0); the mode/boundary coupling coefficients then follow in
closed form from the Green identity

    (c + hat_lambda_k) <w, phi_k> = [w' phi_k - w phi_k']_0^L ,

which reduces to boundary evaluations of the eigenfunctions — no
antiderivatives of cosh-against-cos products needed.

The Neumann problem has its transition at p = 0 (the constant mode slows
down); the Dirichlet problem at p = (pi/L)^2, but there the boundary
coupling decays so slowly that the defining covariance integral diverges —
the well-posedness check below makes that quantitative — and observables
must be damped by a negative fractional power of the drift before the
pairing formulas apply.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.signal import lfilter

from .spectral import SpectralModel, autocov_pair

__all__ = [
    "HeatModelConfig",
    "ModeTrajectory",
    "threshold",
    "mode_numbers",
    "hat_lambda",
    "eigenfunction",
    "dirichlet_map_coeffs",
    "dirichlet_map",
    "mode_noise_coeffs",
    "spectral_model",
    "stationary_cov_entry",
    "weighted_cov_entry",
    "wellposedness_integral",
    "simulate_modes",
]


@dataclass(frozen=True)
class HeatModelConfig:
    """Model parameters for the boundary-driven 1-D diffusion.

    ``alpha`` is the observable-damping exponent and is only meaningful for
    the Dirichlet problem, where it must be < -1/2.
    """

    p: float
    bc: str = "neumann"
    L: float = 1.0
    c: float = 1.0
    alpha: float | None = None
    K: int = 32
    noise_gains: tuple[float, float] = (1.0, 1.0)

    def __post_init__(self) -> None:
        if self.bc not in ("neumann", "dirichlet"):
            raise ValueError("bc must be 'neumann' or 'dirichlet'")
        if self.L <= 0:
            raise ValueError("domain length must be positive")
        if self.c <= 0:
            raise ValueError("lift shift offset c must be positive")
        if self.K < 1:
            raise ValueError("need at least one mode")
        if self.p >= threshold(self):
            raise ValueError(
                f"p = {self.p} must lie below the transition value {threshold(self)}"
            )
        if self.bc == "dirichlet" and self.alpha is not None and self.alpha >= -0.5:
            raise ValueError("damping exponent alpha must be < -1/2")


@dataclass(frozen=True)
class ModeTrajectory:
    """Mode coefficients of a simulated trajectory, one row per mode."""

    times: np.ndarray
    coeffs: np.ndarray
    seed: int
    dt: float

    def __post_init__(self) -> None:
        t = np.asarray(self.times, dtype=float)
        u = np.asarray(self.coeffs)
        if u.ndim != 2 or u.shape[1] != t.size:
            raise ValueError("coeffs must be K x len(times)")
        steps = np.diff(t)
        if t.size > 1 and not np.allclose(steps, self.dt, rtol=1e-9, atol=0):
            raise ValueError("times must be uniform with step dt")
        if not np.isfinite(u).all():
            raise ValueError("trajectory contains non-finite values")


def threshold(cfg: HeatModelConfig) -> float:
    """Parameter value at which the slowest mode becomes neutral."""
    if cfg.bc == "neumann":
        return 0.0
    return (math.pi / cfg.L) ** 2


def mode_numbers(cfg: HeatModelConfig) -> np.ndarray:
    """Physical mode indices, slowest first (0-based Neumann, 1-based Dirichlet)."""
    if cfg.bc == "neumann":
        return np.arange(cfg.K)
    return np.arange(1, cfg.K + 1)


def hat_lambda(cfg: HeatModelConfig, k) -> np.ndarray | float:
    """Laplacian eigenvalue magnitude (k pi / L)**2 for physical index k."""
    return (np.asarray(k) * math.pi / cfg.L) ** 2


def eigenfunction(cfg: HeatModelConfig, k: int, x):
    """L2-normalized eigenfunction of physical index k evaluated at x."""
    x = np.asarray(x, dtype=float)
    if cfg.bc == "neumann":
        if k == 0:
            return np.full_like(x, 1.0 / math.sqrt(cfg.L))
        return math.sqrt(2.0 / cfg.L) * np.cos(k * math.pi * x / cfg.L)
    return math.sqrt(2.0 / cfg.L) * np.sin(k * math.pi * x / cfg.L)


def dirichlet_map_coeffs(cfg: HeatModelConfig, v: tuple[float, float]) -> tuple[float, float]:
    """Coefficients (a, b) of the boundary lift w = a cosh(rx) + b sinh(rx).

    The lift solves w'' = c w with boundary data v = (datum at 0, datum at
    L): values of w for the Dirichlet problem, derivatives of w for the
    Neumann problem.
    """
    r = math.sqrt(cfg.c)
    v0, vL = float(v[0]), float(v[1])
    sh, ch = math.sinh(r * cfg.L), math.cosh(r * cfg.L)
    if cfg.bc == "dirichlet":
        a = v0
        b = (vL - a * ch) / sh
    else:
        b = v0 / r
        a = (vL / r - b * ch) / sh
    return a, b


def dirichlet_map(cfg: HeatModelConfig, v: tuple[float, float], x):
    """Evaluate the boundary lift at positions x."""
    a, b = dirichlet_map_coeffs(cfg, v)
    r = math.sqrt(cfg.c)
    x = np.asarray(x, dtype=float)
    return a * np.cosh(r * x) + b * np.sinh(r * x)


def mode_noise_coeffs(cfg: HeatModelConfig) -> np.ndarray:
    """Coupling of each mode to a unit datum at each boundary point (K x 2).

    From the Green identity, only boundary evaluations survive:

      Neumann:   <w_b, phi_k> = (w'(L) phi_k(L) - w'(0) phi_k(0)) / (c + hat_lambda_k)
      Dirichlet: <w_b, phi_k> = (w(0) phi_k'(0) - w(L) phi_k'(L)) / (c + hat_lambda_k)

    so rows decay like 1/hat_lambda_k (Neumann) but only like
    1/sqrt(hat_lambda_k) (Dirichlet) — the root of the divergence there.
    """
    ks = mode_numbers(cfg)
    lam_hat = hat_lambda(cfg, ks)
    denom = cfg.c + lam_hat
    d = np.empty((cfg.K, 2))
    if cfg.bc == "neumann":
        phi0 = np.array([eigenfunction(cfg, int(k), 0.0) for k in ks])
        phiL = np.array([eigenfunction(cfg, int(k), cfg.L) for k in ks])
        d[:, 0] = -phi0 / denom
        d[:, 1] = phiL / denom
    else:
        root = math.sqrt(2.0 / cfg.L)
        dphi0 = root * ks * math.pi / cfg.L
        dphiL = dphi0 * np.where(ks % 2 == 0, 1.0, -1.0)
        d[:, 0] = dphi0 / denom
        d[:, 1] = -dphiL / denom
    return d


def spectral_model(cfg: HeatModelConfig) -> SpectralModel:
    """Induced slot model: simple blocks p - hat_lambda_k, shift p + c.

    The coupling matrix is the Gram matrix of the gain-scaled boundary
    couplings, G_{kl} = sum_b gain_b^2 d_{k,b} d_{l,b}.
    """
    ks = mode_numbers(cfg)
    lam = cfg.p - hat_lambda(cfg, ks)
    d = mode_noise_coeffs(cfg) * np.asarray(cfg.noise_gains, dtype=float)
    G = d @ d.T
    return SpectralModel(
        eigenvalues=tuple(complex(z) for z in lam),
        chain_lengths=(1,) * cfg.K,
        shift=cfg.p + cfg.c,
        coupling=G,
    )


def _block_of(cfg: HeatModelConfig, k: int) -> int:
    ks = mode_numbers(cfg)
    hits = np.nonzero(ks == k)[0]
    if hits.size == 0:
        raise IndexError(f"mode {k} outside the K = {cfg.K} truncation")
    return int(hits[0])


def stationary_cov_entry(cfg: HeatModelConfig, k: int, l: int, tau: float) -> complex:
    """Stationary lagged mode covariance via the closed-form pairing."""
    model = spectral_model(cfg)
    return autocov_pair(model, _block_of(cfg, k), _block_of(cfg, l), tau)


def weighted_cov_entry(
    cfg: HeatModelConfig, i: int, j: int, tau: float, alpha: float | None = None
) -> complex:
    """Damped-observable covariance for the Dirichlet problem.

    Each mode direction is scaled by (hat_lambda - p)**(alpha/2); with
    alpha < -1/2 these are exactly the observables for which the pairing
    stays finite, and the i = j = 1 entry blows up like
    (hat_lambda_1 - p)**(-1 + alpha) as p approaches the transition.
    ``alpha`` overrides the config value for diagnostics (alpha = 0 must
    reproduce the undamped entry).
    """
    if cfg.bc != "dirichlet":
        raise ValueError("damped observables apply to the Dirichlet problem")
    if alpha is None:
        alpha = cfg.alpha
    if alpha is None:
        raise ValueError("config has no damping exponent alpha")
    wi = float(hat_lambda(cfg, i) - cfg.p) ** (alpha / 2.0)
    wj = float(hat_lambda(cfg, j) - cfg.p) ** (alpha / 2.0)
    return wi * wj * stationary_cov_entry(cfg, i, j, tau)


def wellposedness_integral(cfg: HeatModelConfig, K_trunc: int | None = None) -> float:
    """Truncated defining integral of the stationary covariance (HS norm).

    sum_{k,b} (c + hat_lambda_k)^2 |d_{k,b}|^2 gain_b^2 / (2 (hat_lambda_k - p));
    converges in K for the Neumann problem, grows linearly for Dirichlet.
    """
    if K_trunc is None:
        K_trunc = cfg.K
    if not 1 <= K_trunc <= cfg.K:
        raise ValueError("truncation must satisfy 1 <= K' <= K")
    ks = mode_numbers(cfg)[:K_trunc]
    lam_hat = hat_lambda(cfg, ks)
    d = mode_noise_coeffs(cfg)[:K_trunc] * np.asarray(cfg.noise_gains, dtype=float)
    terms = (cfg.c + lam_hat) ** 2 * (d**2).sum(axis=1) / (2.0 * (lam_hat - cfg.p))
    return float(terms.sum())


def _step_noise_factor(lam: np.ndarray, dt: float) -> np.ndarray:
    """Cholesky factor of the exact one-step noise covariance across modes.

    Per boundary channel the step noises of all modes are driven by the
    same Brownian increment path, with covariance
    C_kl = (exp((lam_k + lam_l) dt) - 1) / (lam_k + lam_l); a single factor
    serves both channels.
    """
    s = lam[:, None] + lam[None, :]
    C = np.expm1(s * dt) / s
    # Gram matrix of exponentials on [0, dt]; tiny jitter guards rounding
    return np.linalg.cholesky(C + 1e-15 * np.trace(C) / len(lam) * np.eye(len(lam)))


def simulate_modes(
    cfg: HeatModelConfig,
    t_end: float,
    dt: float,
    seed: int,
    chunk: int = 100_000,
) -> ModeTrajectory:
    """Sample the mode system started from zero with exact transition steps.

    Each mode relaxes at rate p - hat_lambda_k and is forced through the two
    shared boundary channels; one step draws the exact joint Gaussian for
    (mode, channel), so the sampled law has no time-discretization bias at
    any dt.
    """
    if dt <= 0 or t_end <= 0:
        raise ValueError("dt and t_end must be positive")
    nsteps = int(round(t_end / dt))
    ks = mode_numbers(cfg)
    lam = (cfg.p - hat_lambda(cfg, ks)).astype(float)
    gains = np.asarray(cfg.noise_gains, dtype=float)
    s_big = (cfg.c + hat_lambda(cfg, ks))[:, None] * mode_noise_coeffs(cfg) * gains

    phase = np.exp(lam * dt)
    if np.all(s_big == 0.0):
        coeffs = np.zeros((cfg.K, nsteps + 1))
        times = np.arange(nsteps + 1) * dt
        return ModeTrajectory(times, coeffs, seed, dt)
    Lc = _step_noise_factor(lam, dt)

    rng = np.random.Generator(np.random.Philox(key=seed))
    coeffs = np.empty((cfg.K, nsteps + 1))
    coeffs[:, 0] = 0.0
    # state carried between filter chunks, one per mode
    zi = np.zeros(cfg.K)
    done = 0
    while done < nsteps:
        m = min(chunk, nsteps - done)
        # step-major draws keep the stream identical under any chunking
        z = rng.standard_normal((m, 2, cfg.K))
        w = (z[:, 0, :] @ Lc.T) * s_big[:, 0] + (z[:, 1, :] @ Lc.T) * s_big[:, 1]
        for k in range(cfg.K):
            y, zf = lfilter([1.0], [1.0, -phase[k]], w[:, k], zi=[zi[k]])
            coeffs[k, done + 1 : done + 1 + m] = y
            zi[k] = zf[0]
        done += m
    times = np.arange(nsteps + 1) * dt
    return ModeTrajectory(times, coeffs, seed, dt)
