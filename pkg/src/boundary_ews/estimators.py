"""Temporal and ensemble statistics for projected trajectories.

Centered, normalized estimators with burn-in; lags snap to the sample grid.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ScalarSeries",
    "EnsembleSummary",
    "project",
    "temporal_autocov",
    "temporal_autocorr",
    "ensemble_logstats",
]


@dataclass(frozen=True)
class ScalarSeries:
    """Uniformly sampled scalar time series with a burn-in prefix."""

    values: np.ndarray
    dt: float
    burn_in: int = 0

    def __post_init__(self) -> None:
        v = np.asarray(self.values)
        if v.ndim != 1:
            raise ValueError("series must be one-dimensional")
        if not np.isfinite(v).all():
            raise ValueError("series contains non-finite samples")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if not 0 <= self.burn_in < v.size:
            raise ValueError("burn-in must leave a nonempty window")
        object.__setattr__(self, "values", v)

    @classmethod
    def from_samples(
        cls, values: np.ndarray, dt: float, burn_fraction: float = 0.1
    ) -> "ScalarSeries":
        """Build a series discarding the leading fraction as burn-in."""
        n = np.asarray(values).shape[0]
        return cls(values, dt, burn_in=int(burn_fraction * n))

    @property
    def window(self) -> np.ndarray:
        return self.values[self.burn_in :]


@dataclass(frozen=True)
class EnsembleSummary:
    mean_log10: float
    std_log10: float
    runs: int


def project(field, direction, weights):
    """Weighted inner product sum(w * field * conj(direction)).

    For an indicator direction this is the cell-area-weighted mass of the
    field over the indicator's support.
    """
    f = np.asarray(field)
    d = np.asarray(direction)
    w = np.asarray(weights, dtype=float)
    if not (f.shape == d.shape == w.shape):
        raise ValueError("field, direction and weights must share a shape")
    out = np.sum(w * f * np.conj(d))
    return out.item()


def _snap_lag(tau: float, dt: float) -> int:
    lag = int(round(tau / dt))
    if lag < 0:
        raise ValueError("lag must be nonnegative")
    return lag


def temporal_autocov(s: ScalarSeries, r: ScalarSeries, tau: float):
    """Centered lagged covariance of two series over the post-burn-in window.

    (1/(T-lag)) * sum_t (s[t+lag] - mean(s)) * conj(r[t] - mean(r)); the lag
    snaps to round(tau/dt), so its time discretization error is <= dt/2.
    """
    if s.dt != r.dt:
        raise ValueError("series must share the sampling step")
    a = s.window
    b = r.window
    if a.size != b.size:
        raise ValueError("series windows must have equal length")
    lag = _snap_lag(tau, s.dt)
    if lag >= a.size:
        raise ValueError(f"lag {lag} does not fit in window of {a.size} samples")
    da = a - a.mean()
    db = b - b.mean()
    n = a.size - lag
    out = np.dot(da[lag:], np.conj(db[: n])) / n
    return out.item()


def temporal_autocorr(s: ScalarSeries, r: ScalarSeries, tau: float):
    """Lagged covariance normalized by its lag-0 value."""
    c0 = temporal_autocov(s, r, 0.0)
    if c0 == 0:
        raise ZeroDivisionError(
            "zero-lag covariance vanishes; the directions are uncorrelated "
            "and no autocorrelation is defined"
        )
    return temporal_autocov(s, r, tau) / c0


def ensemble_logstats(values) -> EnsembleSummary:
    """Mean and standard deviation of log10 over an ensemble of runs."""
    v = np.asarray(values, dtype=float).reshape(-1)
    if v.size < 1:
        raise ValueError("need at least one run")
    if (v <= 0).any():
        raise ValueError("ensemble values must be positive for log statistics")
    logs = np.log10(v)
    return EnsembleSummary(
        mean_log10=float(logs.mean()),
        std_log10=float(logs.std()),
        runs=int(v.size),
    )
