r"""Closed-form stationary covariance pairings along adjoint spectral directions.

This module works entirely in a finite "slot" basis attached to the point
spectrum of a linear drift operator A (the generator of the relaxation
semigroup), with boundary forcing entering through a lifted noise operator.
Everything is expressed through three ingredients:

* eigenvalues ``lam_i`` with nonpositive real part, one per spectral block,
  each carrying a generalized-eigenvector chain of length ``M_i``;
* a real spectral shift ``q`` (the lift shift used when the boundary datum is
  absorbed into the domain of the operator);
* a Hermitian positive-semidefinite coupling matrix ``G`` whose entry for
  slots (i, k1) and (j, k2) is the pairing of the corresponding adjoint chain
  vectors through the lifted noise covariance.

For simple (chain length 1) directions the stationary pairing is

    cov(i, j; tau) = - (conj(lam_i) - q) (lam_j - q) / (conj(lam_i) + lam_j)
                       * exp(conj(lam_i) tau) * G[(i,1), (j,1)]

and longer chains satisfy a two-index recursion obtained from the Lyapunov
identity of the stationary covariance; both are implemented below.  The
pairing convention is linear in the first argument and conjugate-linear in
the second throughout.

As the spectral gap closes, the pairing for chain slots (k1, k2) blows up
like ``|conj(lam_i) + lam_j| ** (-(k1 + k2 - 1))``; the ``predicted_*``
helpers expose those exponents and ``fit_scaling_exponent`` recovers them
from data on a log10/log10 scale.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "DegenerateDenominatorError",
    "SilencedDirectionError",
    "SpectralModel",
    "DirectionCoeffs",
    "ScalingFit",
    "autocov_pair",
    "autocov_jordan",
    "autocov_subspace",
    "autocorr_asymptotic",
    "predicted_exponent_pair",
    "predicted_exponent_directions",
    "densify_direction",
    "fit_scaling_exponent",
    "model_to_json",
    "model_from_json",
]

#: Relative tolerance used when validating Hermitian symmetry / PSD-ness of G.
_COUPLING_TOL = 1e-10


class DegenerateDenominatorError(ArithmeticError):
    """Raised when a pairing denominator conj(lam_i) + lam_j vanishes.

    This happens exactly when the two blocks sit mirrored on the imaginary
    axis (in particular for a marginal block paired with itself).  The
    stationary pairing does not exist there, so we refuse loudly instead of
    returning infinities.
    """


class SilencedDirectionError(ValueError):
    """Raised when a direction has no component on the leading block."""


@dataclass(frozen=True)
class SpectralModel:
    """Finite slot-basis description of the drift spectrum and noise coupling.

    Args:
        eigenvalues: one complex eigenvalue per block, ``Re <= 0``.  Strictly
            negative real parts are required unless ``allow_marginal`` is set
            (a marginal block is legitimate e.g. for a conserved direction,
            but pairings touching it may be degenerate).
        chain_lengths: generalized-eigenvector chain length ``M_i >= 1`` per
            block.  Slots are enumerated block by block, chain index 1..M_i.
        shift: the real lift shift ``q``.
        coupling: Hermitian PSD matrix over slots; entry ``[a, b]`` couples
            adjoint chain vector a (linear) with b (conjugated).
    """

    eigenvalues: tuple[complex, ...]
    chain_lengths: tuple[int, ...]
    shift: float
    coupling: np.ndarray
    allow_marginal: bool = False
    _memo: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self) -> None:
        eigs = tuple(complex(z) for z in self.eigenvalues)
        chains = tuple(int(m) for m in self.chain_lengths)
        object.__setattr__(self, "eigenvalues", eigs)
        object.__setattr__(self, "chain_lengths", chains)
        if len(eigs) != len(chains):
            raise ValueError("one chain length per eigenvalue required")
        if not eigs:
            raise ValueError("at least one spectral block required")
        for z in eigs:
            if not (z.real < 0.0 or (self.allow_marginal and z.real == 0.0)):
                raise ValueError(f"eigenvalue {z} must have negative real part")
        if any(m < 1 for m in chains):
            raise ValueError("chain lengths must be >= 1")
        if not float(self.shift) == self.shift:  # rejects NaN and non-reals
            raise ValueError("shift must be a finite real number")
        G = np.asarray(self.coupling, dtype=complex)
        n = self.n_slots
        if G.shape != (n, n):
            raise ValueError(f"coupling must be {n}x{n} over slots, got {G.shape}")
        scale = max(1.0, float(np.abs(G).max()))
        if np.abs(G - G.conj().T).max() > _COUPLING_TOL * scale:
            raise ValueError("coupling matrix must be Hermitian")
        G = 0.5 * (G + G.conj().T)
        if np.linalg.eigvalsh(G).min() < -_COUPLING_TOL * scale:
            raise ValueError("coupling matrix must be positive semidefinite")
        G.setflags(write=False)
        object.__setattr__(self, "coupling", G)

    @property
    def n_blocks(self) -> int:
        return len(self.eigenvalues)

    @property
    def n_slots(self) -> int:
        return sum(self.chain_lengths)

    def slot(self, i: int, k: int) -> int:
        """Flat slot index of chain vector k (1-based) in block i (0-based)."""
        if not 0 <= i < self.n_blocks:
            raise IndexError(f"block index {i} out of range")
        if not 1 <= k <= self.chain_lengths[i]:
            raise IndexError(f"chain index {k} out of range for block {i}")
        return sum(self.chain_lengths[:i]) + (k - 1)


@dataclass(frozen=True)
class DirectionCoeffs:
    """Expansion coefficients of a direction over the adjoint chain slots.

    ``coeffs[model.slot(i, k)]`` multiplies adjoint chain vector (i, k); the
    direction is the corresponding linear combination.  Missing components
    are simply zero entries.
    """

    coeffs: np.ndarray

    def __post_init__(self) -> None:
        c = np.asarray(self.coeffs, dtype=complex).reshape(-1).copy()
        c.setflags(write=False)
        object.__setattr__(self, "coeffs", c)

    @classmethod
    def from_dict(cls, model: SpectralModel, entries: dict) -> "DirectionCoeffs":
        """Build from a {(block, chain_index): coefficient} mapping."""
        c = np.zeros(model.n_slots, dtype=complex)
        for (i, k), v in entries.items():
            c[model.slot(i, k)] = v
        return cls(c)


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares power-law fit on the log10/log10 scale."""

    exponent: float
    intercept: float
    residual: float  # root-mean-square residual of log10 |value|


def _denominator(model: SpectralModel, i: int, j: int) -> complex:
    den = model.eigenvalues[i].conjugate() + model.eigenvalues[j]
    if den == 0:
        raise DegenerateDenominatorError(
            f"blocks {i} and {j}: conj(lam_i) + lam_j vanishes, "
            "no stationary pairing exists"
        )
    return den


def autocov_pair(model: SpectralModel, i: int, j: int, tau: float) -> complex:
    """Stationary lagged covariance pairing of two simple adjoint directions.

    Uses chain slot 1 of each block; ``tau >= 0`` is the lag, applied with
    the conjugated eigenvalue of the first (lagged) block.
    """
    if tau < 0:
        raise ValueError("lag tau must be nonnegative")
    lam_i = model.eigenvalues[i].conjugate()
    lam_j = model.eigenvalues[j]
    den = _denominator(model, i, j)
    g = model.coupling[model.slot(i, 1), model.slot(j, 1)]
    q = model.shift
    return -(lam_i - q) * (lam_j - q) / den * np.exp(lam_i * tau) * g


def autocov_jordan(
    model: SpectralModel, i: int, k1: int, j: int, k2: int, tau: float
) -> complex:
    """Stationary lagged pairing for arbitrary chain slots (k1, k2).

    Satisfies the two-index recursion induced by the Lyapunov identity of
    the stationary covariance: the (k1, k2) value is built from the (k1-1,
    k2) and (k1, k2-1) values plus a forcing term polynomial in the lag.
    Results are memoised on the model, keyed by (i, k1, j, k2, tau).
    """
    if tau < 0:
        raise ValueError("lag tau must be nonnegative")
    model.slot(i, k1)  # index validation
    model.slot(j, k2)
    return _jordan_recurse(model, i, j, float(tau), k1, k2)


def _coupling_entry(model: SpectralModel, i: int, k1: int, j: int, k2: int) -> complex:
    """G entry for slots (i, k1), (j, k2); chain index 0 means "no vector"."""
    if k1 == 0 or k2 == 0:
        return 0.0 + 0.0j
    return model.coupling[model.slot(i, k1), model.slot(j, k2)]


def _jordan_recurse(
    model: SpectralModel, i: int, j: int, tau: float, k1: int, k2: int
) -> complex:
    if k1 == 0 or k2 == 0:
        return 0.0 + 0.0j
    key = (i, k1, j, k2, tau)
    hit = model._memo.get(key)
    if hit is not None:
        return hit
    lam_i = model.eigenvalues[i].conjugate()
    lam_j = model.eigenvalues[j]
    q = model.shift
    den = _denominator(model, i, j)

    # Forcing: lag-polynomial sweep down the first chain against the shifted
    # coupling entries of the second chain.
    forcing = 0.0 + 0.0j
    for k in range(1, k1 + 1):
        shifted = (
            (lam_i - q) * (lam_j - q) * _coupling_entry(model, i, k, j, k2)
            + (lam_i - q) * _coupling_entry(model, i, k, j, k2 - 1)
            + (lam_j - q) * _coupling_entry(model, i, k - 1, j, k2)
            + _coupling_entry(model, i, k - 1, j, k2 - 1)
        )
        if k1 - k == 0:
            weight = 1.0  # tau**0 even at tau == 0
        else:
            weight = tau ** (k1 - k) / math.factorial(k1 - k)
        forcing += weight * shifted

    value = (
        -(
            _jordan_recurse(model, i, j, tau, k1 - 1, k2)
            + _jordan_recurse(model, i, j, tau, k1, k2 - 1)
        )
        / den
        - np.exp(lam_i * tau) * forcing / den
    )
    model._memo[key] = value
    return value


def autocov_subspace(
    model: SpectralModel,
    f1: DirectionCoeffs,
    f2: DirectionCoeffs,
    tau: float,
) -> complex:
    """Stationary lagged covariance pairing of two general directions.

    Bilinear expansion over all slot pairs: coefficients of the first
    direction enter linearly, those of the second conjugated, matching the
    pairing convention of the slot formulas.
    """
    n = model.n_slots
    c1 = f1.coeffs
    c2 = f2.coeffs
    if c1.shape != (n,) or c2.shape != (n,):
        raise ValueError("direction coefficients must cover all slots")
    total = 0.0 + 0.0j
    for i in range(model.n_blocks):
        for k1 in range(1, model.chain_lengths[i] + 1):
            a = c1[model.slot(i, k1)]
            if a == 0:
                continue
            for j in range(model.n_blocks):
                for k2 in range(1, model.chain_lengths[j] + 1):
                    b = c2[model.slot(j, k2)]
                    if b == 0:
                        continue
                    total += a * b.conjugate() * _jordan_recurse(
                        model, i, j, float(tau), k1, k2
                    )
    return total


def autocorr_asymptotic(model: SpectralModel, i: int, tau: float) -> complex:
    """Normalized lagged autocovariance along one adjoint direction.

    The lag-tau pairing divided by its lag-0 value: exp(conj(lam_i) * tau),
    independent of the coupling.  This is the quantity whose modulus decays
    ever more slowly as the spectral gap of block i closes.
    """
    return np.exp(model.eigenvalues[i].conjugate() * tau)


def predicted_exponent_pair(k1: int, k2: int) -> int:
    """Blow-up exponent of the slot (k1, k2) pairing in the closing gap."""
    if k1 < 1 or k2 < 1:
        raise ValueError("chain indices must be >= 1")
    return -(k1 + k2) + 1


def _max_leading_slot(model: SpectralModel, f: DirectionCoeffs, tol: float) -> int:
    m1 = model.chain_lengths[0]
    scale = float(np.abs(f.coeffs).max()) or 1.0
    for k in range(m1, 0, -1):
        if abs(f.coeffs[model.slot(0, k)]) > tol * scale:
            return k
    raise SilencedDirectionError(
        "direction has no component on the leading block; "
        "its variance pairing does not diverge at the transition"
    )


def predicted_exponent_directions(
    model: SpectralModel,
    f1: DirectionCoeffs,
    f2: DirectionCoeffs,
    tol: float = 0.0,
) -> int:
    """Blow-up exponent of the pairing of two directions in the closing gap.

    Determined by the deepest chain slot of the leading block each direction
    touches; raises :class:`SilencedDirectionError` for directions with no
    leading-block component at all (those are exactly the silenced ones).
    """
    k1 = _max_leading_slot(model, f1, tol)
    k2 = _max_leading_slot(model, f2, tol)
    return -(k1 + k2) + 1


def densify_direction(
    model: SpectralModel,
    f: DirectionCoeffs,
    delta: float,
    chain_norms: np.ndarray,
) -> DirectionCoeffs:
    """Perturb a direction within delta so the deepest leading slot is hit.

    ``chain_norms[s]`` must hold the state-space norm of adjoint chain
    vector s.  If the slot (leading block, deepest chain index) coefficient
    is already nonzero the direction is returned unchanged; otherwise that
    coefficient is set to ``delta / (2 * norm)``, which moves the direction
    by ``delta / 2 < delta`` in norm and makes the fastest divergence rate
    available to the pairing.
    """
    if delta <= 0:
        raise ValueError("delta must be positive")
    norms = np.asarray(chain_norms, dtype=float).reshape(-1)
    if norms.shape != (model.n_slots,) or (norms <= 0).any():
        raise ValueError("chain_norms must be positive, one per slot")
    top = model.slot(0, model.chain_lengths[0])
    if f.coeffs[top] != 0:
        return DirectionCoeffs(f.coeffs)
    c = f.coeffs.copy()
    c[top] = delta / (2.0 * norms[top])
    return DirectionCoeffs(c)


def fit_scaling_exponent(rates: np.ndarray, values: np.ndarray) -> ScalingFit:
    """Fit |value| ~ C * rate**a by least squares on the log10/log10 scale."""
    r = np.asarray(rates, dtype=float).reshape(-1)
    v = np.abs(np.asarray(values)).reshape(-1).astype(float)
    if r.size != v.size:
        raise ValueError("rates and values must have the same length")
    if r.size < 2:
        raise ValueError("need at least two points to fit a slope")
    if (r <= 0).any() or (v <= 0).any():
        raise ValueError("rates and |values| must be strictly positive")
    x = np.log10(r)
    y = np.log10(v)
    (a, b), res, *_ = np.polyfit(x, y, 1, full=True)
    rms = math.sqrt(res[0] / x.size) if res.size else 0.0
    return ScalingFit(exponent=float(a), intercept=float(b), residual=rms)


# ---------------------------------------------------------------------------
# serialization


def model_to_json(model: SpectralModel) -> str:
    """Serialize a model to a JSON string (complex numbers as [re, im])."""
    G = model.coupling
    payload = {
        "eigenvalues": [[z.real, z.imag] for z in model.eigenvalues],
        "chain_lengths": list(model.chain_lengths),
        "shift": model.shift,
        "coupling": [[[z.real, z.imag] for z in row] for row in G.tolist()],
        "allow_marginal": model.allow_marginal,
    }
    return json.dumps(payload)


def model_from_json(text: str) -> SpectralModel:
    """Inverse of :func:`model_to_json`; validates on reconstruction."""
    payload = json.loads(text)
    eigs = tuple(complex(re, im) for re, im in payload["eigenvalues"])
    G = np.array(
        [[complex(re, im) for re, im in row] for row in payload["coupling"]],
        dtype=complex,
    )
    return SpectralModel(
        eigenvalues=eigs,
        chain_lengths=tuple(payload["chain_lengths"]),
        shift=float(payload["shift"]),
        coupling=G,
        allow_marginal=bool(payload.get("allow_marginal", False)),
    )
