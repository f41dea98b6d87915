"""Stochastic time integration for the convection model.

Two systems are integrated with time step dt (default 1e-2):

* the linearization about a steady state — midpoint (trapezoidal) rule on the
  reduced variables [omega; T; S], with the streamfunction eliminated each
  step through the coupled sparse solve.  The midpoint multiplier
  (1 + dt*lam/2)/(1 - dt*lam/2) keeps oscillatory modes at their true decay
  rate where implicit Euler would overdamp them, and it reproduces the exact
  continuous-time stationary covariance of every mode pair at any dt;
* the full nonlinear system — semi-implicit: diffusion and the linear coupling
  terms implicit, advection explicit.  The discrete steady state is an exact
  fixed point of the deterministic scheme by construction.

The surface freshwater noise is white in space and time at the cell level:
each step and surface column receives an independent Gaussian flux datum with
standard deviation sigma*|Q_S|/sqrt(dt*dx2), folded into the boundary-row
elimination of the salinity field.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .model import (
    LinearBlocks,
    ModelOperators,
    StateFields,
    _dynamic_residual,
    assemble_linearization,
    forcing_profiles,
    interior_vector,
    reconstruct_state,
)

__all__ = [
    "SimResult",
    "simulate_linearized",
    "simulate_nonlinear",
    "relax_to_steady",
    "stacked_weights",
    "indicator_observable",
]


def stacked_weights(grid) -> np.ndarray:
    """Quadrature weights for stacked [omega; T; S] interior vectors."""
    return np.tile(grid.weights_flat, 3)


def indicator_observable(grid, block: str, x1_range, x2_range) -> np.ndarray:
    """Indicator of a coordinate rectangle on one block of [omega; T; S]."""
    index = {"omega": 0, "temperature": 1, "salinity": 2}[block]
    mask = grid.interior_mask_rectangle(x1_range, x2_range).reshape(-1)
    vec = np.zeros(3 * grid.num_interior)
    vec[index * grid.num_interior : (index + 1) * grid.num_interior] = mask
    return vec


@dataclass
class SimResult:
    """Observable traces from one ensemble of trajectories."""

    times: np.ndarray  # (n_rec,)
    observables: dict[str, np.ndarray]  # name -> (n_rec, n_seeds)
    final: np.ndarray  # (state dim, n_seeds)
    jump_time: float | None = None


def _generators(seeds) -> list[np.random.Generator]:
    out = []
    for s in seeds:
        if isinstance(s, np.random.Generator):
            out.append(s)
        else:
            out.append(np.random.Generator(np.random.Philox(key=int(s))))
    return out


def _observable_rows(grid, observables: dict[str, np.ndarray]):
    names = list(observables)
    if not names:
        return names, np.zeros((0, 3 * grid.num_interior))
    w3 = stacked_weights(grid)
    rows = np.vstack([w3 * np.conj(observables[name]) for name in names])
    return names, rows


def simulate_linearized(
    ops: ModelOperators,
    blocks: LinearBlocks,
    t_end: float,
    dt: float,
    seeds,
    observables: dict[str, np.ndarray],
    record_every: int = 1,
) -> SimResult:
    """Integrate the linearized system from zero initial data.

    ``observables`` maps names to (possibly complex) stacked vectors f; each
    recorded value is the weighted pairing sum(W * v * conj(f)).  All seeds run
    in lockstep so the per-step sparse solve is shared.
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = ops.grid
    k = grid.num_interior
    n_steps = int(round(t_end / dt))
    rngs = _generators(seeds)
    n_seeds = len(rngs)

    identity = sparse.identity(3 * k, format="csr")
    half = 0.5 * dt
    core = sparse.bmat(
        [
            [blocks.a11, blocks.a12],
            [(-half) * blocks.a21, identity - half * blocks.a22],
        ]
    )
    # The S tendency is stepped through its weighted-mean-free part.  As in the
    # steady solver this rank-one correction rides along in a border instead of
    # densifying the factorized matrix.
    w_flat = grid.weights_flat
    total = float(w_flat.sum())
    proj_col = np.concatenate([np.zeros(3 * k), np.full(k, 1.0 / total)])
    stepper = sparse.bmat(
        [
            [core, sparse.csr_matrix(proj_col[:, None])],
            [
                sparse.csr_matrix(half * blocks.salt_drift_row[None, :]),
                sparse.csr_matrix([[-1.0]]),
            ],
        ],
        format="csc",
    )
    lu = splu(stepper)
    a21 = blocks.a21.tocsr()
    a22 = blocks.a22.tocsr()

    q_s, _, _ = forcing_profiles(grid.x2[1:-1], ops.params.length)
    noise_gain = ops.params.sigma * np.sqrt(dt / grid.h2)
    b_mat = (blocks.noise_input @ sparse.diags(q_s)).tocsr()

    names, rows = _observable_rows(grid, observables)
    n_rec = n_steps // record_every + 1
    traces = np.zeros((len(names), n_rec, n_seeds), dtype=complex)

    v = np.zeros((3 * k, n_seeds))
    psi = np.zeros((k, n_seeds))
    rhs = np.zeros((4 * k + 1, n_seeds))
    traces[:, 0, :] = rows @ v
    rec = 1
    for step in range(1, n_steps + 1):
        eta = np.column_stack([rng.standard_normal(grid.n) for rng in rngs])
        forced = b_mat @ eta
        forced[2 * k :] -= (w_flat @ forced[2 * k :]) / total
        explicit = half * (a21 @ psi + a22 @ v)
        explicit[2 * k :] -= (w_flat @ explicit[2 * k :]) / total
        rhs[k : 4 * k] = v + explicit + noise_gain * forced
        sol = lu.solve(rhs)
        psi = sol[:k]
        v = sol[k : 4 * k]
        if step % record_every == 0:
            traces[:, rec, :] = rows @ v
            rec += 1
    times = np.arange(n_rec) * (dt * record_every)
    observables_out = {name: traces[i] for i, name in enumerate(names)}
    if not np.all(np.isfinite(v)):
        raise FloatingPointError("linearized trajectory blew up")
    return SimResult(times=times, observables=observables_out, final=v)


def _semi_implicit_setup(ops: ModelOperators, dt: float):
    """Implicit operator (diffusion + linear coupling at zero flow) and its LU."""
    zero = reconstruct_state(ops, np.zeros(4 * ops.grid.num_interior))
    # Zero psi means no advection; a22 then holds exactly the linear part.
    linear = assemble_linearization(ops, zero).a22
    k3 = 3 * ops.grid.num_interior
    lu = splu((sparse.identity(k3, format="csr") - dt * linear).tocsc())
    return linear, lu


def _nonlinear_rhs(ops: ModelOperators, state: StateFields) -> np.ndarray:
    parts = _dynamic_residual(ops, state)
    return np.concatenate(parts[1:])


def simulate_nonlinear(
    ops: ModelOperators,
    steady: StateFields,
    t_end: float,
    dt: float,
    seed,
    observables: dict[str, np.ndarray],
    record_every: int = 1,
    jump_threshold: float | None = None,
) -> SimResult:
    """Integrate the full system from ``steady``; observables act on fluctuations.

    ``jump_threshold``, when given, is compared against the L2 norm of the
    salinity deviation from the steady state; the first crossing time is
    reported (integration continues).
    """
    if dt <= 0:
        raise ValueError("dt must be positive")
    grid = ops.grid
    k = grid.num_interior
    n_steps = int(round(t_end / dt))
    rng = _generators([seed])[0]

    linear, lu = _semi_implicit_setup(ops, dt)
    lap_lu = ops.lap_psi_lu

    q_s, _, _ = forcing_profiles(grid.x2[1:-1], ops.params.length)
    datum_gain = ops.params.sigma / np.sqrt(dt * grid.h2)
    datum_map = ops.bounds.surface_datum_response

    x = interior_vector(ops, steady)
    x_star_v = x[k:].copy()
    s_star = x[3 * k :].copy()
    w_flat = grid.weights_flat
    total = float(w_flat.sum())
    s_mean_target = float(w_flat @ s_star) / total

    names, rows = _observable_rows(grid, observables)
    n_rec = n_steps // record_every + 1
    traces = np.zeros((len(names), n_rec, 1), dtype=complex)
    traces[:, 0, 0] = rows @ (x[k:] - x_star_v)
    rec = 1
    jump_time = None

    for step in range(1, n_steps + 1):
        state = reconstruct_state(ops, x)
        if ops.params.sigma > 0:
            datum = datum_gain * q_s * rng.standard_normal(grid.n)
            noisy_sal = state.salinity.ravel() + datum_map @ datum
            state = StateFields(
                state.psi,
                state.omega,
                state.temperature,
                noisy_sal.reshape(grid.full_shape),
            )
        f_val = _nonlinear_rhs(ops, state)
        if not np.all(np.isfinite(f_val)):
            raise FloatingPointError(f"blow-up at t={step * dt:.3f}")
        v = x[k:]
        v_new = lu.solve(v + dt * (f_val - linear @ v))
        # A uniform S shift is dynamically invisible, so the gauge is free to
        # creep through the implicit/explicit operator splitting; re-anchor it.
        v_new[2 * k :] += s_mean_target - float(w_flat @ v_new[2 * k :]) / total
        psi_new = lap_lu.solve(-v_new[:k])
        x = np.concatenate([psi_new, v_new])
        if jump_threshold is not None and jump_time is None:
            if np.linalg.norm(v_new[2 * k :] - s_star) > jump_threshold:
                jump_time = step * dt
        if step % record_every == 0:
            traces[:, rec, 0] = rows @ (v_new - x_star_v)
            rec += 1

    times = np.arange(n_rec) * (dt * record_every)
    observables_out = {name: traces[i] for i, name in enumerate(names)}
    return SimResult(
        times=times, observables=observables_out, final=x[:, None], jump_time=jump_time
    )


def relax_to_steady(
    ops: ModelOperators, initial: StateFields, t_end: float, dt: float = 1e-2
) -> StateFields:
    """Deterministic semi-implicit integration, used to approach an attractor."""
    grid = ops.grid
    k = grid.num_interior
    n_steps = int(round(t_end / dt))
    linear, lu = _semi_implicit_setup(ops, dt)
    lap_lu = ops.lap_psi_lu
    x = interior_vector(ops, initial)
    w_flat = grid.weights_flat
    total = float(w_flat.sum())
    s_mean_target = float(w_flat @ x[3 * k :]) / total
    for _ in range(n_steps):
        state = reconstruct_state(ops, x)
        f_val = _nonlinear_rhs(ops, state)
        if not np.all(np.isfinite(f_val)):
            raise FloatingPointError("relaxation blew up; reduce dt")
        v = x[k:]
        v_new = lu.solve(v + dt * (f_val - linear @ v))
        v_new[2 * k :] += s_mean_target - float(w_flat @ v_new[2 * k :]) / total
        psi_new = lap_lu.solve(-v_new[:k])
        x = np.concatenate([psi_new, v_new])
    return reconstruct_state(ops, x)
