"""Reference parameter settings and branch-preparation recipes.

Two standard configurations are used throughout the experiments:

* symmetric regime — Ra = 1e4, kappa = 100, L = 10, nu = delta = 0.  The
  surface flux is mirror symmetric, and the thermally-dominated branch loses
  stability through a pitchfork as the freshwater forcing p grows.
* tilted regime — Ra = 4e4, kappa = inf, L = 5, nu = -0.2, delta = 0.5.  The
  flux asymmetry unfolds the pitchfork; the southward-sinking states form a
  disconnected sheet that ends in a fold slightly above p = 1 (coarse grids).

Full-strength steady states are far from the rest state, so every recipe
first ramps the Rayleigh number with a Newton correction at each rung, and
only then moves the freshwater-forcing parameter.
"""

from __future__ import annotations

from dataclasses import replace

import numpy as np

from .grid import Grid2D
from .model import (
    BoussinesqParams,
    ModelOperators,
    StateFields,
    build_operators,
    forcing_profiles,
    interior_vector,
    reconstruct_state,
)
from .simulate import relax_to_steady
from .steady import NewtonError, continuation_natural, newton_solve, steady_from_rest
from .symmetry import mirror_solution, reflect_fields

__all__ = [
    "RAYLEIGH_LADDER",
    "symmetric_regime_params",
    "tilted_regime_params",
    "ramped_steady",
    "southward_tilted_state",
    "asymmetric_state",
]

#: Rayleigh rungs for warm-started ramps.  Coarser ladders (e.g. doubling all
#: the way) lose the branch between 1e4 and 4e4.
RAYLEIGH_LADDER = (1e3, 2e3, 4e3, 7e3, 1e4, 1.5e4, 2e4, 3e4, 4e4)


def symmetric_regime_params(p: float = 0.055, **overrides) -> BoussinesqParams:
    base = dict(rayleigh=1e4, kappa=100.0, length=10.0, nu=0.0, delta=0.0, p=p)
    base.update(overrides)
    return BoussinesqParams(**base)


def tilted_regime_params(p: float = 1.0, **overrides) -> BoussinesqParams:
    base = dict(rayleigh=4e4, kappa=np.inf, length=5.0, nu=-0.2, delta=0.5, p=p)
    base.update(overrides)
    return BoussinesqParams(**base)


def _p_path(p_from: float, p_to: float, max_step: float) -> list[float]:
    n = max(1, int(np.ceil(abs(p_to - p_from) / max_step)))
    return list(np.linspace(p_from, p_to, n + 1))


def ramped_steady(
    grid: Grid2D,
    params: BoussinesqParams,
    relax_time: float = 100.0,
    dt: float = 1e-2,
    tol: float = 1e-8,
) -> tuple[ModelOperators, StateFields]:
    """Steady state at full Rayleigh number, reached by climbing the ladder.

    Relaxation from rest at the lowest rung picks the attracting convective
    branch; each subsequent rung is a plain Newton solve warm-started from the
    previous one.
    """
    rungs = [ra for ra in RAYLEIGH_LADDER if ra < params.rayleigh]
    rungs.append(params.rayleigh)
    ops = build_operators(grid, replace(params, rayleigh=rungs[0]))
    state = steady_from_rest(ops, relax_time=relax_time, dt=dt, tol=tol)
    for ra in rungs[1:]:
        ops = build_operators(grid, replace(params, rayleigh=ra))
        try:
            state = newton_solve(ops, state, tol=tol)
        except NewtonError:
            # a rung that crosses convection onset can outrun Newton's basin;
            # let the flow settle on the attracting branch first
            state = relax_to_steady(ops, state, t_end=relax_time, dt=dt)
            state = newton_solve(ops, state, tol=tol)
    return ops, state


def southward_tilted_state(
    grid: Grid2D,
    params: BoussinesqParams | None = None,
    ramp_p: float = 0.1,
    relax_time: float = 100.0,
    dt: float = 1e-2,
    tol: float = 1e-8,
) -> tuple[ModelOperators, StateFields]:
    """Steady state on the disconnected southward-sinking sheet (tilted regime).

    Under this discretization the branch that survives down to small p sinks
    at the northern wall.  The southward-sinking sheet never connects to it,
    but reflecting the northern state at p = 1 gives a guess close enough for
    Newton, because the reflection is an exact symmetry of everything except
    the tilt nu * V_S.  For a target p other than 1 the sheet is then walked
    with natural continuation (it exists on roughly p in [0.17, 1.08] on
    coarse grids).
    """
    if params is None:
        params = tilted_regime_params()
    anchor_p = 1.0
    ops, state = ramped_steady(
        grid, params.with_p(ramp_p), relax_time=relax_time, dt=dt, tol=tol
    )
    up = continuation_natural(ops, _p_path(ramp_p, anchor_p, 0.1), state, tol=tol)
    if up.fold_detected:
        raise NewtonError(f"lost the connected branch near p={up.fold_p}")
    ops = ops.with_p(anchor_p)
    state = newton_solve(ops, reflect_fields(up.points[-1].state), tol=tol)
    if params.p != anchor_p:
        down = continuation_natural(
            ops, _p_path(anchor_p, params.p, 0.1), state, tol=tol
        )
        if down.fold_detected:
            raise NewtonError(f"southward sheet ends before p={params.p}")
        state = down.points[-1].state
        ops = ops.with_p(params.p)
    return ops, state


def asymmetric_state(
    grid: Grid2D,
    params: BoussinesqParams | None = None,
    start_p: float = 0.055,
    kick: float = 0.5,
    relax_time: float = 150.0,
    dt: float = 1e-2,
    tol: float = 1e-8,
) -> tuple[ModelOperators, StateFields]:
    """Symmetry-broken steady state above the pitchfork (symmetric regime).

    Follows the symmetric branch from a stable starting p, kicks the salinity
    with an odd-in-x2 profile, relaxes until the symmetry-breaking instability
    saturates, and polishes with Newton.  Raises NewtonError if the kick
    decays back to the symmetric state (p below threshold, or kick too
    small).  The partner state is ``mirror_solution(state, params)``.
    """
    if params is None:
        params = symmetric_regime_params(p=0.07)
    if params.nu != 0:
        raise ValueError("symmetry breaking applies to the symmetric regime only")
    ops, sym = ramped_steady(
        grid, params.with_p(start_p), relax_time=relax_time, dt=dt, tol=tol
    )
    if params.p != start_p:
        walk = continuation_natural(
            ops, _p_path(start_p, params.p, 0.005), sym, tol=tol
        )
        if walk.fold_detected:
            raise NewtonError(f"symmetric branch lost near p={walk.fold_p}")
        sym = walk.points[-1].state
        ops = ops.with_p(params.p)

    _, v_s, _ = forcing_profiles(grid.x2[1:-1], params.length)
    k = grid.num_interior
    x = interior_vector(ops, sym)
    # odd profile: zero weighted mean on the symmetric grid, so the salinity
    # gauge is untouched
    x[3 * k :] += kick * np.tile(v_s, (grid.m, 1)).ravel()
    kicked = reconstruct_state(ops, x)
    # the kicked transient can outrun the requested step on finer grids;
    # halve until the relaxation survives
    state = None
    for attempt in range(4):
        try:
            with np.errstate(over="ignore", invalid="ignore"):
                settled = relax_to_steady(
                    ops, kicked, t_end=relax_time, dt=dt / 2**attempt
                )
            state = newton_solve(ops, settled, tol=tol)
            break
        except FloatingPointError:
            if attempt == 3:
                raise
    drift = np.abs(state.psi - mirror_solution(state, params).psi).max()
    if drift < 1e-3 * max(1.0, np.abs(state.psi).max()):
        raise NewtonError(
            f"perturbation decayed back to the symmetric state (drift {drift:.2e})"
        )
    return ops, state
