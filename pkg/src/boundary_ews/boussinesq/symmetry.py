"""Equatorial reflection of steady states.

The model with symmetric surface forcing (nu = 0) commutes with the reflection
x2 -> L - x2 combined with a sign flip of the flow fields: if (psi, omega, T, S)
is steady, so is (-psi~, -omega~, T~, S~), where ~ denotes column reversal on
the uniform, symmetric x2 grid.  This turns a southward-sinking state into its
northward-sinking partner without another solve, and the two share a spectrum.
"""

from __future__ import annotations

from .model import BoussinesqParams, StateFields

__all__ = ["mirror_solution", "reflect_fields"]


def reflect_fields(state: StateFields) -> StateFields:
    """Column-reverse all fields and flip the sign of the flow pair.

    Pure data transform with no symmetry guarantee attached; with tilted
    forcing (nu != 0) the result is merely a warm start for a solver, not a
    solution.
    """
    return StateFields(
        psi=-state.psi[:, ::-1].copy(),
        omega=-state.omega[:, ::-1].copy(),
        temperature=state.temperature[:, ::-1].copy(),
        salinity=state.salinity[:, ::-1].copy(),
    )


def mirror_solution(state: StateFields, params: BoussinesqParams) -> StateFields:
    """Reflected steady state on the same grid; requires symmetric forcing (nu = 0)."""
    if params.nu != 0:
        raise ValueError("mirror construction requires nu = 0 (symmetric surface flux)")
    return reflect_fields(state)
