"""2D convection model with surface freshwater forcing: grids, steady states,
continuation, linearization, and stochastic time-stepping."""

from .grid import DiffOps, Grid2D, build_diff_ops, build_grid
from .model import (
    BoussinesqParams,
    LinearBlocks,
    ModelOperators,
    StateFields,
    assemble_linearization,
    build_operators,
    forcing_profiles,
    interior_vector,
    reconstruct_state,
    residual,
    salt_project,
    salt_project_stacked,
    schur_apply,
    schur_dense,
    transfer_state,
)
from .simulate import (
    SimResult,
    indicator_observable,
    relax_to_steady,
    simulate_linearized,
    simulate_nonlinear,
    stacked_weights,
)
from .steady import (
    Branch,
    BranchPoint,
    NewtonError,
    StepSizeUnderflow,
    continuation_arclength,
    continuation_natural,
    newton_solve,
    rest_state,
    steady_from_rest,
)
from .regimes import (
    asymmetric_state,
    ramped_steady,
    southward_tilted_state,
    symmetric_regime_params,
    tilted_regime_params,
)
from .symmetry import mirror_solution, reflect_fields

__all__ = [
    "Grid2D",
    "DiffOps",
    "build_grid",
    "build_diff_ops",
    "BoussinesqParams",
    "StateFields",
    "ModelOperators",
    "LinearBlocks",
    "build_operators",
    "forcing_profiles",
    "interior_vector",
    "reconstruct_state",
    "residual",
    "assemble_linearization",
    "schur_apply",
    "schur_dense",
    "salt_project",
    "salt_project_stacked",
    "transfer_state",
    "Branch",
    "BranchPoint",
    "NewtonError",
    "StepSizeUnderflow",
    "newton_solve",
    "rest_state",
    "steady_from_rest",
    "continuation_natural",
    "continuation_arclength",
    "SimResult",
    "simulate_linearized",
    "simulate_nonlinear",
    "relax_to_steady",
    "stacked_weights",
    "indicator_observable",
    "mirror_solution",
    "reflect_fields",
    "symmetric_regime_params",
    "tilted_regime_params",
    "ramped_steady",
    "southward_tilted_state",
    "asymmetric_state",
]
