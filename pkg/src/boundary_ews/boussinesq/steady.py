"""Steady states and parameter continuation for the convection model.

Newton's method runs on the stacked interior unknowns with the analytic
Jacobian from :mod:`.model`.  The salinity field is only determined up to an
additive constant (no-flux walls), so every solve is *bordered*: one row pins
the weighted salinity integral and one column absorbs the corresponding null
direction, making the extended matrix nonsingular.

Two sweep strategies are provided: natural-parameter continuation (warm
restarts along a p-list, with step halving and a fold diagnostic on failure)
and pseudo-arclength continuation, which parameterizes the branch by arclength
and walks through folds, reporting them as sign changes of dp/ds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from scipy import sparse
from scipy.sparse.linalg import splu

from .model import (
    LinearBlocks,
    ModelOperators,
    StateFields,
    assemble_linearization,
    interior_vector,
    reconstruct_state,
    residual,
)

__all__ = [
    "NewtonError",
    "StepSizeUnderflow",
    "BranchPoint",
    "Branch",
    "newton_solve",
    "rest_state",
    "steady_from_rest",
    "continuation_natural",
    "continuation_arclength",
]


class NewtonError(RuntimeError):
    """Newton iteration failed to converge or hit a singular Jacobian."""


class StepSizeUnderflow(RuntimeError):
    """Arclength step shrank below the configured minimum."""


@dataclass
class BranchPoint:
    p: float
    state: StateFields
    eigenvalues: np.ndarray | None = None
    stable: bool | None = None
    tag: str = ""

    @property
    def max_psi(self) -> float:
        return float(self.state.psi.max())


@dataclass
class Branch:
    points: list[BranchPoint] = field(default_factory=list)
    fold_detected: bool = False
    fold_p: float | None = None
    messages: list[str] = field(default_factory=list)

    @property
    def p_values(self) -> np.ndarray:
        return np.array([pt.p for pt in self.points])


def _pin_vectors(ops: ModelOperators):
    """Constraint row (weighted S integral) and companion column (S-equation rows)."""
    k = ops.grid.num_interior
    w = ops.grid.weights_flat
    row = np.concatenate([np.zeros(3 * k), w])
    col = np.concatenate([np.zeros(3 * k), np.full(k, 1.0 / k)])
    return row, col


def _projection_border(ops: ModelOperators, blocks: LinearBlocks):
    """Rank-one pair (column, row) representing the S mean-removal.

    The mean-free S tendency has Jacobian ``J - col @ row`` where ``J`` is the
    raw block Jacobian; folding the pair into a bordered solve keeps the sparse
    factorization exact without densifying anything.
    """
    k = ops.grid.num_interior
    total = float(ops.grid.weights_flat.sum())
    col = np.concatenate([np.zeros(3 * k), np.full(k, 1.0 / total)])
    return col, blocks.salt_drift_row


def _dynamic_residual_vector(ops: ModelOperators, x: np.ndarray) -> np.ndarray:
    state = reconstruct_state(ops, x)
    full = residual(ops, state)
    return full[: 4 * ops.grid.num_interior]


def _full_jacobian(blocks: LinearBlocks) -> sparse.csr_matrix:
    return sparse.bmat(
        [[blocks.a11, blocks.a12], [blocks.a21, blocks.a22]]
    ).tocsr()


def newton_solve(
    ops: ModelOperators,
    initial: StateFields,
    tol: float = 1e-8,
    max_iter: int = 30,
    pin_target: float | None = None,
) -> StateFields:
    """Solve for a steady state; the weighted S-integral is held at ``pin_target``.

    When ``pin_target`` is None the initial guess's value is used, i.e. the
    gauge is inherited from the guess.  Raises :class:`NewtonError` on
    non-convergence or a singular (beyond the pinned direction) Jacobian.
    """
    k = ops.grid.num_interior
    x = interior_vector(ops, initial)
    pin_row, pin_col = _pin_vectors(ops)
    if pin_target is None:
        pin_target = float(pin_row @ x)

    def merit(vec: np.ndarray) -> tuple[np.ndarray, float]:
        r = _dynamic_residual_vector(ops, vec)
        pr = float(pin_row @ vec) - pin_target
        return r, max(np.max(np.abs(r)), abs(pr))

    r, norm = merit(x)
    overshoots = 0
    for _ in range(max_iter):
        if norm < tol:
            return reconstruct_state(ops, x)
        state = reconstruct_state(ops, x)
        blocks = assemble_linearization(ops, state)
        jac = _full_jacobian(blocks)
        proj_col, drift_row = _projection_border(ops, blocks)
        bordered = sparse.bmat(
            [
                [
                    jac,
                    sparse.csr_matrix(-proj_col[:, None]),
                    sparse.csr_matrix(pin_col[:, None]),
                ],
                [sparse.csr_matrix(drift_row[None, :]), sparse.csr_matrix([[-1.0]]), None],
                [sparse.csr_matrix(pin_row[None, :]), None, None],
            ],
            format="csc",
        )
        rhs = np.concatenate([-r, [0.0], [pin_target - float(pin_row @ x)]])
        try:
            delta = splu(bordered).solve(rhs)[: 4 * k]
        except RuntimeError as exc:  # singular factorization
            raise NewtonError(f"singular Jacobian: {exc}") from exc
        step = 1.0
        accepted = False
        for _ in range(6):
            trial = x + step * delta
            r_trial, norm_trial = merit(trial)
            if norm_trial < norm or norm_trial < tol:
                x, r, norm = trial, r_trial, norm_trial
                overshoots = 0
                accepted = True
                break
            step *= 0.5
        if not accepted:
            # Outside the quadratic basin a full step can raise the residual
            # for an iteration or two before contraction kicks in; damping does
            # not help there.  Take the full step, but give up if several in a
            # row fail to find any decrease.
            overshoots += 1
            if overshoots > 3:
                raise NewtonError(f"line search stalled at residual {norm:.3e}")
            x = x + delta
            r, norm = merit(x)
    if norm < tol:
        return reconstruct_state(ops, x)
    raise NewtonError(f"no convergence after {max_iter} iterations ({norm:.3e})")


def rest_state(ops: ModelOperators) -> StateFields:
    """Zero-flow initial guess: psi = omega = S = 0, T from pure diffusion."""
    g = ops.grid
    lap_t = (ops.diff.laplacian @ ops.bounds.temperature.extend).tocsc()
    rhs = -(ops.diff.laplacian @ ops.bounds.temperature.offset)
    t_int = splu(lap_t).solve(rhs)
    x = np.zeros(4 * g.num_interior)
    x[2 * g.num_interior : 3 * g.num_interior] = t_int
    return reconstruct_state(ops, x)


def steady_from_rest(
    ops: ModelOperators,
    relax_time: float = 100.0,
    dt: float = 1e-2,
    tol: float = 1e-8,
    max_iter: int = 40,
) -> StateFields:
    """Time-relax from rest toward the attractor, then polish with Newton."""
    from .simulate import relax_to_steady

    guess = rest_state(ops)
    if relax_time > 0:
        guess = relax_to_steady(ops, guess, t_end=relax_time, dt=dt)
    return newton_solve(ops, guess, tol=tol, max_iter=max_iter)


def continuation_natural(
    grid_ops: ModelOperators,
    p_list,
    initial: StateFields,
    tol: float = 1e-8,
    max_iter: int = 30,
    max_halvings: int = 4,
) -> Branch:
    """Warm-started Newton sweep over ``p_list``.

    On failure the step from the last converged p is halved (up to
    ``max_halvings`` times); persistent failure stops the sweep with a fold
    diagnostic instead of raising.
    """
    p_list = list(p_list)
    if not p_list:
        raise ValueError("empty p list")
    branch = Branch()
    ops = grid_ops.with_p(p_list[0])
    state = newton_solve(ops, initial, tol=tol, max_iter=max_iter)
    pin_row, _ = _pin_vectors(ops)
    pin_target = float(pin_row @ interior_vector(ops, state))
    branch.points.append(BranchPoint(p=p_list[0], state=state))
    for p_next in p_list[1:]:
        p_prev = branch.points[-1].p
        state_prev = branch.points[-1].state
        target, halvings = p_next, 0
        while True:
            ops = grid_ops.with_p(target)
            try:
                state_new = newton_solve(
                    ops, state_prev, tol=tol, max_iter=max_iter, pin_target=pin_target
                )
            except NewtonError:
                halvings += 1
                if halvings > max_halvings:
                    branch.fold_detected = True
                    branch.fold_p = target
                    branch.messages.append(
                        f"no convergence between p={p_prev:.6g} and p={p_next:.6g}"
                    )
                    return branch
                target = 0.5 * (p_prev + target)
                continue
            branch.points.append(BranchPoint(p=target, state=state_new))
            p_prev, state_prev = target, state_new
            if target == p_next:
                break
            target = p_next
            halvings = 0
    return branch


def continuation_arclength(
    grid_ops: ModelOperators,
    p_start: float,
    p_max: float,
    ds: float,
    initial: StateFields,
    tol: float = 1e-8,
    max_iter: int = 12,
    max_steps: int = 200,
    ds_min: float = 1e-6,
    ds_max: float | None = None,
    steps_after_fold: int = 5,
) -> Branch:
    """Pseudo-arclength sweep from ``p_start`` toward ``p_max``.

    The arclength metric weights the state block by its root-mean-square so
    that the parameter keeps an O(1) share of the tangent; otherwise ds would
    measure nearly pure state motion and p would crawl.  Traverses folds; each
    fold is logged (sign change of dp/ds).  Stops after ``steps_after_fold``
    accepted steps past the first fold, when p leaves the sweep range, or when
    the step size underflows (raised as :class:`StepSizeUnderflow`).
    """
    ds_max = ds_max or 4 * abs(ds)
    k4 = 4 * grid_ops.grid.num_interior
    theta2 = 1.0 / k4
    ops = grid_ops.with_p(p_start)
    state = newton_solve(ops, initial, tol=tol, max_iter=30)
    pin_row, pin_col = _pin_vectors(ops)
    pin_target = float(pin_row @ interior_vector(ops, state))

    branch = Branch()
    branch.points.append(BranchPoint(p=p_start, state=state))

    x = interior_vector(ops, state)
    p = p_start
    tangent = np.concatenate([np.zeros(k4), [1.0]])  # prefer increasing p first

    def extended_matrix(
        ops_at_p: ModelOperators, blocks: LinearBlocks, tan: np.ndarray
    ) -> sparse.csc_matrix:
        jac = _full_jacobian(blocks)
        proj_col, drift_row = _projection_border(ops_at_p, blocks)
        f_p = np.concatenate(
            [np.zeros(grid_ops.grid.num_interior), blocks.p_derivative]
        )
        return sparse.bmat(
            [
                [
                    jac,
                    sparse.csr_matrix(-proj_col[:, None]),
                    sparse.csr_matrix(pin_col[:, None]),
                    sparse.csr_matrix(f_p[:, None]),
                ],
                [
                    sparse.csr_matrix(drift_row[None, :]),
                    sparse.csr_matrix([[-1.0]]),
                    None,
                    None,
                ],
                [sparse.csr_matrix(pin_row[None, :]), None, None, None],
                [
                    sparse.csr_matrix(theta2 * tan[None, :k4]),
                    None,
                    None,
                    sparse.csr_matrix([[tan[k4]]]),
                ],
            ],
            format="csc",
        )

    steps_since_fold = None
    for _ in range(max_steps):
        ops = grid_ops.with_p(p)
        blocks = assemble_linearization(ops, reconstruct_state(ops, x))
        lu = splu(extended_matrix(ops, blocks, tangent))
        t_sol = lu.solve(np.concatenate([np.zeros(k4 + 2), [1.0]]))
        t_x, t_p = t_sol[:k4], t_sol[k4 + 2]
        scale = np.sqrt(theta2 * np.dot(t_x, t_x) + t_p * t_p)
        t_x, t_p = t_x / scale, t_p / scale
        if theta2 * (tangent[:k4] @ t_x) + tangent[k4] * t_p < 0:
            t_x, t_p = -t_x, -t_p
        new_tangent = np.concatenate([t_x, [t_p]])

        if len(branch.points) > 1 and np.sign(t_p) != np.sign(tangent[k4]) != 0:
            if not branch.fold_detected:
                # dp/ds changed sign between the last two samples; the latest
                # accepted p is the closest bracketing value.
                branch.fold_detected = True
                branch.fold_p = p
                branch.messages.append(f"fold near p={p:.6g}")
                steps_since_fold = 0
        tangent = new_tangent

        step = abs(ds)
        while True:
            x_pred = x + step * t_x
            p_pred = p + step * t_p
            try:
                x_new, p_new = _arclength_corrector(
                    grid_ops,
                    x_pred,
                    p_pred,
                    np.concatenate([t_x, [t_p]]),
                    x,
                    p,
                    step,
                    theta2,
                    pin_row,
                    pin_col,
                    pin_target,
                    tol,
                    max_iter,
                )
                break
            except NewtonError:
                step *= 0.5
                if step < ds_min:
                    raise StepSizeUnderflow(
                        f"arclength step fell below {ds_min:g} near p={p:.6g}"
                    ) from None
        ds = min(step * 1.3, ds_max)
        x, p = x_new, p_new
        branch.points.append(
            BranchPoint(p=p, state=reconstruct_state(grid_ops.with_p(p), x))
        )
        if steps_since_fold is not None:
            steps_since_fold += 1
            if steps_since_fold >= steps_after_fold:
                break
        if p > p_max or p < p_start - 0.5 * abs(p_max - p_start):
            break
    return branch


def _arclength_corrector(
    grid_ops: ModelOperators,
    x: np.ndarray,
    p: float,
    tangent: np.ndarray,
    x0: np.ndarray,
    p0: float,
    ds: float,
    theta2: float,
    pin_row: np.ndarray,
    pin_col: np.ndarray,
    pin_target: float,
    tol: float,
    max_iter: int,
):
    k4 = x.size
    t_x, t_p = tangent[:k4], tangent[k4]
    for _ in range(max_iter):
        ops = grid_ops.with_p(p)
        r = _dynamic_residual_vector(ops, x)
        pin_res = float(pin_row @ x) - pin_target
        arc_res = theta2 * float(t_x @ (x - x0)) + t_p * (p - p0) - ds
        norm = max(np.max(np.abs(r)), abs(pin_res), abs(arc_res))
        if norm < tol:
            return x, p
        blocks = assemble_linearization(ops, reconstruct_state(ops, x))
        jac = _full_jacobian(blocks)
        proj_col, drift_row = _projection_border(ops, blocks)
        f_p = np.concatenate([np.zeros(ops.grid.num_interior), blocks.p_derivative])
        mat = sparse.bmat(
            [
                [
                    jac,
                    sparse.csr_matrix(-proj_col[:, None]),
                    sparse.csr_matrix(pin_col[:, None]),
                    sparse.csr_matrix(f_p[:, None]),
                ],
                [
                    sparse.csr_matrix(drift_row[None, :]),
                    sparse.csr_matrix([[-1.0]]),
                    None,
                    None,
                ],
                [sparse.csr_matrix(pin_row[None, :]), None, None, None],
                [
                    sparse.csr_matrix(theta2 * t_x[None, :]),
                    None,
                    None,
                    sparse.csr_matrix([[t_p]]),
                ],
            ],
            format="csc",
        )
        try:
            delta = splu(mat).solve(np.concatenate([-r, [0.0, -pin_res, -arc_res]]))
        except RuntimeError as exc:
            raise NewtonError(str(exc)) from exc
        x = x + delta[:k4]
        p = p + delta[k4 + 2]
    raise NewtonError("corrector did not converge")
