"""Greedy action selection and policy derivatives.

The behaviour policy is implicit: at each state it maximizes the one-step
lookahead score

    q(x, a) = r(x, a) + gamma * V(f(x, a), w)

over the action box. The solver is a projected Newton ascent with a
deterministic multi-start sweep over a coarse probe grid, and it *certifies*
its answer: if the projected gradient at the returned point is not tiny, it
raises instead of silently handing back junk. Everything downstream (rollouts,
learners, verification checks) depends on that certificate.

Policy derivatives come from the implicit-function theorem applied to the
first-order condition dq/da = 0 on the unsaturated components. Components
pinned at a box face contribute exactly-zero Jacobian columns: under a small
perturbation of the state or the weights they stay pinned.

Orientation matches the rest of the package: Jacobians are indexed
D[i, j] = d out_j / d in_i, so chain rules compose by left-multiplication.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import product

import numpy as np

from .errors import DerivativeUndefinedError, SolverFailureError
from .tolerances import (
    EPS_SATURATION,
    HESSIAN_COND_LIMIT,
    SOLVER_BACKTRACK_MAX,
    SOLVER_CERTIFY_GRAD,
    SOLVER_MAX_ITER,
    SOLVER_TARGET_GRAD,
)

PROBE_POINTS_PER_AXIS = 9
MAX_EXTRA_STARTS = 4
ARMIJO_SLOPE = 1e-4


@dataclass(frozen=True)
class GreedyActionResult:
    """Certified maximizer of the one-step lookahead score at one state."""

    action: np.ndarray
    q: float
    action_gradient: np.ndarray   # dq/da at the maximizer
    action_hessian: np.ndarray    # d2q/da2 at the maximizer
    saturated: np.ndarray         # per component: pinned at a face and pushed outward
    iterations: int
    converged: bool


def q_value(env, approx, w, x, a, gamma=None) -> float:
    gamma = env.gamma_default if gamma is None else gamma
    x1, r = env.step(x, a)
    return r + gamma * approx.value(x1, w)


def q_action_gradient(env, approx, w, x, a, gamma=None) -> np.ndarray:
    gamma = env.gamma_default if gamma is None else gamma
    x1, _ = env.step(x, a)
    jac = env.jacobians(x, a)
    return jac.dr_da + gamma * jac.df_da @ approx.state_gradient(x1, w)


def q_action_hessian(env, approx, w, x, a, gamma=None) -> np.ndarray:
    gamma = env.gamma_default if gamma is None else gamma
    x1, _ = env.step(x, a)
    jac = env.jacobians(x, a)
    sd = env.second_derivs(x, a)
    g1 = approx.state_gradient(x1, w)
    h1 = approx.state_hessian(x1, w)
    return sd.d2r_da2 + gamma * (sd.d2f_da2_contracted(g1)
                                 + jac.df_da @ h1 @ jac.df_da.T)


def _q_with_derivs(env, approx, w, x, a, gamma):
    x1, r = env.step(x, a)
    jac = env.jacobians(x, a)
    sd = env.second_derivs(x, a)
    g1 = approx.state_gradient(x1, w)
    h1 = approx.state_hessian(x1, w)
    q = r + gamma * approx.value(x1, w)
    grad = jac.dr_da + gamma * jac.df_da @ g1
    hess = sd.d2r_da2 + gamma * (sd.d2f_da2_contracted(g1)
                                 + jac.df_da @ h1 @ jac.df_da.T)
    return q, grad, hess


def _projected_gradient(a, grad, bounded):
    pg = grad.copy()
    at_hi = bounded & (a >= 1.0)
    at_lo = bounded & (a <= -1.0)
    pg[at_hi] = np.minimum(pg[at_hi], 0.0)
    pg[at_lo] = np.maximum(pg[at_lo], 0.0)
    return pg


def _newton_ascent(env, approx, w, x, a0, gamma):
    """Projected Newton ascent from a0; returns (a, q, grad, hess, iters, ok).

    A trial point is accepted on sufficient value increase, or — because value
    differences sink below machine epsilon long before the gradient does — on
    halving the projected gradient norm.
    """
    bounded = env.action_space.bounded
    a = env.action_space.clip(np.asarray(a0, dtype=float))
    q, grad, hess = _q_with_derivs(env, approx, w, x, a, gamma)
    iters = 0
    for iters in range(1, SOLVER_MAX_ITER + 1):
        pg = np.max(np.abs(_projected_gradient(a, grad, bounded)))
        if pg < SOLVER_TARGET_GRAD:
            return a, q, grad, hess, iters - 1, True
        free = ~((bounded & (a >= 1.0) & (grad >= 0.0))
                 | (bounded & (a <= -1.0) & (grad <= 0.0)))
        step = np.zeros_like(a)
        g_f = grad[free]
        h_ff = hess[np.ix_(free, free)]
        try:
            np.linalg.cholesky(-h_ff)
            step[free] = np.linalg.solve(-h_ff, g_f)
        except np.linalg.LinAlgError:
            # surface not concave here: unit-size ascent step (crosses the
            # whole action box in one move if unobstructed)
            step[free] = 2.0 * g_f / np.max(np.abs(g_f))
        t = 1.0
        accepted = False
        for _ in range(SOLVER_BACKTRACK_MAX):
            a_new = env.action_space.clip(a + t * step)
            move = a_new - a
            if np.max(np.abs(move)) == 0.0:
                break
            q_new, grad_new, hess_new = _q_with_derivs(env, approx, w, x, a_new, gamma)
            pg_new = np.max(np.abs(_projected_gradient(a_new, grad_new, bounded)))
            if (q_new >= q + ARMIJO_SLOPE * float(grad @ move)
                    or pg_new <= 0.5 * pg):
                a, q, grad, hess = a_new, q_new, grad_new, hess_new
                accepted = True
                break
            t *= 0.5
        if not accepted:
            break
    pg = np.max(np.abs(_projected_gradient(a, grad, bounded)))
    ok = pg < SOLVER_TARGET_GRAD
    return a, q, grad, hess, iters, ok


def _probe_actions(action_space):
    """Deterministic coarse grid over the bounded components (empty if none)."""
    if not np.any(action_space.bounded):
        return np.empty((0, action_space.dim))
    axes = []
    for i in range(action_space.dim):
        if action_space.bounded[i]:
            axes.append(np.linspace(-1.0, 1.0, PROBE_POINTS_PER_AXIS))
        else:
            axes.append(np.array([0.0]))
    return np.array([p for p in product(*axes)])


def greedy_action(env, approx, w, x, gamma=None) -> GreedyActionResult:
    """Maximize the one-step lookahead score over the action box.

    Runs Newton from a zero start, then from any coarse-grid probe that beats
    the incumbent, and certifies the winner's projected gradient. Raises
    SolverFailureError when certification fails (e.g. an unbounded problem
    whose score surface has lost concavity).
    """
    gamma = env.gamma_default if gamma is None else gamma
    x = np.asarray(x, dtype=float)
    m = env.action_space.dim

    a, q, grad, hess, iters, ok = _newton_ascent(env, approx, w, x, np.zeros(m), gamma)
    total_iters = iters

    probes = _probe_actions(env.action_space)
    if probes.shape[0]:
        nxt, rew = env.step_many(x, probes)
        q_probe = rew + gamma * approx.value_many(nxt, w)
        order = np.argsort(-q_probe, kind="stable")
        extra = 0
        for idx in order:
            if extra >= MAX_EXTRA_STARTS or q_probe[idx] <= q + 1e-12:
                break
            a2, q2, grad2, hess2, it2, ok2 = _newton_ascent(
                env, approx, w, x, probes[idx], gamma)
            total_iters += it2
            extra += 1
            if q2 > q + 1e-12 or (not ok and ok2):
                a, q, grad, hess, ok = a2, q2, grad2, hess2, ok2

    pg = _projected_gradient(a, grad, env.action_space.bounded)
    pg_norm = float(np.max(np.abs(pg))) if m else 0.0
    if pg_norm >= SOLVER_CERTIFY_GRAD:
        raise SolverFailureError(
            f"greedy action search did not certify on {env.name}: "
            f"projected gradient {pg_norm:.3e} after {total_iters} iterations",
            state=x, grad_norm=pg_norm, iterations=total_iters)
    saturated = env.action_space.bounded & (np.abs(a) >= 1.0) & (a * grad > EPS_SATURATION)
    return GreedyActionResult(action=a, q=q, action_gradient=grad,
                              action_hessian=hess, saturated=saturated,
                              iterations=total_iters, converged=True)


def _pinned_mask(env, a):
    return env.action_space.bounded & (np.abs(np.asarray(a)) >= 1.0)


def _solve_free_block(hess, rhs, free, what):
    """Solve columns of the implicit-function system on the free block."""
    out = np.zeros_like(rhs)
    if not np.any(free):
        return out
    h_ff = hess[np.ix_(free, free)]
    if np.linalg.cond(h_ff) > HESSIAN_COND_LIMIT:
        raise DerivativeUndefinedError(
            f"{what}: lookahead-score curvature is singular on the free action block")
    out[:, free] = -np.linalg.solve(h_ff.T, rhs[:, free].T).T
    return out


def policy_state_jacobian(env, approx, w, x, action, gamma=None) -> np.ndarray:
    """d(greedy action)/d(state) at a solved action, shape (n, m).

    Columns for components pinned at a box face are exactly zero; free
    components come from differentiating the stationarity condition.
    """
    gamma = env.gamma_default if gamma is None else gamma
    x = np.asarray(x, dtype=float)
    a = np.asarray(action, dtype=float)
    x1, _ = env.step(x, a)
    jac = env.jacobians(x, a)
    sd = env.second_derivs(x, a)
    g1 = approx.state_gradient(x1, w)
    h1 = approx.state_hessian(x1, w)
    hess = sd.d2r_da2 + gamma * (sd.d2f_da2_contracted(g1)
                                 + jac.df_da @ h1 @ jac.df_da.T)
    cross = sd.d2r_dxda + gamma * (sd.d2f_dxda_contracted(g1)
                                   + jac.df_dx @ h1 @ jac.df_da.T)
    free = ~_pinned_mask(env, a)
    return _solve_free_block(hess, cross, free, "policy_state_jacobian")


def policy_weight_jacobian(env, approx, w, x, action, gamma=None) -> np.ndarray:
    """d(greedy action)/d(weights) at a solved action, shape (dim_w, m)."""
    gamma = env.gamma_default if gamma is None else gamma
    x = np.asarray(x, dtype=float)
    a = np.asarray(action, dtype=float)
    x1, _ = env.step(x, a)
    jac = env.jacobians(x, a)
    sd = env.second_derivs(x, a)
    g1 = approx.state_gradient(x1, w)
    h1 = approx.state_hessian(x1, w)
    hess = sd.d2r_da2 + gamma * (sd.d2f_da2_contracted(g1)
                                 + jac.df_da @ h1 @ jac.df_da.T)
    cross = gamma * approx.full_gradient_weight_jacobian(x1, w) @ jac.df_da.T
    free = ~_pinned_mask(env, a)
    return _solve_free_block(hess, cross, free, "policy_weight_jacobian")
