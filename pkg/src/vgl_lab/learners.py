"""Weight-update algorithms for value and value-gradient learning.

Four learners, all returning an update (never mutating weights in place):

* ``vl_update``        — classic temporal-difference value learning: move each
                         visited state's value toward its blended target.
* ``vgl_batch_update`` — move each visited state's *value gradient* toward its
                         blended target, computed in one backward pass using
                         only Jacobian-vector products against the weights.
* ``vgl_online_update``— the same update accumulated in a single forward pass
                         with an eligibility-trace matrix; agrees with the
                         batch form to floating-point roundoff.
* ``bptt_update``      — exact policy-gradient ascent on the greedy policy by
                         backpropagation through the known model functions.

The weighting matrix applied to each gradient residual is pluggable. The
``pgl`` kind is the hill-climbing choice: built from the negated inverse
curvature of the lookahead score, it makes the batch update at full
bootstrapping (lam=1) coincide exactly with ``bptt_update`` — the package's
central equivalence check. In that pairing, step 0 receives a zero matrix and
step s>0 receives gamma^(s+1) times the curvature sandwich evaluated at step
s-1: the residual learned at a state is weighted by the sensitivity of the
*decision that produced it*.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    ConfigError,
    DerivativeUndefinedError,
    EpisodicViolationError,
    OmegaSingularError,
    SaturationUnsupportedError,
    SolverFailureError,
    TargetUndefinedError,
)
from .policy import (
    greedy_action,
    policy_state_jacobian,
    policy_weight_jacobian,
    q_action_hessian,
)
from .targets import (
    Trajectory,
    extremality_check,
    rollout,
    target_gradients,
    target_values,
)
from .tolerances import DIVERGENCE_NORM, HESSIAN_COND_LIMIT

ALGORITHMS = ("vl", "vgl_batch", "vgl_online", "bptt")
OMEGA_KINDS = ("identity", "diagonal", "pgl")
SAMPLERS = ("fixed", "uniform")

RUN_LOG_HEADER = "# vgl-lab log v1"
# wall_time_ms stays in the in-memory rows but out of the CSV: same-seed runs
# must produce byte-identical logs
RUN_LOG_COLUMNS = ("iteration", "total_reward", "value_residual_norm",
                   "gradient_residual_norm", "max_dRda", "saturated_fraction")


@dataclass(frozen=True)
class OmegaSpec:
    """Weighting matrix family for gradient residuals.

    identity: I at every step. diagonal: diag(d) with d > 0 elementwise.
    pgl: the hill-climbing sequence described in the module docstring.
    """

    kind: str = "identity"
    diag: tuple | None = None

    def __post_init__(self):
        if self.kind not in OMEGA_KINDS:
            raise ConfigError(f"unknown omega kind {self.kind!r}; "
                              f"expected one of {OMEGA_KINDS}")
        if self.kind == "diagonal":
            if self.diag is None or len(self.diag) == 0:
                raise ConfigError("diagonal omega requires a diag vector")
            if any(d <= 0 for d in self.diag):
                raise ConfigError("diagonal omega entries must be positive")


@dataclass(frozen=True)
class LearnerConfig:
    algorithm: str = "vgl_batch"
    lam: float = 1.0
    gamma: float | None = None       # None: use the environment's default
    alpha: float = 0.02
    omega: OmegaSpec = field(default_factory=OmegaSpec)
    iterations: int = 300
    start_sampler: str = "fixed"
    sampler_halfwidth: float = 1.0
    seed: int = 0
    true_online: bool = False        # apply deltas during the online forward pass

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.algorithm!r}; "
                              f"expected one of {ALGORITHMS}")
        if not (0.0 <= self.lam <= 1.0):
            raise ConfigError(f"lambda must lie in [0, 1], got {self.lam}")
        if self.gamma is not None and not (0.0 <= self.gamma <= 1.0):
            raise ConfigError(f"gamma must lie in [0, 1], got {self.gamma}")
        if self.alpha < 0.0:
            raise ConfigError(f"alpha must be non-negative, got {self.alpha}")
        if self.iterations < 0:
            raise ConfigError(f"iterations must be non-negative, got {self.iterations}")
        if self.start_sampler not in SAMPLERS:
            raise ConfigError(f"unknown start sampler {self.start_sampler!r}; "
                              f"expected one of {SAMPLERS}")


class EligibilityTrace:
    """Weight-by-state workspace matrix for the online learner.

    Starts at zero; each step deposits the current gradient-weight Jacobian
    (times its weighting matrix) and then decays through the closed-loop
    state Jacobian, scaled by lam * gamma.
    """

    def __init__(self, dim_w: int, state_dim: int):
        self.E = np.zeros((dim_w, state_dim))

    def deposit(self, gwj_omega: np.ndarray) -> None:
        self.E = self.E + gwj_omega

    def decay_through(self, lam: float, gamma: float, df_total: np.ndarray) -> None:
        if lam == 0.0:
            self.E = np.zeros_like(self.E)
        else:
            self.E = lam * gamma * (self.E @ df_total)


@dataclass
class UpdateReport:
    """One learner step: the proposed delta and rollout diagnostics."""

    algorithm: str
    delta_w: np.ndarray
    total_reward: float
    value_residuals: np.ndarray | None      # (F,) target minus approximation
    gradient_residuals: np.ndarray | None   # (F, n); one-step residuals online
    saturated_count: int
    omega_condition_max: float


def make_omega(spec: OmegaSpec, *, state_dim, jac=None, hess=None,
               saturated=None) -> np.ndarray:
    """Materialize the weighting matrix for one step.

    For the pgl kind this is the per-step curvature sandwich
    -df_da^T hess^{-1} df_da (positive semi-definite at a greedy action);
    the learner is responsible for the pairing/discount schedule described in
    the module docstring.
    """
    if spec.kind == "identity":
        return np.eye(state_dim)
    if spec.kind == "diagonal":
        d = np.asarray(spec.diag, dtype=float)
        if d.shape != (state_dim,):
            raise ConfigError(f"diagonal omega has {d.shape[0]} entries, "
                              f"state dimension is {state_dim}")
        return np.diag(d)
    # pgl
    if saturated is not None and np.any(saturated):
        raise SaturationUnsupportedError(
            "pgl omega is defined only when every action component is "
            "unsaturated")
    if np.linalg.cond(hess) > HESSIAN_COND_LIMIT:
        raise OmegaSingularError(
            "pgl omega: lookahead-score action curvature is numerically singular")
    sandwich = -jac.df_da.T @ np.linalg.solve(hess, jac.df_da)
    return 0.5 * (sandwich + sandwich.T)


def _resolve_omegas(spec, traj, approx, w, gamma):
    """Effective weighting matrix per step (None means identity), plus the
    worst condition number encountered while building them."""
    F = traj.F
    n = traj.states.shape[1]
    if spec.kind == "identity":
        return [None] * F, 1.0
    if spec.kind == "diagonal":
        mat = make_omega(spec, state_dim=n)
        d = np.asarray(spec.diag, dtype=float)
        return [mat] * F, float(d.max() / d.min())
    # pgl: pair step s with the sandwich from step s-1, discounted once per
    # elapsed step; step 0 gets a zero matrix.
    cond_max = 1.0
    sandwiches = []
    for t in range(F - 1):
        hess = q_action_hessian(traj.env, approx, w, traj.states[t],
                                traj.actions[t], gamma)
        cond_max = max(cond_max, float(np.linalg.cond(hess)))
        sandwiches.append(make_omega(spec, state_dim=n, jac=traj.jacobians[t],
                                     hess=hess, saturated=traj.saturated[t]))
    omegas = [np.zeros((n, n))]
    for s in range(1, F):
        omegas.append(gamma ** (s + 1) * sandwiches[s - 1])
    return omegas, cond_max


def _gamma_of(cfg, env):
    return env.gamma_default if cfg.gamma is None else cfg.gamma


def vl_update(traj: Trajectory, approx, w, cfg: LearnerConfig) -> UpdateReport:
    """Value learning: delta = alpha * sum_t dV/dw_t (V'_t - V_t)."""
    gamma = _gamma_of(cfg, traj.env)
    F = traj.F
    v_target = target_values(traj, approx, w, cfg.lam, gamma)
    v_approx = approx.value_many(traj.states[:F], w)
    residuals = v_target[:F] - v_approx
    delta = np.zeros(approx.dim_w)
    for t in range(F):
        delta += approx.weight_gradient(traj.states[t], w) * residuals[t]
    return UpdateReport(algorithm="vl", delta_w=cfg.alpha * delta,
                        total_reward=traj.total_reward,
                        value_residuals=residuals, gradient_residuals=None,
                        saturated_count=int(traj.saturated.sum()),
                        omega_condition_max=float("nan"))


def vgl_batch_update(traj: Trajectory, approx, w, cfg: LearnerConfig) -> UpdateReport:
    """Value-gradient learning in one backward pass.

    delta = alpha * sum_t (dG/dw)_t Omega_t (G'_t - G_t), accumulated through
    Jacobian-vector products only; the blend vector p carries the recursion.
    """
    gamma = _gamma_of(cfg, traj.env)
    lam = cfg.lam
    F = traj.F
    g_approx = approx.state_gradient_many(traj.states[:F], w)
    omegas, cond_max = _resolve_omegas(cfg.omega, traj, approx, w, gamma)
    if lam == 0.0 and F > 0:
        # every step's target depends only on the approximate gradient at its
        # successor state, so the whole pass collapses to batched contractions
        df_dx, _, dr_dx, _ = traj.jacobian_stacks()
        g_next = np.zeros_like(g_approx)   # the terminal row stays zero
        g_next[:F - 1] = g_approx[1:]
        g_target = dr_dx + gamma * np.einsum("tij,tj->ti", df_dx, g_next)
        residuals = g_target - g_approx
        if omegas[0] is None:
            weighted = residuals
        else:
            weighted = np.einsum("tij,tj->ti", np.stack(omegas), residuals)
        delta = np.einsum(
            "tdn,tn->d",
            approx.full_gradient_weight_jacobian_many(traj.states[:F], w),
            weighted)
        return UpdateReport(algorithm="vgl_batch", delta_w=cfg.alpha * delta,
                            total_reward=traj.total_reward,
                            value_residuals=None, gradient_residuals=residuals,
                            saturated_count=int(traj.saturated.sum()),
                            omega_condition_max=cond_max)
    delta = np.zeros(approx.dim_w)
    residuals = np.zeros_like(g_approx)
    p = np.zeros(traj.states.shape[1])
    for t in range(F - 1, -1, -1):
        jac = traj.jacobians[t]
        try:
            pi_x = policy_state_jacobian(traj.env, approx, w,
                                         traj.states[t], traj.actions[t], gamma)
        except DerivativeUndefinedError as exc:
            raise TargetUndefinedError(
                f"policy state Jacobian undefined at step {t}: {exc}",
                step=t) from exc
        g_target = (jac.dr_dx + pi_x @ jac.dr_da
                    + gamma * (jac.df_dx + pi_x @ jac.df_da) @ p)
        resid = g_target - g_approx[t]
        residuals[t] = resid
        weighted = resid if omegas[t] is None else omegas[t] @ resid
        delta += approx.gradient_weight_jacobian_product(traj.states[t], w, weighted)
        p = lam * g_target + (1.0 - lam) * g_approx[t]
    return UpdateReport(algorithm="vgl_batch", delta_w=cfg.alpha * delta,
                        total_reward=traj.total_reward,
                        value_residuals=None, gradient_residuals=residuals,
                        saturated_count=int(traj.saturated.sum()),
                        omega_condition_max=cond_max)


def vgl_online_update(env, approx, x0, w, cfg: LearnerConfig) -> UpdateReport:
    """Value-gradient learning in one forward pass with an eligibility trace.

    Produces the same total delta as the batch form (to roundoff) when
    true_online is off. With true_online on, each step's contribution is
    applied to the working weights immediately, so later actions and
    residuals see the partially-updated approximator; delta_w then reports
    the net movement.
    """
    gamma = _gamma_of(cfg, env)
    lam = cfg.lam
    w_work = np.asarray(w, dtype=float).copy()
    trace = EligibilityTrace(approx.dim_w, env.state_dim)
    delta = np.zeros(approx.dim_w)
    deltas_seen = []
    sat_count = 0
    cond_max = 1.0
    prev_sandwich = None
    x = env.start_state() if x0 is None else np.asarray(x0, dtype=float)
    t = 0
    total = 0.0
    while not env.is_terminal(x):
        if t >= env.max_horizon:
            raise EpisodicViolationError(
                f"episode exceeded {env.max_horizon} steps without reaching "
                f"a terminal state")
        res = greedy_action(env, approx, w_work, x, gamma)
        x1, r = env.step(x, res.action)
        jac = env.jacobians(x, res.action)
        total += gamma ** t * r
        sat_count += int(res.saturated.sum())

        g_here = approx.state_gradient(x, w_work)
        terminal_next = env.is_terminal(x1)
        g_next = None if terminal_next else approx.state_gradient(x1, w_work)

        if lam == 0.0:
            d_step = jac.dr_dx - g_here
            if not terminal_next:
                d_step = d_step + gamma * jac.df_dx @ g_next
            df_total = None  # trace resets anyway
        else:
            try:
                pi_x = policy_state_jacobian(env, approx, w_work, x, res.action, gamma)
            except DerivativeUndefinedError as exc:
                raise TargetUndefinedError(
                    f"policy state Jacobian undefined at step {t}: {exc}",
                    step=t) from exc
            dr_total = jac.dr_dx + pi_x @ jac.dr_da
            df_total = jac.df_dx + pi_x @ jac.df_da
            d_step = dr_total - g_here
            if not terminal_next:
                d_step = d_step + gamma * df_total @ g_next

        if cfg.omega.kind == "identity":
            omega_t = None
        elif cfg.omega.kind == "diagonal":
            omega_t = make_omega(cfg.omega, state_dim=env.state_dim)
        else:
            omega_t = (np.zeros((env.state_dim, env.state_dim)) if t == 0
                       else gamma ** (t + 1) * prev_sandwich)
            if not terminal_next:
                # the sandwich built here is consumed by the *next* step
                cond_max = max(cond_max, float(np.linalg.cond(res.action_hessian)))
                prev_sandwich = make_omega(cfg.omega, state_dim=env.state_dim,
                                           jac=jac, hess=res.action_hessian,
                                           saturated=res.saturated)

        gwj = approx.full_gradient_weight_jacobian(x, w_work)
        trace.deposit(gwj if omega_t is None else gwj @ omega_t)
        contribution = trace.E @ d_step
        delta += contribution
        deltas_seen.append(d_step)
        if cfg.true_online:
            w_work = w_work + cfg.alpha * contribution
        trace.decay_through(lam, gamma, df_total if df_total is not None
                            else np.zeros((env.state_dim, env.state_dim)))
        x = x1
        t += 1

    if cfg.true_online:
        delta_out = w_work - np.asarray(w, dtype=float)
    else:
        delta_out = cfg.alpha * delta
    return UpdateReport(algorithm="vgl_online", delta_w=delta_out,
                        total_reward=total, value_residuals=None,
                        gradient_residuals=np.array(deltas_seen),
                        saturated_count=sat_count,
                        omega_condition_max=(cond_max if cfg.omega.kind == "pgl"
                                             else float("nan")))


def bptt_update(env, approx, x0, w, cfg: LearnerConfig) -> UpdateReport:
    """Policy-gradient ascent through the model: delta = alpha * dV^pi/dw.

    Requires every action unsaturated (the greedy policy is differentiable in
    the weights only on the interior of the box) and the policy weight
    Jacobian defined at every step.
    """
    gamma = _gamma_of(cfg, env)
    traj = rollout(env, approx, w, x0, gamma)
    if traj.saturated.any():
        raise SaturationUnsupportedError(
            "policy-gradient ascent through the model requires unsaturated "
            "actions at every step")
    g_target = target_gradients(traj, approx, w, 1.0, gamma)
    delta = np.zeros(approx.dim_w)
    for t in range(traj.F):
        jac = traj.jacobians[t]
        pi_w = policy_weight_jacobian(env, approx, w, traj.states[t],
                                      traj.actions[t], gamma)
        bracket = jac.dr_da + gamma * jac.df_da @ g_target[t + 1]
        delta += gamma ** t * pi_w @ bracket
    return UpdateReport(algorithm="bptt", delta_w=cfg.alpha * delta,
                        total_reward=traj.total_reward,
                        value_residuals=None, gradient_residuals=None,
                        saturated_count=0, omega_condition_max=float("nan"))


# -- training loop ---------------------------------------------------------------


@dataclass
class RunLogRow:
    iteration: int
    total_reward: float
    value_residual_norm: float
    gradient_residual_norm: float
    max_dRda: float
    saturated_fraction: float
    wall_time_ms: float


@dataclass
class RunLog:
    rows: list
    final_w: np.ndarray
    diverged: bool


def _sample_start(env, cfg, rng):
    if cfg.start_sampler == "fixed":
        return env.start_state()
    x = env.start_state().copy()
    hw = cfg.sampler_halfwidth
    x[:env.time_index] = rng.uniform(-hw, hw, env.time_index)
    return x


def _residual_norms(traj, approx, w, cfg, gamma):
    F = traj.F
    v_target = target_values(traj, approx, w, cfg.lam, gamma)
    v_approx = approx.value_many(traj.states[:F], w)
    v_norm = float(np.max(np.abs(v_target[:F] - v_approx))) if F else 0.0
    try:
        g_target = target_gradients(traj, approx, w, cfg.lam, gamma)
        g_approx = approx.state_gradient_many(traj.states[:F], w)
        g_norm = float(np.max(np.linalg.norm(g_target[:F] - g_approx, axis=1)))
    except TargetUndefinedError:
        g_norm = float("nan")
    return v_norm, g_norm


def _metrics_row(iteration, traj, approx, w, cfg, gamma, wall_ms):
    v_norm, g_norm = _residual_norms(traj, approx, w, cfg, gamma)
    extrem = extremality_check(traj, gamma=gamma)
    return RunLogRow(iteration=iteration, total_reward=traj.total_reward,
                     value_residual_norm=v_norm, gradient_residual_norm=g_norm,
                     max_dRda=extrem.max_stationary_residual,
                     saturated_fraction=float(traj.saturated.mean())
                     if traj.F else 0.0,
                     wall_time_ms=wall_ms)


def train(env, approx, cfg: LearnerConfig, w0=None) -> RunLog:
    """Iterate rollout -> update -> apply, logging one row per iteration plus
    a final evaluation row; halts early (diverged=True) when the weight norm
    passes the divergence threshold or stops being finite."""
    w = approx.init_weights(cfg.seed) if w0 is None else np.asarray(w0, dtype=float).copy()
    rng = np.random.default_rng(cfg.seed)
    gamma = _gamma_of(cfg, env)
    rows = []
    diverged = False
    for it in range(cfg.iterations):
        tic = time.perf_counter()
        x0 = _sample_start(env, cfg, rng)
        try:
            if cfg.algorithm == "vl":
                traj = rollout(env, approx, w, x0, gamma)
                report = vl_update(traj, approx, w, cfg)
            elif cfg.algorithm == "vgl_batch":
                traj = rollout(env, approx, w, x0, gamma)
                report = vgl_batch_update(traj, approx, w, cfg)
            elif cfg.algorithm == "vgl_online":
                report = vgl_online_update(env, approx, x0, w, cfg)
                traj = rollout(env, approx, w, x0, gamma)
            else:
                report = bptt_update(env, approx, x0, w, cfg)
                traj = rollout(env, approx, w, x0, gamma)
        except SolverFailureError:
            # the learned value surface broke the greedy search; treat it as
            # numerical divergence and keep the log rows gathered so far
            diverged = True
            break
        w_pre = w
        w = w + report.delta_w
        wall_ms = (time.perf_counter() - tic) * 1000.0
        rows.append(_metrics_row(it, traj, approx, w_pre, cfg, gamma, wall_ms))
        if not np.all(np.isfinite(w)) or np.linalg.norm(w) > DIVERGENCE_NORM:
            diverged = True
            break
    if not diverged:
        tic = time.perf_counter()
        x0 = env.start_state() if cfg.start_sampler == "fixed" else _sample_start(env, cfg, rng)
        traj = rollout(env, approx, w, x0, gamma)
        wall_ms = (time.perf_counter() - tic) * 1000.0
        rows.append(_metrics_row(cfg.iterations, traj, approx, w, cfg, gamma, wall_ms))
    return RunLog(rows=rows, final_w=w, diverged=diverged)


def run_log_to_csv(log: RunLog, path) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(RUN_LOG_HEADER + "\n")
        fh.write(",".join(RUN_LOG_COLUMNS) + "\n")
        for r in log.rows:
            fh.write(",".join([str(r.iteration),
                               repr(float(r.total_reward)),
                               repr(float(r.value_residual_norm)),
                               repr(float(r.gradient_residual_norm)),
                               repr(float(r.max_dRda)),
                               repr(float(r.saturated_fraction))]) + "\n")
