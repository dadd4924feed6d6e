"""Rollouts and every backward-pass learning target.

Value targets and value-gradient targets are both defined by backward
recursions along a cached greedy trajectory, blended by the bootstrapping
parameter lambda: 0 trusts the current approximation at the next state, 1
trusts only the recursively-computed target.

Two different "gradients along a trajectory" live here and must not be
confused:

* ``target_gradients`` produces the learning targets for the value gradient.
  For lambda > 0 the recursion moves through the closed loop, so it needs
  the greedy policy's state Jacobian at every step. For lambda = 0 the
  policy term multiplies the action gradient of the lookahead score — zero
  at a certified greedy action — so the plain-partial form is used and the
  policy Jacobian is never evaluated.
* ``reward_derivatives`` is policy-independent: it differentiates the
  discounted total reward of the *fixed recorded action sequence* (open
  loop), via the costate recursion. Its action row is what local-extremality
  claims are about.

At the final backward step the blend vector is exactly zero — the target at
a terminal state is zero by definition, and the recursion never evaluates
the approximator's gradient at the terminal state (whose time component
carries a harmless but nonzero raw-output artifact).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import (
    DerivativeUndefinedError,
    EpisodicViolationError,
    TargetUndefinedError,
)
from .policy import greedy_action, policy_state_jacobian
from .tolerances import DEFAULT_TOLERANCES

STATIONARY = "stationary"
SATURATED_HIGH = "saturated-high"
SATURATED_LOW = "saturated-low"
VIOLATION = "violation"

TRAJECTORY_CSV_HEADER = "# vgl-lab trajectory v1"


@dataclass
class Trajectory:
    """A cached greedy rollout: states, actions, rewards and per-step model data.

    states has F+1 rows (the last is terminal), actions/rewards/saturated have
    F rows, jacobians holds one ModelJacobians per step. gamma is the discount
    the rollout was produced under.
    """

    env: object
    states: np.ndarray
    actions: np.ndarray
    rewards: np.ndarray
    saturated: np.ndarray
    jacobians: list
    gamma: float

    @property
    def F(self) -> int:
        return self.actions.shape[0]

    @property
    def total_reward(self) -> float:
        return float(self.rewards @ self.gamma ** np.arange(self.F))

    def jacobian_stacks(self):
        """The per-step model Jacobians as four stacked arrays
        (df_dx (F,n,n), df_da (F,m,n), dr_dx (F,n), dr_da (F,m)), built once
        and cached so batched backward passes avoid per-step assembly."""
        stacks = getattr(self, "_jacobian_stacks", None)
        if stacks is None:
            stacks = (np.stack([j.df_dx for j in self.jacobians]),
                      np.stack([j.df_da for j in self.jacobians]),
                      np.stack([j.dr_dx for j in self.jacobians]),
                      np.stack([j.dr_da for j in self.jacobians]))
            self._jacobian_stacks = stacks
        return stacks


@dataclass(frozen=True)
class TargetBundle:
    """Value and value-gradient targets for one trajectory (rows 0..F)."""

    v_target: np.ndarray   # (F+1,), last entry 0
    g_target: np.ndarray   # (F+1, n), last row 0
    lam: float
    gamma: float


def _check_lambda(lam):
    if not (0.0 <= lam <= 1.0):
        raise ValueError(f"lambda must lie in [0, 1], got {lam}")


def rollout(env, approx, w, x0=None, gamma=None) -> Trajectory:
    """Run the greedy policy from x0 (default: env start state) to termination."""
    gamma = env.gamma_default if gamma is None else gamma
    x = env.start_state() if x0 is None else np.asarray(x0, dtype=float)
    states, actions, rewards, sats, jacs = [x], [], [], [], []
    while not env.is_terminal(x):
        if len(actions) >= env.max_horizon:
            raise EpisodicViolationError(
                f"{env.name}: episode exceeded max_horizon={env.max_horizon}")
        res = greedy_action(env, approx, w, x, gamma)
        x1, r = env.step(x, res.action)
        actions.append(res.action)
        rewards.append(r)
        sats.append(res.saturated)
        jacs.append(env.jacobians(x, res.action))
        states.append(x1)
        x = x1
    return Trajectory(env=env, states=np.array(states), actions=np.array(actions),
                      rewards=np.array(rewards), saturated=np.array(sats),
                      jacobians=jacs, gamma=gamma)


def replay(env, x0, actions, gamma=None) -> Trajectory:
    """Open-loop replay of a fixed action sequence until termination."""
    gamma = env.gamma_default if gamma is None else gamma
    x = np.asarray(x0, dtype=float)
    actions = np.asarray(actions, dtype=float)
    states, rewards, jacs, sats = [x], [], [], []
    t = 0
    while not env.is_terminal(x):
        if t >= actions.shape[0]:
            raise EpisodicViolationError(
                f"{env.name}: action sequence exhausted after {t} steps "
                "without reaching a terminal state")
        a = actions[t]
        x1, r = env.step(x, a)
        rewards.append(r)
        jacs.append(env.jacobians(x, a))
        sats.append(env.action_space.bounded & (np.abs(a) >= 1.0))
        states.append(x1)
        x = x1
        t += 1
    return Trajectory(env=env, states=np.array(states), actions=actions[:t].copy(),
                      rewards=np.array(rewards), saturated=np.array(sats),
                      jacobians=jacs, gamma=gamma)


def total_reward(env, x0, actions, gamma=None) -> float:
    """Discounted total reward of an open-loop action sequence from x0."""
    return replay(env, x0, actions, gamma).total_reward


def target_values(traj: Trajectory, approx, w, lam, gamma=None) -> np.ndarray:
    """Backward-recursive value targets, rows 0..F with the last pinned to 0."""
    _check_lambda(lam)
    gamma = traj.gamma if gamma is None else gamma
    F = traj.F
    v_approx = approx.value_many(traj.states[1:], w)  # entries for t = 1..F
    out = np.zeros(F + 1)
    for t in range(F - 1, -1, -1):
        out[t] = traj.rewards[t] + gamma * (lam * out[t + 1]
                                            + (1.0 - lam) * v_approx[t])
    return out


def lambda_return(traj: Trajectory, approx, w, lam, gamma=None) -> np.ndarray:
    """Direct (non-recursive) lambda-mixture of truncated n-step returns.

    For each start step t, the n-step return bootstraps the approximate value
    after n real rewards; the mixture weights are (1-lam)*lam^(n-1) with all
    remaining mass lam^(F-t-1) on the full remaining sum. Agrees with
    target_values at every step — that identity is one of the package's
    verification checks, so this deliberately shares no code with it.
    """
    _check_lambda(lam)
    gamma = traj.gamma if gamma is None else gamma
    F = traj.F
    v_approx = approx.value_many(traj.states, w)
    out = np.empty(F)
    for t in range(F):
        horizon = F - t
        # n-step returns R^(n) for n = 1..horizon
        nstep = np.empty(horizon)
        running = 0.0
        for n in range(1, horizon + 1):
            running += gamma ** (n - 1) * traj.rewards[t + n - 1]
            nstep[n - 1] = running + gamma ** n * v_approx[t + n]
        mix = lam ** (horizon - 1) * nstep[-1]
        for n in range(1, horizon):
            mix += (1.0 - lam) * lam ** (n - 1) * nstep[n - 1]
        out[t] = mix
    return out


def target_gradients(traj: Trajectory, approx, w, lam, gamma=None) -> np.ndarray:
    """Backward-recursive value-gradient targets, rows 0..F with the last 0.

    lambda = 0 uses plain model partials (the closed-loop correction would
    multiply the action gradient of the lookahead score, which a certified
    greedy action makes zero). lambda > 0 moves the recursion through the
    closed loop, so an undefined policy Jacobian at some step makes every
    earlier target undefined: reported as TargetUndefinedError naming the step.
    """
    _check_lambda(lam)
    gamma = traj.gamma if gamma is None else gamma
    F = traj.F
    n = traj.states.shape[1]
    out = np.zeros((F + 1, n))
    # approximate value gradients at the visited non-terminal states 0..F-1
    g_approx = approx.state_gradient_many(traj.states[:F], w)
    p = np.zeros(n)
    for t in range(F - 1, -1, -1):
        jac = traj.jacobians[t]
        if lam == 0.0:
            out[t] = jac.dr_dx + gamma * jac.df_dx @ p
            p = g_approx[t]
            continue
        try:
            pi_x = policy_state_jacobian(traj.env, approx, w,
                                         traj.states[t], traj.actions[t], gamma)
        except DerivativeUndefinedError as exc:
            raise TargetUndefinedError(
                f"policy state Jacobian undefined at step {t}: {exc}; "
                f"gradient targets are undefined at this and every earlier step",
                step=t) from exc
        dr = jac.dr_dx + pi_x @ jac.dr_da
        df = jac.df_dx + pi_x @ jac.df_da
        out[t] = dr + gamma * df @ p
        p = lam * out[t] + (1.0 - lam) * g_approx[t]
    return out


def make_targets(traj, approx, w, lam, gamma=None) -> TargetBundle:
    gamma = traj.gamma if gamma is None else gamma
    return TargetBundle(v_target=target_values(traj, approx, w, lam, gamma),
                        g_target=target_gradients(traj, approx, w, lam, gamma),
                        lam=lam, gamma=gamma)


def reward_derivatives(traj: Trajectory, gamma=None):
    """Costate recursion: sensitivities of discounted total reward.

    Returns (dR_dx, dR_da) with shapes (F+1, n) and (F, m): the derivative of
    the open-loop discounted reward sum with respect to each visited state and
    each recorded action, holding all other actions fixed.
    """
    gamma = traj.gamma if gamma is None else gamma
    F = traj.F
    dR_dx = np.zeros((F + 1, traj.states.shape[1]))
    dR_da = np.zeros_like(traj.actions)
    for t in range(F - 1, -1, -1):
        jac = traj.jacobians[t]
        dR_dx[t] = jac.dr_dx + gamma * jac.df_dx @ dR_dx[t + 1]
        dR_da[t] = jac.dr_da + gamma * jac.df_da @ dR_dx[t + 1]
    return dR_dx, dR_da


@dataclass(frozen=True)
class ExtremalityReport:
    """Per-step, per-component local-extremality classification."""

    classifications: list   # F lists of m labels
    dR_da: np.ndarray       # (F, m) costate action sensitivities
    passed: bool            # no violations at the tolerance
    max_stationary_residual: float  # largest |dR/da| over non-saturated slots
    counts: dict


def extremality_check(traj: Trajectory, tol=None, gamma=None) -> ExtremalityReport:
    """Classify every action component against the local-extremality conditions.

    A component is consistent with a local extremum when its total-reward
    sensitivity is zero (stationary), or when it sits pinned at a box face
    with the sensitivity pushing further outward (saturated-high/-low).
    Anything else is a violation: the recorded action sequence provably
    admits a first-order improvement.
    """
    tol = DEFAULT_TOLERANCES.extremality if tol is None else tol
    _, dR_da = reward_derivatives(traj, gamma)
    bounded = traj.env.action_space.bounded
    classes = []
    counts = {STATIONARY: 0, SATURATED_HIGH: 0, SATURATED_LOW: 0, VIOLATION: 0}
    max_resid = 0.0
    for t in range(traj.F):
        row = []
        for i in range(traj.actions.shape[1]):
            a, g = traj.actions[t, i], dR_da[t, i]
            if abs(g) <= tol:
                label = STATIONARY
            elif bounded[i] and a >= 1.0 and g > tol:
                label = SATURATED_HIGH
            elif bounded[i] and a <= -1.0 and g < -tol:
                label = SATURATED_LOW
            else:
                label = VIOLATION
            if label in (STATIONARY, VIOLATION):
                max_resid = max(max_resid, abs(g))
            counts[label] += 1
            row.append(label)
        classes.append(row)
    return ExtremalityReport(classifications=classes, dR_da=dR_da,
                             passed=counts[VIOLATION] == 0,
                             max_stationary_residual=max_resid, counts=counts)


def trajectory_to_csv(traj: Trajectory, path) -> None:
    """One row per step (t, state, action, reward, saturation flags), plus a
    final row holding the terminal state with the action fields blank."""
    n = traj.states.shape[1]
    m = traj.actions.shape[1]
    with open(path, "w", newline="") as fh:
        fh.write(TRAJECTORY_CSV_HEADER + "\n")
        writer = csv.writer(fh)
        writer.writerow(["t"] + [f"x{i}" for i in range(n)]
                        + [f"a{i}" for i in range(m)] + ["r"]
                        + [f"sat{i}" for i in range(m)])
        for t in range(traj.F):
            writer.writerow([t] + [repr(float(v)) for v in traj.states[t]]
                            + [repr(float(v)) for v in traj.actions[t]]
                            + [repr(float(traj.rewards[t]))]
                            + [int(v) for v in traj.saturated[t]])
        writer.writerow([traj.F] + [repr(float(v)) for v in traj.states[traj.F]]
                        + [""] * m + [""] + [""] * m)
