"""Deterministic episodic control models.

State vectors are flat float64 arrays. Every shipped environment appends one
extra component to the physical state: the normalized remaining time
tau = (steps left) / horizon, stored last (``env.time_index``). Episodes are
fixed-horizon: tau starts at 1, decreases by 1/horizon each step, and the
state is terminal once tau falls below half a step. Time components are
snapped onto the exact k/horizon grid so that natural trajectories reach
tau = 0.0 exactly (value approximators mask their output with tau, and several
identities need the masked value to vanish exactly at episode end).

Derivative orientation convention (used package-wide): a "derivative of b
over a" matrix D has D[i, j] = d b_j / d a_i. So ``df_dx`` is (n, n) with
rows indexed by the state component being perturbed, ``df_da`` is (m, n),
and gradient vectors are plain 1-D arrays. With this layout chain rules
compose left-to-right: d(g∘f)/dx = (df/dx) @ (dg/dy).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .errors import (
    DimensionMismatchError,
    EnvironmentDefinitionError,
    TerminalStateError,
)
from .tolerances import TIME_SNAP

# Type aliases: states and actions are flat float64 arrays. Which action
# components are box-bounded to [-1, 1] is part of the environment's action
# space, not of the individual action vector.
State = np.ndarray
Action = np.ndarray


@dataclass(frozen=True)
class ActionSpace:
    """Action dimensionality plus per-component saturation bounds mask."""

    dim: int
    bounded: np.ndarray  # (dim,) bool; True => component confined to [-1, 1]

    def clip(self, a: Action) -> Action:
        out = np.array(a, dtype=float)
        out[self.bounded] = np.clip(out[self.bounded], -1.0, 1.0)
        return out


@dataclass(frozen=True)
class ModelJacobians:
    """First derivatives of (f, r) at one (x, a) point.

    df_dx[i, j] = d f_j / d x_i   (n, n)
    df_da[i, j] = d f_j / d a_i   (m, n)
    dr_dx[i]    = d r / d x_i     (n,)
    dr_da[i]    = d r / d a_i     (m,)
    """

    df_dx: np.ndarray
    df_da: np.ndarray
    dr_dx: np.ndarray
    dr_da: np.ndarray


@dataclass(frozen=True)
class ModelSecondDerivs:
    """Second derivatives of (f, r) needed by Q-function curvature.

    The model-function second derivatives enter only contracted against a
    vector v (a value gradient at the next state):

      d2f_da2_contracted(v)[i, j]  = sum_k v_k * d2 f_k / (d a_i d a_j)
      d2f_dxda_contracted(v)[i, j] = sum_k v_k * d2 f_k / (d x_i d a_j)
    """

    d2r_da2: np.ndarray   # (m, m)
    d2r_dxda: np.ndarray  # (n, m)
    d2f_da2_contracted: Callable[[np.ndarray], np.ndarray]
    d2f_dxda_contracted: Callable[[np.ndarray], np.ndarray]


class Environment:
    """A deterministic episodic control problem.

    Subclasses define ``_advance`` (physical state update), ``_reward`` and
    the analytic derivative methods. ``step`` is a pure function of (x, a):
    no hidden state, and stepping from a terminal state is a usage error.
    """

    name: str = "base"

    def __init__(self, state_dim, action_space, horizon, gamma_default=1.0):
        self.state_dim = int(state_dim)
        self.action_space = action_space
        self.horizon = int(horizon)
        self.max_horizon = int(horizon)
        self.gamma_default = float(gamma_default)
        self.time_index = self.state_dim - 1
        self.time_step = 1.0 / self.horizon

    # -- required per-environment pieces --------------------------------------

    def _advance(self, x, a):
        raise NotImplementedError

    def _reward(self, x, a):
        raise NotImplementedError

    def jacobians(self, x: State, a: Action) -> ModelJacobians:
        raise NotImplementedError

    def second_derivs(self, x: State, a: Action) -> ModelSecondDerivs:
        raise NotImplementedError

    def start_state(self) -> State:
        raise NotImplementedError

    # -- shared mechanics ------------------------------------------------------

    def is_terminal(self, x: State) -> bool:
        # Half-step band: small perturbations of any component never change
        # the episode length.
        return float(x[self.time_index]) < 0.5 * self.time_step

    def _check(self, x, a):
        x = np.asarray(x, dtype=float)
        a = np.asarray(a, dtype=float)
        if x.shape != (self.state_dim,):
            raise DimensionMismatchError(
                f"{self.name}: state has shape {x.shape}, expected ({self.state_dim},)")
        if a.shape != (self.action_space.dim,):
            raise DimensionMismatchError(
                f"{self.name}: action has shape {a.shape}, expected ({self.action_space.dim},)")
        return x, a

    def _tick(self, tau: float) -> float:
        """Advance remaining time by one step, snapping onto the exact grid."""
        nxt = tau - self.time_step
        k = nxt * self.horizon
        r = round(k)
        if abs(k - r) < TIME_SNAP:
            nxt = r / self.horizon
        return nxt

    def step(self, x: State, a: Action) -> tuple[State, float]:
        """Return (next state, reward). Pure; raises on terminal input."""
        x, a = self._check(x, a)
        if self.is_terminal(x):
            raise TerminalStateError(f"{self.name}: cannot step a terminal state")
        nxt = self._advance(x, a)
        nxt[self.time_index] = self._tick(float(x[self.time_index]))
        r = float(self._reward(x, a))
        if not (np.all(np.isfinite(nxt)) and np.isfinite(r)):
            raise EnvironmentDefinitionError(
                f"{self.name}: non-finite step output at x={x}, a={a}")
        return nxt, r

    def step_many(self, x: State, actions: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized step of one state under a batch of actions (B, m).

        Fast path for the greedy solver's probe grid; subclasses override
        with closed forms. Terminality of x is the caller's concern.
        """
        outs = [self.step(x, a) for a in actions]
        return np.array([o[0] for o in outs]), np.array([o[1] for o in outs])


def _zero_contraction(shape):
    zero = np.zeros(shape)

    def contract(v):
        return zero.copy()

    return contract


class _QuadraticCostEnv(Environment):
    """Shared body for the shipped point-mass tasks.

    Physical dynamics: pos' = pos + gain * a (componentwise, control-affine).
    Reward: -(|pos|^2 + action_cost * |a|^2). Everything beyond the first
    derivatives is state-independent, so the second-derivative record is
    constant: only d2r/da2 = -2*action_cost*I is nonzero.
    """

    def __init__(self, pos_dim, *, gain, action_cost, horizon, bounded,
                 start_pos, name, gamma_default=1.0):
        space = ActionSpace(pos_dim, np.full(pos_dim, bool(bounded)))
        super().__init__(pos_dim + 1, space, horizon, gamma_default)
        self.name = name
        self.pos_dim = pos_dim
        self.gain = float(gain)
        self.action_cost = float(action_cost)
        self._start_pos = np.asarray(start_pos, dtype=float)

        n, m, ti = self.state_dim, pos_dim, self.time_index
        df_dx = np.zeros((n, n))
        df_dx[:m, :m] = np.eye(m)
        df_dx[ti, ti] = 1.0
        df_da = np.zeros((m, n))
        df_da[:, :m] = self.gain * np.eye(m)
        self._df_dx = df_dx
        self._df_da = df_da
        self._second = ModelSecondDerivs(
            d2r_da2=-2.0 * self.action_cost * np.eye(m),
            d2r_dxda=np.zeros((n, m)),
            d2f_da2_contracted=_zero_contraction((m, m)),
            d2f_dxda_contracted=_zero_contraction((n, m)),
        )

    def _advance(self, x, a):
        nxt = x.copy()
        nxt[:self.pos_dim] = x[:self.pos_dim] + self.gain * a
        return nxt

    def _reward(self, x, a):
        pos = x[:self.pos_dim]
        return -(pos @ pos + self.action_cost * (a @ a))

    def jacobians(self, x, a):
        x, a = self._check(x, a)
        n, m = self.state_dim, self.pos_dim
        dr_dx = np.zeros(n)
        dr_dx[:m] = -2.0 * x[:m]
        dr_da = -2.0 * self.action_cost * a
        return ModelJacobians(self._df_dx.copy(), self._df_da.copy(), dr_dx, dr_da)

    def second_derivs(self, x, a):
        self._check(x, a)
        return self._second

    def start_state(self):
        return np.concatenate([self._start_pos, [1.0]])

    def step_many(self, x, actions):
        actions = np.asarray(actions, dtype=float)
        B = actions.shape[0]
        nxt = np.tile(x, (B, 1))
        nxt[:, :self.pos_dim] = x[:self.pos_dim] + self.gain * actions
        nxt[:, self.time_index] = self._tick(float(x[self.time_index]))
        pos = x[:self.pos_dim]
        r = -(pos @ pos + self.action_cost * np.einsum("bi,bi->b", actions, actions))
        return nxt, r


def lqr1d(horizon=10, action_cost=0.1, start=1.0):
    """1-D linear-quadratic task: x' = x + a, unbounded action."""
    return _QuadraticCostEnv(1, gain=1.0, action_cost=action_cost, horizon=horizon,
                             bounded=False, start_pos=[start], name="lqr1d")


def bangbang1d(horizon=20, start=0.5):
    """1-D bounded-action task with pure state cost: the optimal control
    saturates away from the origin."""
    return _QuadraticCostEnv(1, gain=0.1, action_cost=0.0, horizon=horizon,
                             bounded=True, start_pos=[start], name="bangbang1d")


def nav2d(horizon=15, action_cost=0.05, start=(1.0, -0.7), bounded=True):
    """2-D navigation to the origin with box-bounded 2-D action."""
    env = _QuadraticCostEnv(2, gain=0.2, action_cost=action_cost, horizon=horizon,
                            bounded=bounded, start_pos=list(start),
                            name="nav2d" if bounded else "nav2d-unbound")
    return env


ENVIRONMENTS: dict[str, Callable[..., Environment]] = {
    "lqr1d": lqr1d,
    "bangbang1d": bangbang1d,
    "nav2d": nav2d,
    "nav2d-unbound": lambda **kw: nav2d(bounded=False, **kw),
}


def make_environment(name: str, **params) -> Environment:
    try:
        factory = ENVIRONMENTS[name]
    except KeyError:
        raise EnvironmentDefinitionError(
            f"unknown environment {name!r}; available: {sorted(ENVIRONMENTS)}") from None
    return factory(**params)
