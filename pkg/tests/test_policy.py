"""Greedy policy layer: lookahead score, certified argmax, implicit Jacobians."""

import numpy as np
import pytest

import oracles
from vgl_lab.approximator import make_approximator
from vgl_lab.errors import DerivativeUndefinedError
from vgl_lab.model import make_environment
from vgl_lab.policy import (greedy_action, policy_state_jacobian,
                            policy_weight_jacobian, q_action_gradient,
                            q_action_hessian, q_value)


def _outward_quadratic_weights(ap):
    """Weights rewarding squared distance from the origin: the greedy action
    on a bounded task then pushes every component to a box face."""
    w = np.zeros(ap.dim_w)
    w[1 + ap.state_dim] = 1.0  # coefficient of the first squared feature
    return w


def test_q_value_is_reward_plus_discounted_value():
    env = make_environment("lqr1d")
    ap = make_approximator("quadratic", env.state_dim)
    rng = np.random.default_rng(1)
    w = ap.init_weights(1)
    x = oracles.random_interior_state(env, rng)
    a = np.array([0.37])
    x1, r = env.step(x, a)
    assert np.isclose(q_value(env, ap, w, x, a), r + ap.value(x1, w))
    assert np.isclose(q_value(env, ap, w, x, a, gamma=0.5),
                      r + 0.5 * ap.value(x1, w))


def test_q_action_derivatives_match_finite_differences():
    rng = np.random.default_rng(2)
    for name in ("lqr1d", "nav2d-unbound"):
        env = make_environment(name)
        for kind in ("quadratic", "mlp"):
            ap = make_approximator(kind, env.state_dim)
            for _ in range(5):
                w = ap.init_weights(int(rng.integers(1 << 30)))
                x = oracles.random_interior_state(env, rng)
                a = rng.uniform(-0.8, 0.8, env.action_space.dim)
                fd_g = oracles.central_difference(
                    lambda v: q_value(env, ap, w, x, v), a)
                fd_h = oracles.central_difference(
                    lambda v: q_action_gradient(env, ap, w, x, v), a)
                assert np.max(np.abs(q_action_gradient(env, ap, w, x, a)
                                     - fd_g)) < 1e-7
                assert np.max(np.abs(q_action_hessian(env, ap, w, x, a)
                                     - fd_h)) < 1e-6


def test_greedy_action_with_zero_value_minimizes_action_cost():
    env = make_environment("lqr1d")
    ap = make_approximator("quadratic", env.state_dim)
    res = greedy_action(env, ap, np.zeros(ap.dim_w), env.start_state())
    assert res.converged
    assert np.allclose(res.action, 0.0, atol=1e-9)


def test_greedy_action_matches_grid_search():
    env = make_environment("lqr1d")
    ap = make_approximator("quadratic", env.state_dim)
    rng = np.random.default_rng(3)
    for _ in range(6):
        w = ap.init_weights(int(rng.integers(1 << 30)))
        x = oracles.random_interior_state(env, rng)
        res = greedy_action(env, ap, w, x)
        ref = oracles.grid_greedy_action(env, ap, w, x)
        assert np.max(np.abs(res.action - ref)) < 1e-6
        # certified stationarity on the interior
        assert np.max(np.abs(res.action_gradient)) < 1e-9
        assert np.allclose(res.action_gradient,
                           q_action_gradient(env, ap, w, x, res.action))


def test_greedy_action_saturates_when_pushed_outward():
    env = make_environment("bangbang1d")
    ap = make_approximator("quadratic", env.state_dim)
    w = _outward_quadratic_weights(ap)
    res = greedy_action(env, ap, w, env.start_state())
    assert res.action[0] == 1.0
    assert bool(res.saturated[0])
    # the score gradient keeps pointing outward at the face
    assert q_action_gradient(env, ap, w, env.start_state(), res.action)[0] > 0


def test_policy_jacobians_match_resolved_argmax():
    env = make_environment("lqr1d")
    ap = make_approximator("quadratic", env.state_dim)
    rng = np.random.default_rng(4)
    for _ in range(5):
        w = ap.init_weights(int(rng.integers(1 << 30)))
        x = oracles.random_interior_state(env, rng)
        a = greedy_action(env, ap, w, x).action
        pi_x = policy_state_jacobian(env, ap, w, x, a)
        pi_w = policy_weight_jacobian(env, ap, w, x, a)
        fd_x = oracles.central_difference(
            lambda v: greedy_action(env, ap, w, v).action, x, h=1e-5)
        fd_w = oracles.central_difference(
            lambda v: greedy_action(env, ap, v, x).action, w, h=1e-5)
        # entries scale with the value curvature, so compare relative
        assert np.max(np.abs(pi_x - fd_x)) / (1.0 + np.max(np.abs(fd_x))) < 1e-4
        assert np.max(np.abs(pi_w - fd_w)) / (1.0 + np.max(np.abs(fd_w))) < 1e-4


def test_policy_jacobians_vanish_on_pinned_components():
    env = make_environment("bangbang1d")
    ap = make_approximator("quadratic", env.state_dim)
    w = _outward_quadratic_weights(ap)
    x = env.start_state()
    a = greedy_action(env, ap, w, x).action
    assert np.allclose(policy_state_jacobian(env, ap, w, x, a), 0.0)
    assert np.allclose(policy_weight_jacobian(env, ap, w, x, a), 0.0)


def test_singular_interior_curvature_is_reported():
    env = make_environment("bangbang1d")  # zero action cost
    ap = make_approximator("quadratic", env.state_dim)
    with pytest.raises(DerivativeUndefinedError):
        policy_state_jacobian(env, ap, np.zeros(ap.dim_w), env.start_state(),
                              np.zeros(1))
