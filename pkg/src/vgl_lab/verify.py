"""Executable verification checks for the package's core identities.

Each check runs a self-contained numerical experiment at desk scale and
returns a VerificationReport: instances run, worst error observed, the
tolerance it was judged against, and pass/fail. The CLI exposes them under
``verify <name>``; the acceptance test suite runs stricter versions.

Checks:

* lambda-return    — recursive value targets equal the direct mixture of
                     truncated n-step returns, every step, every lambda.
* pgl-equivalence  — the batch value-gradient update at lam=1 with the pgl
                     weighting equals the policy-gradient-through-model update.
* extremality      — training the gradient residuals to ~zero makes the
                     rolled-out action sequence locally extremal for the
                     discounted total reward.
* bangbang         — on the bounded one-dimensional environment the converged
                     trajectory saturates with correctly-signed sensitivities,
                     and nudging any saturated action inward loses reward.
* batch-online     — Algorithm variants (backward batch pass vs forward
                     eligibility-trace pass) produce identical updates.
* lemma4           — the policy state Jacobian annihilates the action gradient
                     of the lookahead score at greedy actions.
* gradcheck        — every analytic derivative agrees with central finite
                     differences.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from .approximator import make_approximator
from .errors import SolverFailureError, TargetUndefinedError
from .learners import LearnerConfig, OmegaSpec, vgl_batch_update, vgl_online_update, bptt_update
from .model import make_environment
from .policy import (
    greedy_action,
    policy_state_jacobian,
    policy_weight_jacobian,
    q_action_gradient,
    q_action_hessian,
    q_value,
)
from .targets import (
    extremality_check,
    lambda_return,
    replay,
    reward_derivatives,
    rollout,
    target_gradients,
    target_values,
)
from .tolerances import DEFAULT_TOLERANCES, FD_STEP


@dataclass(frozen=True)
class VerificationReport:
    check: str
    instances: int
    max_error: float
    tolerance: float
    passed: bool
    rows: tuple


def _report(check, instances, max_error, tol, rows):
    return VerificationReport(check=check, instances=instances,
                              max_error=float(max_error), tolerance=float(tol),
                              passed=bool(max_error <= tol), rows=tuple(rows))


def central_difference(fn, x, h=FD_STEP):
    """Central finite-difference gradient of scalar fn at vector x."""
    x = np.asarray(x, dtype=float)
    out = np.empty(x.size)
    for i in range(x.size):
        step = h * (1.0 + abs(x[i]))
        hi = x.copy(); hi[i] += step
        lo = x.copy(); lo[i] -= step
        out[i] = (fn(hi) - fn(lo)) / (2.0 * step)
    return out


# -- adaptive-step training to a gradient-residual target ----------------------


def gradient_residual(env, approx, w, lam, gamma=None):
    """max over steps of the 2-norm of (gradient target - approximate gradient)."""
    traj = rollout(env, approx, w, gamma=gamma)
    g_target = target_gradients(traj, approx, w, lam, gamma)
    g_approx = approx.state_gradient_many(traj.states[:traj.F], w)
    return float(np.max(np.linalg.norm(g_target[:traj.F] - g_approx, axis=1)))


def _spread_starts(env, per_axis=None):
    """Fixed grid of start states across the spatial box [-1, 1]^k."""
    k = env.time_index
    if per_axis is None:
        per_axis = 7 if k == 1 else 3
    axes = [np.linspace(-1.0, 1.0, per_axis)] * k
    starts = []
    for combo in itertools.product(*axes):
        s = env.start_state().copy()
        s[:k] = combo
        starts.append(s)
    return starts


def _gradient_fit_data(env, approx, w, lam, gamma, starts):
    """Stack states and frozen gradient targets from rollouts at each start."""
    xs, ys = [], []
    for s in starts:
        traj = rollout(env, approx, w, x0=s, gamma=gamma)
        g_t = target_gradients(traj, approx, w, lam, gamma)
        xs.append(traj.states[:traj.F])
        ys.append(g_t[:traj.F])
    return np.vstack(xs), np.vstack(ys)


def _fit_gradient_field(approx, w, xs, ys, iters=30, row_scale=None):
    """Levenberg-Marquardt fit of the approximate gradient field to fixed
    per-state targets, using the analytic weight Jacobian.

    row_scale optionally weights individual states (shape (N, 1)): rows of
    the residual and Jacobian are multiplied by it, so states that matter
    more can dominate the least-squares solution.
    """
    if row_scale is None:
        row_scale = np.ones((xs.shape[0], 1))
    mu = 1e-3
    eye = np.eye(approx.dim_w)
    for _ in range(iters):
        r = (row_scale * (ys - approx.state_gradient_many(xs, w))).reshape(-1)
        sse = float(r @ r)
        if sse < 1e-26:
            break
        jac = (row_scale[:, :, None] *
               approx.full_gradient_weight_jacobian_many(xs, w).transpose(0, 2, 1))
        jac = jac.reshape(-1, approx.dim_w)
        jtj = jac.T @ jac
        jtr = jac.T @ r
        accepted = False
        while mu < 1e12:
            step = np.linalg.solve(jtj + mu * eye, jtr)
            r_try = (row_scale *
                     (ys - approx.state_gradient_many(xs, w + step)))
            sse_try = float(np.sum(r_try ** 2))
            if sse_try < sse:
                w = w + step
                mu = max(mu * 0.3, 1e-12)
                accepted = True
                break
            mu *= 10.0
        if not accepted:
            break
    return w


def _residual_stack(env, approx, w, lam, gamma):
    """Gradient residuals along the canonical rollout, flattened, plus the
    worst per-step norm."""
    traj = rollout(env, approx, w, gamma=gamma)
    g_t = target_gradients(traj, approx, w, lam, gamma)
    res = g_t[:traj.F] - approx.state_gradient_many(traj.states[:traj.F], w)
    return res.reshape(-1), float(np.max(np.linalg.norm(res, axis=1)))


def train_to_gradient_residual(env, approx, w0, *, lam, gamma=None, target=1e-6,
                               stabilize_to=0.5, max_outers=80, max_polish=300):
    """Drive the worst per-step gradient-residual norm on the canonical
    rollout below target; returns (w, residual, sweeps).

    Phase one repeats damped fitted sweeps: freeze the gradient targets along
    rollouts from a spread of start states, refit the gradient field to them,
    and keep the largest damping of the refit that lowers the canonical
    residual. Phase two finishes with Levenberg-Marquardt root-finding on the
    stacked canonical residuals using a finite-difference Jacobian. Both
    phases reject any step on which the greedy-action solver fails, so a
    half-trained approximator with a locally convex lookahead score only
    slows progress instead of aborting it.
    """
    w = np.asarray(w0, dtype=float).copy()
    starts = _spread_starts(env)
    _, worst = _residual_stack(env, approx, w, lam, gamma)
    sweeps = 0
    for _ in range(max_outers):
        if worst < max(stabilize_to, target):
            break
        sweeps += 1
        xs, ys = _gradient_fit_data(env, approx, w, lam, gamma, starts)
        w_fit = _fit_gradient_field(approx, w, xs, ys)
        beta, stepped = 1.0, False
        while beta > 1e-8:
            w_try = w + beta * (w_fit - w)
            try:
                _, worst_try = _residual_stack(env, approx, w_try, lam, gamma)
            except SolverFailureError:
                beta *= 0.5
                continue
            if worst_try < worst:
                w, worst, stepped = w_try, worst_try, True
                break
            beta *= 0.5
        if not stepped:
            break
    f, worst = _residual_stack(env, approx, w, lam, gamma)
    mu, h = 1e-6, 1e-6
    eye = np.eye(approx.dim_w)
    for _ in range(max_polish):
        if worst < target:
            return w, worst, sweeps
        sweeps += 1
        jac = np.empty((f.size, approx.dim_w))
        for i in range(approx.dim_w):
            w_probe = w.copy()
            w_probe[i] += h
            try:
                f_probe, _ = _residual_stack(env, approx, w_probe, lam, gamma)
            except SolverFailureError:
                f_probe = f
            jac[:, i] = (f_probe - f) / h
        jtj = jac.T @ jac
        jtf = jac.T @ f
        stepped = False
        while mu < 1e14:
            step = np.linalg.solve(jtj + mu * eye, -jtf)
            try:
                f_try, worst_try = _residual_stack(env, approx, w + step,
                                                   lam, gamma)
            except SolverFailureError:
                mu *= 10.0
                continue
            if f_try @ f_try < f @ f:
                w, f, worst = w + step, f_try, worst_try
                mu = max(mu * 0.3, 1e-14)
                stepped = True
                break
            mu *= 10.0
        if not stepped:
            break
    return w, worst, sweeps


def train_return_ascent(env, approx, w0, *, gamma=None, max_iters=400,
                        alpha0=0.1, grow=1.5, shrink=0.5, alpha_min=1e-12):
    """Hill-climb the rolled-out discounted return with the lam=1 pgl-weighted
    batch update — the exact return gradient — under an adaptive step size.

    Returns (w, reward, iterations). Stops when no step size improves the
    return (a local maximum at line-search resolution) or max_iters is hit.
    """
    cfg = LearnerConfig(algorithm="vgl_batch", lam=1.0, gamma=gamma, alpha=1.0,
                        omega=OmegaSpec(kind="pgl"), iterations=1)
    w = np.asarray(w0, dtype=float).copy()
    traj = rollout(env, approx, w, gamma=gamma)
    reward = traj.total_reward
    delta = vgl_batch_update(traj, approx, w, cfg).delta_w
    alpha = alpha0
    for it in range(1, max_iters + 1):
        stepped = False
        while alpha > alpha_min:
            w_try = w + alpha * delta
            try:
                traj_try = rollout(env, approx, w_try, gamma=gamma)
            except SolverFailureError:
                alpha *= shrink
                continue
            if traj_try.total_reward > reward:
                w = w_try
                reward = traj_try.total_reward
                delta = vgl_batch_update(traj_try, approx, w, cfg).delta_w
                alpha = min(alpha * grow, 1e3)
                stepped = True
                break
            alpha *= shrink
        if not stepped:
            return w, reward, it
    return w, reward, max_iters


def _costate_fit_data(env, approx, w, starts, gamma=None):
    """Stack states along greedy rollouts from each start, paired with the
    open-loop costates (derivatives of the remaining discounted reward with
    respect to each visited state) as gradient-fit targets."""
    xs, ys = [], []
    for s in starts:
        traj = rollout(env, approx, w, x0=s, gamma=gamma)
        dR_dx, _ = reward_derivatives(traj)
        xs.append(traj.states[:traj.F])
        ys.append(dR_dx[:traj.F])
    return np.vstack(xs), np.vstack(ys)


def train_greedy_return(env, approx, w0, *, gamma=None, rounds=60, patience=6,
                        dampings=(0.5, 0.25, 0.1, 1.0, 0.04), fit_iters=300):
    """Policy-iteration walk that maximizes the canonical rollout's return.

    Each round collects costates along greedy rollouts from a spread of start
    states and refits the gradient field to a relaxed blend of its current
    outputs and those costates, keeping the largest blend weight whose refit
    improves the canonical return. The blending happens in target space (the
    fit lands on the mixed field exactly) rather than by shrinking the weight
    step: near a parking orbit the exact costate field seen from perturbed
    starts moves the critic's zero crossing *away* from the orbit with a
    large amplification factor, so undamped refits oscillate divergently and
    weight-space damping needs impractically small steps to contract. Rounds
    without improvement still take a small relaxed step to keep exploring,
    restoring the best-seen weights after `patience` consecutive failures.

    Returns (w_best, best_return, rounds_used).
    """
    w = np.asarray(w0, dtype=float).copy()
    starts = _spread_starts(env)
    best_w = w.copy()
    best = rollout(env, approx, w, gamma=gamma).total_reward
    bad = 0
    used = 0
    for used in range(1, rounds + 1):
        try:
            xs, ys = _costate_fit_data(env, approx, w, starts, gamma)
        except SolverFailureError:
            w = best_w.copy()
            bad += 1
            if bad > patience:
                break
            continue
        g_now = approx.state_gradient_many(xs, w)
        stepped = False
        for beta in dampings:
            y_mix = g_now + beta * (ys - g_now)
            w_try = _fit_gradient_field(approx, w, xs, y_mix, iters=fit_iters)
            try:
                r_try = rollout(env, approx, w_try, gamma=gamma).total_reward
            except SolverFailureError:
                continue
            if r_try > best:
                best_w, best, bad = w_try.copy(), r_try, 0
                w, stepped = w_try, True
                break
        if not stepped:
            y_mix = g_now + 0.1 * (ys - g_now)
            w_try = _fit_gradient_field(approx, w, xs, y_mix, iters=fit_iters)
            try:
                rollout(env, approx, w_try, gamma=gamma)
                w = w_try
            except SolverFailureError:
                w = best_w.copy()
            bad += 1
            if bad > patience:
                break
    return best_w, best, used


def _saturation_pattern(env, approx, w, gamma=None, slack=1e-9):
    """Per-step, per-component saturation pattern of the canonical rollout:
    +1.0 / -1.0 where the greedy action sits on a box face, None where it is
    interior or the component is unbounded."""
    traj = rollout(env, approx, w, gamma=gamma)
    bounded = env.action_space.bounded
    pattern = []
    for t in range(traj.F):
        row = []
        for j in range(traj.actions.shape[1]):
            a = traj.actions[t, j]
            if bounded[j] and a >= 1.0 - slack:
                row.append(1.0)
            elif bounded[j] and a <= -1.0 + slack:
                row.append(-1.0)
            else:
                row.append(None)
        pattern.append(row)
    return pattern


def _pattern_frozen_residual(env, approx, w, pattern, gamma=None):
    """Costate-matching residuals with the saturation pattern held fixed.

    Rolls the policy out with pattern-pinned components forced onto their
    box face and the rest chosen greedily, then returns the stacked
    differences (costate - approximate gradient) at exactly the states
    reached by steps with at least one interior component. Greedy
    stationarity ties the closed-loop return derivative of an interior
    component to this mismatch at the successor state, so zeroing these rows
    zeroes the interior defects; pinned steps only need a sign condition,
    which a least-squares fit need not (and with limited capacity, cannot)
    drive to zero. Freezing the pattern keeps the residual smooth across
    greedy switching points, where root-finding on the raw rollout residual
    stalls.
    """
    x = env.start_state().copy()
    actions = []
    interior_next = []
    for t in range(len(pattern)):
        a = np.array(greedy_action(env, approx, w, x).action, dtype=float)
        free = False
        for j, p in enumerate(pattern[t]):
            if p is not None:
                a[j] = p
            else:
                free = True
        if free:
            interior_next.append(t + 1)
        actions.append(a)
        x, _ = env.step(x, a)
    traj = replay(env, env.start_state(), np.array(actions), gamma)
    dR_dx, _ = reward_derivatives(traj)
    g = approx.state_gradient_many(traj.states[:traj.F], w)
    idx = [i for i in interior_next if i < traj.F]
    return (dR_dx[idx] - g[idx]).reshape(-1)


def _extremality_violation(env, approx, w, gamma=None):
    """Worst local-extremality defect along the canonical rollout: |dR/da|
    on interior components, and the wrong-signed part of dR/da on saturated
    ones (a box face is only locally optimal when the return derivative
    pushes into it)."""
    traj = rollout(env, approx, w, gamma=gamma)
    _, dR_da = reward_derivatives(traj)
    bounded = env.action_space.bounded
    worst = 0.0
    for t in range(traj.F):
        for j in range(traj.actions.shape[1]):
            a, g = traj.actions[t, j], dR_da[t, j]
            if bounded[j] and a >= 1.0 - 1e-9:
                worst = max(worst, -g)
            elif bounded[j] and a <= -1.0 + 1e-9:
                worst = max(worst, g)
            else:
                worst = max(worst, abs(g))
    return max(worst, 0.0)


def polish_extremality(env, approx, w0, *, gamma=None, target=8e-5,
                       refreshes=3, lm_iters=15, h=1e-5):
    """Finish a near-extremal policy with pattern-frozen root-finding.

    Refreshes the saturation pattern from the current rollout (at most
    `refreshes` times) and runs Levenberg-Marquardt on the pattern-frozen
    costate residuals with a finite-difference Jacobian until the canonical
    rollout's extremality defect drops below target. The finite-difference
    step must stay well above the greedy solver's certification tolerance or
    the Jacobian turns to noise near the root.

    Returns (w, defect).
    """
    w = np.asarray(w0, dtype=float).copy()
    eye = np.eye(approx.dim_w)
    viol = _extremality_violation(env, approx, w, gamma)
    for _ in range(refreshes):
        if viol < target:
            break
        pattern = _saturation_pattern(env, approx, w, gamma)
        f = _pattern_frozen_residual(env, approx, w, pattern, gamma)
        mu = 1e-6
        for _ in range(lm_iters):
            if float(np.max(np.abs(f))) < target:
                break
            jac = np.zeros((f.size, approx.dim_w))
            for i in range(approx.dim_w):
                w_probe = w.copy()
                w_probe[i] += h
                try:
                    f_probe = _pattern_frozen_residual(env, approx, w_probe,
                                                       pattern, gamma)
                except SolverFailureError:
                    continue
                jac[:, i] = (f_probe - f) / h
            jtj = jac.T @ jac
            jtf = jac.T @ f
            stepped = False
            while mu < 1e12:
                step = np.linalg.solve(jtj + mu * eye, -jtf)
                try:
                    f_try = _pattern_frozen_residual(env, approx, w + step,
                                                     pattern, gamma)
                except SolverFailureError:
                    mu *= 10.0
                    continue
                if f_try @ f_try < f @ f:
                    w, f = w + step, f_try
                    mu = max(mu * 0.3, 1e-12)
                    stepped = True
                    break
                mu *= 10.0
            if not stepped:
                break
        viol = _extremality_violation(env, approx, w, gamma)
    return w, viol


# -- individual checks ---------------------------------------------------------


def check_lambda_return(seed=0, env=None, tol=None):
    tol = DEFAULT_TOLERANCES.lambda_return_identity if tol is None else tol
    env_names = [env] if env else ["lqr1d", "bangbang1d", "nav2d"]
    rng = np.random.default_rng(seed)
    rows, worst, count = [], 0.0, 0
    for name in env_names:
        e = make_environment(name)
        for kind in ("quadratic", "mlp"):
            ap = make_approximator(kind, e.state_dim)
            for rep in range(3):
                w = ap.init_weights(int(rng.integers(1 << 30)))
                traj = rollout(e, ap, w)
                for lam in (0.0, 0.3, 0.5, 0.7, 1.0):
                    v_rec = target_values(traj, ap, w, lam)
                    v_mix = lambda_return(traj, ap, w, lam)
                    err = float(np.max(np.abs(v_rec[:traj.F] - v_mix)))
                    worst = max(worst, err)
                    count += 1
                    rows.append(f"{name}/{kind} rep={rep} lam={lam}: "
                                f"max|recursive - direct| = {err:.3e}")
    return _report("lambda-return", count, worst, tol, rows)


def check_pgl_equivalence(seed=0, env=None, tol=None):
    tol = DEFAULT_TOLERANCES.equivalence_rel if tol is None else tol
    env_names = [env] if env else ["lqr1d", "nav2d-unbound"]
    rng = np.random.default_rng(seed)
    rows, worst, count = [], 0.0, 0
    cfg_vgl = LearnerConfig(algorithm="vgl_batch", lam=1.0, alpha=1.0,
                            omega=OmegaSpec(kind="pgl"), iterations=1)
    cfg_bptt = LearnerConfig(algorithm="bptt", alpha=1.0, iterations=1)
    for name in env_names:
        e = make_environment(name)
        ap = make_approximator("mlp", e.state_dim)
        for rep in range(4):
            w = ap.init_weights(int(rng.integers(1 << 30)))
            traj = rollout(e, ap, w)
            d_vgl = vgl_batch_update(traj, ap, w, cfg_vgl).delta_w
            d_bptt = bptt_update(e, ap, None, w, cfg_bptt).delta_w
            err = float(np.linalg.norm(d_vgl - d_bptt)
                        / (1.0 + np.linalg.norm(d_bptt)))
            worst = max(worst, err)
            count += 1
            rows.append(f"{name} rep={rep}: scaled |d_vgl - d_bptt| = {err:.3e}")
    return _report("pgl-equivalence", count, worst, tol, rows)


def check_extremality(seed=0, env=None, tol=None):
    tol = DEFAULT_TOLERANCES.extremality if tol is None else tol
    name = env or "lqr1d"
    e = make_environment(name)
    ap = make_approximator("mlp", e.state_dim)
    # small-scale start keeps the initial greedy policy tame; lam=1 training
    # then warm-starts from the lam=0 fixed point, where its targets already
    # coincide up to the solver tolerance
    w = 0.05 * ap.init_weights(seed)
    rows, worst, n = [], 0.0, 0
    for lam in (0.0, 1.0):
        w, resid, sweeps = train_to_gradient_residual(e, ap, w, lam=lam,
                                                      target=1e-6)
        traj = rollout(e, ap, w)
        report = extremality_check(traj, tol=tol)
        err = report.max_stationary_residual
        rows.append(f"{name} lam={lam}: residual {resid:.3e} after {sweeps} "
                    f"sweeps; max |dR/da| over non-saturated components = "
                    f"{err:.3e}; counts {report.counts}")
        if resid >= 1e-6:
            rows.append(f"{name} lam={lam}: WARNING residual target not "
                        f"reached; extremality bound is not expected to hold")
            err = max(err, 1.0)
        worst = max(worst, err)
        n += traj.F
    return _report("extremality", n, worst, tol, rows)


def check_bangbang(seed=0, env=None, tol=None):
    tol = DEFAULT_TOLERANCES.extremality if tol is None else tol
    e = make_environment(env or "bangbang1d")
    ap = make_approximator("mlp", e.state_dim)
    rows = []
    w, best, used = train_greedy_return(e, ap, 0.05 * ap.init_weights(seed))
    rows.append(f"greedy-return walk (seed {seed}): best return {best:.9f} "
                f"after {used} rounds")
    if best < -0.56:
        # the walk parked in a poor basin; restart it from a different draw
        w, best, used = train_greedy_return(
            e, ap, 0.05 * ap.init_weights(seed + 3))
        rows.append(f"walk restarted (seed {seed + 3}): best return "
                    f"{best:.9f} after {used} rounds")
    w, defect = polish_extremality(e, ap, w)
    rows.append(f"pattern-frozen polish: extremality defect {defect:.3e}")
    traj = rollout(e, ap, w)
    report = extremality_check(traj, tol=tol)
    rows.append(f"final return {traj.total_reward:.9f}; classification "
                f"counts: {report.counts}")
    worst = float(report.max_stationary_residual)
    if report.counts["violation"]:
        worst = max(worst, 1.0)
    # nudging any saturated action toward the interior must lose reward
    base = traj.total_reward
    nudges = 0
    for t in range(traj.F):
        for i in range(traj.actions.shape[1]):
            label = report.classifications[t][i]
            if label not in ("saturated-high", "saturated-low"):
                continue
            nudged = traj.actions.copy()
            nudged[t, i] -= np.sign(nudged[t, i]) * 1e-3
            loss = base - replay(e, traj.states[0], nudged, traj.gamma).total_reward
            nudges += 1
            rows.append(f"t={t} comp={i} {label}: inward nudge changes reward "
                        f"by {-loss:.3e}")
            if loss <= 0.0:
                worst = max(worst, 1.0)
    rows.append(f"{nudges} saturated components nudged; violations: "
                f"{report.counts['violation']}")
    return _report("bangbang", traj.F + nudges, worst, tol, rows)


def check_batch_online(seed=0, env=None, tol=None):
    tol = DEFAULT_TOLERANCES.batch_online_identity if tol is None else tol
    env_names = [env] if env else ["lqr1d", "bangbang1d", "nav2d", "nav2d-unbound"]
    rng = np.random.default_rng(seed)
    rows, worst, count = [], 0.0, 0
    for name in env_names:
        e = make_environment(name)
        for kind in ("quadratic", "mlp"):
            ap = make_approximator(kind, e.state_dim)
            for lam in (0.0, 0.5, 1.0):
                omegas = [OmegaSpec()]
                if not e.action_space.bounded.any():
                    omegas.append(OmegaSpec(kind="pgl"))
                omegas.append(OmegaSpec(kind="diagonal",
                                        diag=tuple(1.0 + i for i in range(e.state_dim))))
                for om in omegas:
                    w = ap.init_weights(int(rng.integers(1 << 30)))
                    cfg = LearnerConfig(algorithm="vgl_batch", lam=lam, alpha=1.0,
                                        omega=om, iterations=1)
                    traj = rollout(e, ap, w)
                    try:
                        d_batch = vgl_batch_update(traj, ap, w, cfg).delta_w
                    except TargetUndefinedError as exc_b:
                        # the update is undefined here (flat lookahead score
                        # on some step); the two passes must agree on that too
                        try:
                            vgl_online_update(e, ap, None, w, cfg)
                        except TargetUndefinedError as exc_o:
                            err = 0.0 if exc_o.step == exc_b.step else float("inf")
                        else:
                            err = float("inf")
                        worst = max(worst, err)
                        count += 1
                        rows.append(f"{name}/{kind} lam={lam} omega={om.kind}: "
                                    f"both passes report step {exc_b.step} "
                                    f"undefined" if err == 0.0 else
                                    f"{name}/{kind} lam={lam} omega={om.kind}: "
                                    f"undefined-step disagreement")
                        continue
                    d_online = vgl_online_update(e, ap, None, w, cfg).delta_w
                    err = float(np.max(np.abs(d_batch - d_online))
                                / (1.0 + np.linalg.norm(d_batch)))
                    worst = max(worst, err)
                    count += 1
                    rows.append(f"{name}/{kind} lam={lam} omega={om.kind}: "
                                f"scaled max|batch - online| = {err:.3e}")
    return _report("batch-online", count, worst, tol, rows)


def check_lemma4(seed=0, env=None, tol=None):
    tol = DEFAULT_TOLERANCES.lemma_cancellation if tol is None else tol
    env_names = [env] if env else ["lqr1d", "bangbang1d", "nav2d"]
    rng = np.random.default_rng(seed)
    rows, worst, count = [], 0.0, 0
    for name in env_names:
        e = make_environment(name)
        ap = make_approximator("mlp", e.state_dim)
        for rep in range(10):
            w = ap.init_weights(int(rng.integers(1 << 30)))
            x = e.start_state().copy()
            x[:e.time_index] = rng.uniform(-1.0, 1.0, e.time_index)
            res = greedy_action(e, ap, w, x)
            pi_x = policy_state_jacobian(e, ap, w, x, res.action)
            err = float(np.max(np.abs(pi_x @ res.action_gradient)))
            worst = max(worst, err)
            count += 1
            rows.append(f"{name} rep={rep}: |pi_x . dq_da| = {err:.3e}")
    return _report("lemma4", count, worst, tol, rows)


def check_gradcheck(seed=0, env=None, tol=None):
    tol = DEFAULT_TOLERANCES.target_gradient_fd if tol is None else tol
    env_names = [env] if env else ["lqr1d", "nav2d-unbound"]
    rng = np.random.default_rng(seed)
    rows, worst, count = [], 0.0, 0
    for name in env_names:
        e = make_environment(name)
        ap = make_approximator("mlp", e.state_dim)
        for rep in range(3):
            w = ap.init_weights(int(rng.integers(1 << 30)))
            x = e.start_state().copy()
            x[:e.time_index] = rng.uniform(-0.8, 0.8, e.time_index)
            # value state-gradient vs FD
            g = ap.state_gradient(x, w)
            g_fd = central_difference(lambda xx: ap.value(xx, w), x)
            err = float(np.max(np.abs(g - g_fd)) / (1.0 + np.max(np.abs(g_fd))))
            worst = max(worst, err); count += 1
            rows.append(f"{name} rep={rep} value gradient: {err:.3e}")
            # lookahead-score action gradient vs FD
            a = rng.uniform(-0.5, 0.5, e.action_space.dim)
            dq = q_action_gradient(e, ap, w, x, a)
            dq_fd = central_difference(lambda aa: q_value(e, ap, w, x, aa), a)
            err = float(np.max(np.abs(dq - dq_fd)) / (1.0 + np.max(np.abs(dq_fd))))
            worst = max(worst, err); count += 1
            rows.append(f"{name} rep={rep} action gradient: {err:.3e}")
            # policy weight Jacobian vs FD (unbounded envs only here)
            res = greedy_action(e, ap, w, x)
            pi_w = policy_weight_jacobian(e, ap, w, x, res.action)
            for comp in range(e.action_space.dim):
                col_fd = central_difference(
                    lambda ww: greedy_action(e, ap, ww, x).action[comp], w)
                err = float(np.max(np.abs(pi_w[:, comp] - col_fd))
                            / (1.0 + np.max(np.abs(col_fd))))
                worst = max(worst, err); count += 1
                rows.append(f"{name} rep={rep} policy dw comp {comp}: {err:.3e}")
    return _report("gradcheck", count, worst, tol, rows)


CHECKS = {
    "lambda-return": check_lambda_return,
    "pgl-equivalence": check_pgl_equivalence,
    "extremality": check_extremality,
    "bangbang": check_bangbang,
    "batch-online": check_batch_online,
    "lemma4": check_lemma4,
    "gradcheck": check_gradcheck,
}
