"""Central numeric constants.

Every tolerance used by the library and its verification checks lives here so
the whole artifact is tuned from one place. A config file may override the
per-run members through the optional [tolerances] section.
"""

from dataclasses import dataclass, replace


# -- greedy action solver -----------------------------------------------------
# The solver drives the projected gradient far below the certification level
# so that identities resting on exact stationarity (policy-coupling terms,
# costate reductions) hold at 1e-10 with headroom.
SOLVER_TARGET_GRAD = 1e-12     # stop iterating once below this
SOLVER_CERTIFY_GRAD = 1e-10    # SolverFailureError if the best point is above
SOLVER_MAX_ITER = 100
SOLVER_BACKTRACK_MAX = 40

# classification thresholds at a solved action
EPS_SATURATION = 1e-8          # |dQ/da| above this at a bound counts as saturated
EPS_STATIONARITY = 1e-8        # |dQ/da| must be below this on interior components

# restricted action Hessian condition-number limit for policy derivatives
HESSIAN_COND_LIMIT = 1e12

# time grid snapping: remaining-time components are pulled onto the exact k/F
# grid when within this distance (in units of grid steps)
TIME_SNAP = 1e-9

# -- training -----------------------------------------------------------------
DIVERGENCE_NORM = 1e6          # halt when ||w|| exceeds this

# -- finite differences -------------------------------------------------------
FD_STEP = 1e-5                 # base step, scaled by 1 + |component|


@dataclass(frozen=True)
class Tolerances:
    """Per-run verification tolerances (config-overridable)."""

    model_jacobian_rel: float = 1e-6       # env Jacobians vs central differences
    approx_first_order: float = 1e-6       # value gradients vs central differences
    approx_second_order: float = 1e-5      # weight/state Jacobians and Hessians
    approx_cross_check: float = 1e-10      # JVP vs full Jacobian product
    policy_jacobian: float = 1e-4          # dpi/dx, dpi/dw vs re-solved argmax
    lemma_cancellation: float = 1e-10      # (dpi/dx)(dQ/da) and costate reduction
    hessian_nsd_eig: float = 1e-8          # largest unsaturated-block eigenvalue
    lambda_return_identity: float = 1e-10  # recursion vs direct mixture
    target_gradient_fd: float = 1e-4       # lambda=1 targets vs re-rolled returns
    reward_derivative_fd: float = 1e-5     # dR/dx, dR/da vs open-loop differences
    extremality: float = 1e-4              # stationarity/sign classification
    batch_online_identity: float = 1e-12   # scaled agreement of the two updates
    equivalence_rel: float = 1e-6          # vgl(1, pgl) vs backprop-through-time
    ascent_fd_rel: float = 1e-4            # both vs finite-difference dV/dw


DEFAULT_TOLERANCES = Tolerances()


def with_overrides(base: Tolerances, overrides: dict[str, float]) -> Tolerances:
    unknown = set(overrides) - set(base.__dataclass_fields__)
    if unknown:
        raise ValueError(f"unknown tolerance names: {sorted(unknown)}")
    return replace(base, **overrides)
