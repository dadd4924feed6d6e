"""vgl-lab: value-gradient learning on deterministic episodic control problems.

A small laboratory for learners that move a value function's *gradient*
toward recursively-defined targets along greedy trajectories, together with
classic value learning, policy-gradient ascent through the model, and
executable checks of the identities connecting them.
"""

from .approximator import (
    QuadraticValue,
    TanhNetValue,
    ValueApproximator,
    load_weights,
    make_approximator,
    save_weights,
    weights_from_json,
    weights_to_json,
)
from .config import RunConfig, load_config, parse_config, serialize_config
from .errors import (
    ConfigError,
    DerivativeUndefinedError,
    DimensionMismatchError,
    EnvironmentDefinitionError,
    EpisodicViolationError,
    OmegaSingularError,
    SaturationUnsupportedError,
    SolverFailureError,
    TargetUndefinedError,
    TerminalStateError,
    VglLabError,
)
from .learners import (
    EligibilityTrace,
    LearnerConfig,
    OmegaSpec,
    RunLog,
    UpdateReport,
    bptt_update,
    make_omega,
    run_log_to_csv,
    train,
    vgl_batch_update,
    vgl_online_update,
    vl_update,
)
from .model import (
    ActionSpace,
    Environment,
    ModelJacobians,
    ModelSecondDerivs,
    bangbang1d,
    lqr1d,
    make_environment,
    nav2d,
)
from .policy import (
    GreedyActionResult,
    greedy_action,
    policy_state_jacobian,
    policy_weight_jacobian,
    q_action_gradient,
    q_action_hessian,
    q_value,
)
from .targets import (
    ExtremalityReport,
    TargetBundle,
    Trajectory,
    extremality_check,
    lambda_return,
    make_targets,
    replay,
    reward_derivatives,
    rollout,
    target_gradients,
    target_values,
    total_reward,
    trajectory_to_csv,
)
from .tolerances import DEFAULT_TOLERANCES, Tolerances, with_overrides
from .verify import CHECKS, VerificationReport, train_to_gradient_residual

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
