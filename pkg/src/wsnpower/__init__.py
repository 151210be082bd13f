"""Transmit-power control for energy-harvesting sensor networks.

Models a network of energy-harvesting sensors that report binary
detection decisions to a fusion center over finite-state Markov fading
channels.  The package builds the underlying channel / battery / harvest
models, computes closed-form detection-divergence rewards, solves the
constrained power-allocation problem by Lagrangian value iteration
(jointly or per sensor), and estimates detection performance of the
resulting policies by Monte Carlo simulation.
"""

from .config import DEFAULTS, SWEEP_AXES, ExperimentConfig, build_network
from .divergence_reward import (
    JCoefficients,
    RewardContext,
    RewardOptions,
    RewardTable,
    build_reward_table,
    immediate_reward,
    j_bar_level,
    j_hat_all_levels,
    j_hat_level,
    j_pointwise,
)
from .energy_model import (
    BatterySpec,
    HarvestSpec,
    battery_step,
    build_harvest_chain,
    feasible_spend_set,
)
from .errors import (
    ConfigError,
    FeasibilityError,
    GuardError,
    ModelValidityError,
    NonConvergenceError,
    NumericError,
    OscillationError,
    ParameterError,
    ScopeError,
)
from .fading_channel import (
    ChannelParams,
    FsmcModel,
    QuantizerMethod,
    QuantizerSpec,
    build_channel_fsmc,
    design_mmae_thresholds,
    design_moe_thresholds,
    level_probabilities,
    quantizer_mae,
    sample_gain_in_level,
)
from .mdp_core import (
    GlobalState,
    LocalState,
    Policy,
    PolicyScope,
    SolveReport,
    ViResult,
    brute_force_policy_oracle,
    build_local_kernels,
    global_state_index,
    local_reward_array,
    local_state_index,
    local_transition,
    mix_censoring,
    modified_reward_global,
    modified_reward_local,
    random_policy,
    read_policy_csv,
    solve_optimal,
    solve_suboptimal,
    stationary_distribution,
    validate_policy,
    value_iteration,
    write_policy_csv,
)
from .monte_carlo import (
    EpisodeTrace,
    McEstimate,
    fusion_llr,
    run_episodes,
    run_lifetime_value,
    run_trajectory,
    sweep,
    write_sweep_csv,
)
from .network import NetworkModel, SensorModel
from .sensing import (
    CensorStats,
    DeploymentModel,
    SensingParams,
    censor_stats_fixed,
    censor_stats_random_disk,
    sample_observation,
)
from .special import exp_integral_e1_scaled, exp_integral_ei, gaussian_q, gaussian_q_inv

__version__ = "0.1.0"

__all__ = [
    "BatterySpec",
    "CensorStats",
    "ChannelParams",
    "ConfigError",
    "DEFAULTS",
    "DeploymentModel",
    "EpisodeTrace",
    "ExperimentConfig",
    "FeasibilityError",
    "FsmcModel",
    "GlobalState",
    "GuardError",
    "HarvestSpec",
    "JCoefficients",
    "LocalState",
    "McEstimate",
    "ModelValidityError",
    "NetworkModel",
    "NonConvergenceError",
    "NumericError",
    "OscillationError",
    "ParameterError",
    "Policy",
    "PolicyScope",
    "QuantizerMethod",
    "QuantizerSpec",
    "RewardContext",
    "RewardOptions",
    "RewardTable",
    "SWEEP_AXES",
    "ScopeError",
    "SensingParams",
    "SensorModel",
    "SolveReport",
    "ViResult",
    "battery_step",
    "brute_force_policy_oracle",
    "build_channel_fsmc",
    "build_harvest_chain",
    "build_local_kernels",
    "build_network",
    "build_reward_table",
    "censor_stats_fixed",
    "censor_stats_random_disk",
    "design_mmae_thresholds",
    "design_moe_thresholds",
    "exp_integral_e1_scaled",
    "exp_integral_ei",
    "feasible_spend_set",
    "fusion_llr",
    "gaussian_q",
    "gaussian_q_inv",
    "global_state_index",
    "immediate_reward",
    "j_bar_level",
    "j_hat_all_levels",
    "j_hat_level",
    "j_pointwise",
    "level_probabilities",
    "local_reward_array",
    "local_state_index",
    "local_transition",
    "mix_censoring",
    "modified_reward_global",
    "modified_reward_local",
    "quantizer_mae",
    "random_policy",
    "read_policy_csv",
    "run_episodes",
    "run_lifetime_value",
    "run_trajectory",
    "sample_gain_in_level",
    "sample_observation",
    "solve_optimal",
    "solve_suboptimal",
    "stationary_distribution",
    "validate_policy",
    "value_iteration",
    "write_policy_csv",
    "sweep",
    "write_sweep_csv",
]
