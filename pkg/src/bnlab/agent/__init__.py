"""Mode-aware off-policy actor-critic agent."""

from bnlab.agent.checkpoint import load_checkpoint, save_checkpoint
from bnlab.agent.ddpg import (
    METRIC_COLUMNS,
    AgentConfig,
    DdpgAgent,
    NoiseSchedule,
    QBiasReport,
    RunMetrics,
    TrainSettings,
    evaluate_policy,
    noise_sigma,
    train,
)
from bnlab.agent.modes import (
    ModeConfig,
    TargetBnStrategy,
    default_target_strategy,
    parse_mode_string,
    parse_target_strategy,
    resolve_mode_variant,
    validate_target_strategy,
)

__all__ = [
    "METRIC_COLUMNS",
    "AgentConfig",
    "DdpgAgent",
    "ModeConfig",
    "NoiseSchedule",
    "QBiasReport",
    "RunMetrics",
    "TargetBnStrategy",
    "TrainSettings",
    "default_target_strategy",
    "evaluate_policy",
    "load_checkpoint",
    "noise_sigma",
    "parse_mode_string",
    "parse_target_strategy",
    "resolve_mode_variant",
    "save_checkpoint",
    "train",
    "validate_target_strategy",
]
