"""Per-call-site normalization mode configuration.

One training step touches normalization layers at five distinct places:
three critic forwards (inside the actor loss, the regression forward,
and the target forward) and two actor forwards (inside the actor loss
and when producing target actions).  Each site independently runs batch
norm in Train mode (batch statistics, running-stat update) or Eval mode
(frozen running statistics).  Configurations are written as a
three-letter critic code plus a two-letter actor code over {T, E},
positionally: critic "ETT" means Eval inside the actor loss, Train for
regression, Train for targets.
"""

import dataclasses
import enum

from bnlab.errors import ConfigError
from bnlab.nn import BnMode

_LETTER = {"T": BnMode.TRAIN, "E": BnMode.EVAL}
_NORM_KINDS = (None, "batch", "layer")


class TargetBnStrategy(enum.Enum):
    """How target-critic batch-norm running statistics are maintained.

    TRAIN_MODE: the target site runs on batch statistics, so its stored
    running stats are never read; they are still soft-updated alongside
    parameters so checkpoints stay coherent.  The other three apply when
    the target site reads running stats (Eval): FROZEN never touches
    them after initialization, BLEND applies the same convex update as
    the parameters, COPY overwrites them from the live critic.
    """

    TRAIN_MODE = "train_mode"
    FROZEN = "frozen"
    BLEND = "blend"
    COPY = "copy"


def parse_target_strategy(text):
    try:
        return TargetBnStrategy(str(text).strip().lower())
    except ValueError:
        valid = ", ".join(s.value for s in TargetBnStrategy)
        raise ConfigError(
            "target_stats", f"unknown strategy {text!r} (expected one of {valid})"
        ) from None


@dataclasses.dataclass(frozen=True)
class ModeConfig:
    """Normalization kind per network plus the BN mode at each call site.

    ``mix_ratio`` activates buffer mixing at the critic-in-actor-loss
    site: per ``mix_ratio`` gradient-carrying policy rows, one buffer row
    joins the batch for statistics only.  Mixing presupposes that site
    computes batch statistics, i.e. ``critic_actor_loss`` must be Train.
    """

    critic_actor_loss: BnMode = BnMode.EVAL
    critic_regression: BnMode = BnMode.TRAIN
    critic_target: BnMode = BnMode.TRAIN
    actor_loss: BnMode = BnMode.TRAIN
    actor_target: BnMode = BnMode.TRAIN
    actor_norm: str | None = "batch"
    critic_norm: str | None = "batch"
    mix_ratio: int | None = None

    def __post_init__(self):
        sites = {
            "critic_actor_loss": self.critic_actor_loss,
            "critic_regression": self.critic_regression,
            "critic_target": self.critic_target,
            "actor_loss": self.actor_loss,
            "actor_target": self.actor_target,
        }
        for name, mode in sites.items():
            if mode not in (BnMode.TRAIN, BnMode.EVAL):
                raise ConfigError(name, f"site mode must be Train or Eval, got {mode}")
        if self.actor_loss is BnMode.EVAL and self.actor_target is BnMode.EVAL:
            raise ConfigError(
                "actor_modes",
                "both actor sites in Eval mode would leave the actor's running "
                "statistics permanently at their initial values, degenerating "
                "the normalization layers; at least one site must be Train",
            )
        if self.actor_norm not in _NORM_KINDS:
            raise ConfigError("actor_norm", f"must be one of {_NORM_KINDS}")
        if self.critic_norm not in _NORM_KINDS:
            raise ConfigError("critic_norm", f"must be one of {_NORM_KINDS}")
        if self.mix_ratio is not None:
            if not isinstance(self.mix_ratio, int) or self.mix_ratio < 1:
                raise ConfigError(
                    "mix_ratio", f"must be a positive integer, got {self.mix_ratio!r}"
                )
            if self.critic_actor_loss is not BnMode.TRAIN:
                raise ConfigError(
                    "mix_ratio",
                    "buffer mixing injects rows into batch statistics, which "
                    "only exist when the critic-in-actor-loss site is Train",
                )

    @property
    def mixing(self):
        return self.mix_ratio is not None

    def actor_loss_critic_mode(self):
        """Effective BN mode of the critic forward inside the actor loss."""
        if self.mixing:
            return BnMode.STATS_ONLY_MIXED
        return self.critic_actor_loss

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)


def parse_mode_string(critic, actor, mix_ratio=None):
    """Build a ModeConfig from positional letter codes like ("ETT", "TT").

    Critic letters map to (actor-loss forward, regression forward,
    target forward); actor letters map to (actor-loss forward,
    target-action forward).
    """
    critic = str(critic).strip().upper()
    actor = str(actor).strip().upper()
    if len(critic) != 3:
        raise ConfigError("mode_string", f"critic code needs 3 letters, got {critic!r}")
    if len(actor) != 2:
        raise ConfigError("mode_string", f"actor code needs 2 letters, got {actor!r}")
    for ch in critic + actor:
        if ch not in _LETTER:
            raise ConfigError("mode_string", f"invalid mode letter {ch!r} (use T or E)")
    return ModeConfig(
        critic_actor_loss=_LETTER[critic[0]],
        critic_regression=_LETTER[critic[1]],
        critic_target=_LETTER[critic[2]],
        actor_loss=_LETTER[actor[0]],
        actor_target=_LETTER[actor[1]],
        mix_ratio=mix_ratio,
    )


def resolve_mode_variant(text, mix_ratio=None):
    """Parse the single-string normalization variant used in configs.

    Accepted forms: "Origin" (no normalization anywhere), "LN" (layer
    norm on both networks; modes are irrelevant since layer norm keeps
    no running statistics), or "CCC/AA" letter codes for batch norm,
    e.g. "ETT/TT".
    """
    raw = str(text).strip()
    key = raw.lower()
    if key in ("origin", "none"):
        return ModeConfig(actor_norm=None, critic_norm=None, mix_ratio=mix_ratio)
    if key in ("ln", "layer", "layernorm"):
        return ModeConfig(actor_norm="layer", critic_norm="layer", mix_ratio=mix_ratio)
    if "/" in raw:
        critic, _, actor = raw.partition("/")
        return parse_mode_string(critic, actor, mix_ratio=mix_ratio)
    raise ConfigError(
        "mode_string",
        f"{raw!r} is not 'Origin', 'LN', or a 'CCC/AA' letter code",
    )


def validate_target_strategy(mode, strategy):
    """Check a strategy against the target-site mode; returns it back.

    With no batch norm on the critic there are no running statistics to
    maintain, so any strategy collapses to TRAIN_MODE.
    """
    if mode.critic_norm != "batch":
        return TargetBnStrategy.TRAIN_MODE
    if mode.critic_target is BnMode.TRAIN:
        if strategy is not TargetBnStrategy.TRAIN_MODE:
            raise ConfigError(
                "target_stats",
                f"{strategy.value!r} maintains running statistics the target "
                "site never reads; with a Train-mode target site use "
                "'train_mode'",
            )
    elif strategy is TargetBnStrategy.TRAIN_MODE:
        raise ConfigError(
            "target_stats",
            "an Eval-mode target site reads running statistics, so a "
            "maintenance strategy is required: 'frozen', 'blend', or 'copy'",
        )
    return strategy


def default_target_strategy(mode):
    """TRAIN_MODE when the target site recomputes stats, else BLEND."""
    if mode.critic_norm == "batch" and mode.critic_target is BnMode.EVAL:
        return TargetBnStrategy.BLEND
    return TargetBnStrategy.TRAIN_MODE
