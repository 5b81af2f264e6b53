"""Twin-critic deterministic-policy agent with per-site norm modes.

The update step follows the standard off-policy actor-critic routine:
sample a batch, regress both critics onto the min-twin bootstrapped
target, then ascend the min-twin value of the policy's (noisy) actions
while the critic parameters stay frozen.  Every network forward runs
under the batch-norm mode configured for its call site, which is the
entire point of this package.
"""

import dataclasses
import math

import numpy as np

from bnlab.drift import action_dist_diff
from bnlab.errors import TrainingFault
from bnlab.nn import BnMode, make_optimizer, mlp, net_backward, net_forward
from bnlab.replay import Transition, sample_mixed

from .modes import ModeConfig, TargetBnStrategy, default_target_strategy, \
    validate_target_strategy

METRIC_COLUMNS = (
    "step",
    "episode_return",
    "eval_return",
    "critic_loss",
    "actor_loss",
    "q_bias_mean",
    "q_bias_std",
    "a_mean_diff",
    "a_var_diff",
    "coverage",
    "sigma_t",
)


@dataclasses.dataclass(frozen=True)
class NoiseSchedule:
    """Piecewise-linear exploration noise with box-clipped draws.

    ``sigma_at(t)`` interpolates between ``sigma_final`` (at step 0) and
    ``sigma_init`` (from ``decay_steps`` on).  That orientation looks
    backwards next to the field names, but it is the schedule exactly as
    published; set ``decaying=True`` for the conventional reading that
    starts at ``sigma_init`` and settles at ``sigma_final``.  Noise
    samples are clipped to ``[-clip_c, clip_c]`` before being added to
    an action.
    """

    sigma_init: float = 1.0
    sigma_final: float = 0.1
    decay_steps: int = 1
    clip_c: float = 0.3
    decaying: bool = False

    def __post_init__(self):
        if self.sigma_init < 0 or self.sigma_final < 0:
            raise ValueError("noise standard deviations must be >= 0")
        if self.decay_steps < 0:
            raise ValueError(f"decay_steps must be >= 0, got {self.decay_steps}")
        if not self.clip_c > 0:
            raise ValueError(f"clip_c must be > 0, got {self.clip_c}")

    def sigma_at(self, t):
        return noise_sigma(t, self)


def noise_sigma(t, sched):
    """Exploration noise scale at step ``t`` (see NoiseSchedule)."""
    if t < 0:
        raise ValueError(f"step must be >= 0, got {t}")
    if sched.decay_steps <= 0:
        frac = 1.0
    else:
        frac = min(t / sched.decay_steps, 1.0)
    if sched.decaying:
        return sched.sigma_final + (1.0 - frac) * (sched.sigma_init - sched.sigma_final)
    return sched.sigma_init + (1.0 - frac) * (sched.sigma_final - sched.sigma_init)


@dataclasses.dataclass(frozen=True)
class AgentConfig:
    state_dim: int
    action_dim: int
    action_limit: float = 1.0
    hidden: tuple = (256, 256)
    activation: str = "relu"
    norm_pos: str = "post"
    mode: ModeConfig = dataclasses.field(default_factory=ModeConfig)
    target_stats: TargetBnStrategy | None = None  # None -> derive from mode
    discount: float = 0.99
    tau: float = 0.01
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    noise: NoiseSchedule = dataclasses.field(default_factory=NoiseSchedule)

    def __post_init__(self):
        if self.state_dim < 1 or self.action_dim < 1:
            raise ValueError("state_dim and action_dim must be >= 1")
        if not self.action_limit > 0:
            raise ValueError(f"action_limit must be > 0, got {self.action_limit}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")
        if not 0.0 < self.tau <= 1.0:
            raise ValueError(f"tau must be in (0, 1], got {self.tau}")
        if not self.learning_rate > 0:
            raise ValueError(f"learning_rate must be > 0, got {self.learning_rate}")
        strategy = self.target_stats
        if strategy is None:
            strategy = default_target_strategy(self.mode)
        strategy = validate_target_strategy(self.mode, strategy)
        object.__setattr__(self, "target_stats", strategy)
        object.__setattr__(self, "hidden", tuple(self.hidden))


class DdpgAgent:
    """Actor, twin critics, twin target critics, and their optimizers.

    ``rng`` drives weight initialization first and exploration/update
    noise afterwards, so construction plus a fixed call sequence is
    bit-reproducible.  ``sigma_now`` is the live exploration scale; the
    training loop refreshes it from the schedule every step.
    """

    def __init__(self, config, rng):
        self.config = config
        self.mode = config.mode
        self.rng = rng
        self.discount = config.discount
        self.tau = config.tau
        self.noise = config.noise
        self.action_limit = config.action_limit
        self.sigma_now = noise_sigma(0, config.noise)

        m = config.mode
        self.actor = mlp(
            config.state_dim,
            config.hidden,
            config.action_dim,
            rng,
            activation=config.activation,
            out_activation="tanh",
            norm=m.actor_norm,
            norm_pos=config.norm_pos,
            output_scale=config.action_limit,
        )
        critic_in = config.state_dim + config.action_dim
        self.critics = [
            mlp(
                critic_in,
                config.hidden,
                1,
                rng,
                activation=config.activation,
                out_activation="linear",
                norm=m.critic_norm,
                norm_pos=config.norm_pos,
            )
            for _ in range(2)
        ]
        self.target_critics = [c.clone() for c in self.critics]
        self.actor_opt = make_optimizer(config.optimizer, config.learning_rate)
        self.critic_opts = [
            make_optimizer(config.optimizer, config.learning_rate) for _ in range(2)
        ]
        self.last_action_diff = (math.nan, math.nan)

    # -- forwards ---------------------------------------------------------

    def _policy_actions(self, states, mode, sigma, want_tape):
        """Actor forward plus clipped noise and action-box clipping.

        Returns (actions, tape_or_None, grad_mask) where grad_mask zeroes
        the positions saturated by the box clip (the clip has zero
        derivative there; the additive noise itself carries none).
        """
        out, tape = net_forward(self.actor, states, mode=mode, want_tape=want_tape)
        if sigma > 0:
            eps = self.rng.normal(0.0, sigma, size=out.shape)
            np.clip(eps, -self.noise.clip_c, self.noise.clip_c, out=eps)
            pre = out + eps
        else:
            pre = out
        lim = self.action_limit
        actions = np.clip(pre, -lim, lim)
        mask = (pre > -lim) & (pre < lim)
        return actions, tape, mask

    def select_action(self, s, sigma=None, explore=False, mode=BnMode.EVAL):
        """Action for one state or a batch of states.

        Without ``explore`` the policy is deterministic (no noise drawn,
        no rng consumed).  Eval mode never mutates running statistics,
        so action selection is safe mid-evaluation.
        """
        s = np.asarray(s, dtype=float)
        if not np.all(np.isfinite(s)):
            raise ValueError("state contains non-finite values")
        single = s.ndim == 1
        if single:
            s = s[None, :]
        scale = 0.0
        if explore:
            scale = self.sigma_now if sigma is None else float(sigma)
        actions, _, _ = self._policy_actions(s, mode, scale, want_tape=False)
        return actions[0] if single else actions

    def _critic_forward(self, nets, s, a, mode, aux=None, want_tape=False):
        x = np.concatenate([s, a], axis=1)
        qs, tapes = [], []
        for net in nets:
            q, tape = net_forward(net, x, mode=mode, aux=aux, want_tape=want_tape)
            qs.append(q[:, 0])
            tapes.append(tape)
        return qs, tapes

    # -- updates ----------------------------------------------------------

    def critic_target(self, batch, mode=None):
        """Bootstrapped regression targets y = r + discount*(1-done)*minQ.

        Next actions come from the actor under its target-action site
        mode, with the same clipped noise used elsewhere; the min runs
        over the two target critics under the target-site mode.  No
        gradients flow anywhere here.
        """
        if mode is None:
            mode = self.mode.critic_target
        a_next, _, _ = self._policy_actions(
            batch.s_next, self.mode.actor_target, self.sigma_now, want_tape=False
        )
        qs, _ = self._critic_forward(self.target_critics, batch.s_next, a_next, mode)
        q_min = np.minimum(qs[0], qs[1])
        y = batch.r + self.discount * (1.0 - batch.done.astype(float)) * q_min
        if not np.all(np.isfinite(y)):
            raise TrainingFault("non-finite critic targets")
        return y

    def _critic_loss_and_grads(self, index, batch, y):
        """Regression loss and parameter gradients for one critic."""
        critic = self.critics[index]
        qs, tapes = self._critic_forward(
            [critic], batch.s, batch.a, self.mode.critic_regression, want_tape=True
        )
        resid = qs[0] - y
        # A diverging critic can overflow here; the fault below is the
        # intended signal, so silence the redundant overflow warning.
        with np.errstate(over="ignore", invalid="ignore"):
            loss = float(np.mean(resid * resid))
        if not math.isfinite(loss):
            raise TrainingFault("non-finite critic loss")
        dq = (2.0 / float(len(batch))) * resid
        _, grads = net_backward(critic, tapes[0], dq[:, None])
        return loss, grads

    def critic_update(self, batch):
        """One regression step per critic against the shared targets.

        Returns the summed per-critic mean-squared errors.  Running
        statistics move only when the regression site is in Train mode.
        """
        y = self.critic_target(batch)
        total = 0.0
        for index, opt in enumerate(self.critic_opts):
            loss, grads = self._critic_loss_and_grads(index, batch, y)
            opt.step(self.critics[index].parameters(), grads)
            total += loss
        return total

    def _actor_loss_and_grads(self, batch, buf=None):
        """Actor loss, actor parameter gradients, and the actions used.

        The loss is the negated batch mean of the min-twin critic value
        at the policy's (noise-perturbed, box-clipped) actions.  Critic
        parameter gradients are never formed — only each critic's input
        gradient flows back, and only through the action columns.
        """
        s = batch.s
        m = float(len(batch))
        actions, atape, amask = self._policy_actions(
            s, self.mode.actor_loss, self.sigma_now, want_tape=True
        )
        aux = None
        critic_mode = self.mode.actor_loss_critic_mode()
        if self.mode.mixing:
            if buf is None:
                raise ValueError("buffer mixing requires the replay buffer")
            (_, _), (aux_s, aux_a) = sample_mixed(buf, s, actions, self.mode.mix_ratio)
            aux = np.concatenate([aux_s, aux_a], axis=1)
        qs, tapes = self._critic_forward(
            self.critics, s, actions, critic_mode, aux=aux, want_tape=True
        )
        q_min = np.minimum(qs[0], qs[1])
        loss = -float(np.mean(q_min))
        if not math.isfinite(loss):
            raise TrainingFault("non-finite actor loss")
        first_is_min = qs[0] <= qs[1]
        d_action = np.zeros_like(actions)
        n_state = s.shape[1]
        for k, (critic, tape) in enumerate(zip(self.critics, tapes)):
            picked = first_is_min if k == 0 else ~first_is_min
            dq = np.where(picked, -1.0 / m, 0.0)[:, None]
            dx, _ = net_backward(critic, tape, dq, want_param_grads=False)
            d_action += dx[:, n_state:]
        d_action *= amask
        _, agrads = net_backward(self.actor, atape, d_action)
        return loss, agrads, actions

    def actor_update(self, batch, buf=None):
        """One ascent step on the min-twin value of the policy's actions.

        With buffer mixing configured, ``buf`` supplies the
        statistics-only rows and the critic forwards run in the mixed
        mode.  Also refreshes ``last_action_diff``, the l2 gaps between
        the policy-action batch moments and the sampled batch's action
        moments.
        """
        loss, agrads, actions = self._actor_loss_and_grads(batch, buf)
        self.actor_opt.step(self.actor.parameters(), agrads)
        self.last_action_diff = action_dist_diff(actions, batch.a)
        return loss

    def soft_update(self):
        """Blend target parameters toward the live critics.

        Running statistics follow the configured strategy: TRAIN_MODE
        and BLEND apply the same convex combination as the parameters,
        COPY overwrites from the live critic, FROZEN leaves them alone.
        """
        t = self.tau
        strategy = self.config.target_stats
        for critic, target in zip(self.critics, self.target_critics):
            for p, tp in zip(critic.parameters(), target.parameters()):
                tp *= 1.0 - t
                tp += t * p
            if strategy is TargetBnStrategy.FROZEN:
                continue
            for live, tgt in zip(critic.bn_states(), target.bn_states()):
                if strategy is TargetBnStrategy.COPY:
                    tgt.run_mean[:] = live.run_mean
                    tgt.run_var[:] = live.run_var
                else:
                    tgt.run_mean *= 1.0 - t
                    tgt.run_mean += t * live.run_mean
                    tgt.run_var *= 1.0 - t
                    tgt.run_var += t * live.run_var

    # -- diagnostics -------------------------------------------------------

    def q_bias(self, env, episodes, policy_fn=None, critic_fn=None,
               bootstrap_fn=None):
        """Normalized prediction bias of the critic along on-policy rollouts.

        Rolls the deterministic policy for ``episodes`` episodes, forms
        discounted Monte-Carlo returns G (bootstrapping truncated tails
        with the target critics), and reports mean/std over the samples
        (Q(s, a) - G) / max(|G|, 1).  Every forward runs in Eval mode;
        nothing is mutated.  The three hooks exist so exact substitutes
        (e.g. a closed-form Q) can be evaluated with the same protocol.
        """
        if episodes < 1:
            raise ValueError(f"episodes must be >= 1, got {episodes}")
        if policy_fn is None:
            policy_fn = lambda s: self.select_action(s, explore=False)
        if critic_fn is None:
            def critic_fn(s, a):
                qs, _ = self._critic_forward(self.critics, s, a, BnMode.EVAL)
                return np.minimum(qs[0], qs[1])
        if bootstrap_fn is None:
            def bootstrap_fn(s):
                a = np.atleast_2d(policy_fn(s))
                qs, _ = self._critic_forward(self.target_critics, s, a, BnMode.EVAL)
                return np.minimum(qs[0], qs[1])
        biases = []
        for _ in range(episodes):
            states, acts, rewards = [], [], []
            s = env.reset()
            while True:
                a = policy_fn(s)
                step = env.step(a)
                states.append(s)
                acts.append(np.atleast_1d(a))
                rewards.append(step.reward)
                s = step.next_state
                if step.done:
                    tail = 0.0
                    if not step.absorbing:
                        tail = float(bootstrap_fn(np.atleast_2d(s))[0])
                    break
            g = tail
            returns = np.empty(len(rewards))
            for i in range(len(rewards) - 1, -1, -1):
                g = rewards[i] + self.discount * g
                returns[i] = g
            q = critic_fn(np.asarray(states), np.asarray(acts))
            biases.append((q - returns) / np.maximum(np.abs(returns), 1.0))
        all_b = np.concatenate(biases)
        return QBiasReport(
            mean_bias=float(all_b.mean()),
            std_bias=float(all_b.std()),
            samples=int(all_b.size),
        )


@dataclasses.dataclass(frozen=True)
class QBiasReport:
    mean_bias: float
    std_bias: float
    samples: int

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError("a bias report needs at least one sample")


@dataclasses.dataclass(frozen=True)
class TrainSettings:
    total_steps: int
    warmup_steps: int = 1000
    batch_size: int = 256
    eval_every: int = 1000
    eval_episodes: int = 5
    qbias_episodes: int = 2
    eval_discounted: bool = False

    def __post_init__(self):
        if self.total_steps < 0:
            raise ValueError("total_steps must be >= 0")
        if self.warmup_steps < 0:
            raise ValueError("warmup_steps must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.eval_every < 1:
            raise ValueError("eval_every must be >= 1")
        if self.eval_episodes < 1:
            raise ValueError("eval_episodes must be >= 1")
        if self.qbias_episodes < 0:
            raise ValueError("qbias_episodes must be >= 0")


class RunMetrics:
    """Fixed-schema metrics time series with CSV round-tripping.

    One row per evaluation point; the fault fields record where a run
    aborted (non-finite losses/targets) so partial results stay usable.
    """

    def __init__(self, columns=METRIC_COLUMNS):
        self.columns = tuple(columns)
        self.rows = []
        self.fault_step = None
        self.fault_message = None

    def append(self, values):
        if len(values) != len(self.columns):
            raise ValueError(
                f"row has {len(values)} values for {len(self.columns)} columns"
            )
        self.rows.append(tuple(float(v) for v in values))

    def column(self, name):
        idx = self.columns.index(name)
        return np.array([row[idx] for row in self.rows])

    @property
    def faulted(self):
        return self.fault_step is not None

    def to_csv(self, path):
        lines = [",".join(self.columns)]
        for row in self.rows:
            cells = [repr(v) for v in row]
            cells[0] = str(int(row[0]))  # step column stays integral
            lines.append(",".join(cells))
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write("\n".join(lines) + "\n")

    @classmethod
    def from_csv(cls, path):
        with open(path, "r", encoding="utf-8") as fh:
            lines = [ln.strip() for ln in fh if ln.strip()]
        if not lines:
            raise ValueError(f"{path}: empty metrics file")
        out = cls(columns=tuple(lines[0].split(",")))
        for ln in lines[1:]:
            out.append([float(cell) for cell in ln.split(",")])
        return out


def evaluate_policy(agent, env, episodes, discounted=False):
    """Mean return of the deterministic policy over ``episodes`` episodes."""
    totals = []
    for _ in range(episodes):
        s = env.reset()
        total, scale = 0.0, 1.0
        while True:
            step = env.step(agent.select_action(s, explore=False))
            total += scale * step.reward
            if discounted:
                scale *= agent.discount
            s = step.next_state
            if step.done:
                break
        totals.append(total)
    return float(np.mean(totals))


def train(agent, env, buf, settings, eval_env_fn=None, hooks=None):
    """Run the interact/update loop and collect the metrics series.

    Per environment step: act (uniform random during warmup, noisy
    policy afterwards), push the transition, then one critic update, one
    actor update, and one target soft update on a freshly sampled batch.
    Evaluation rows are appended every ``eval_every`` steps and at the
    final step; ``eval_env_fn`` must build a freshly seeded environment
    so successive evaluations see identical initial states.  A training
    fault stops the loop and leaves the partial series (with the fault
    step recorded) — it does not raise.
    """
    metrics = RunMetrics()
    if settings.total_steps == 0:
        return metrics
    dim_a = env.action_dim
    lim = agent.action_limit
    s = env.reset()
    ep_return = 0.0
    last_ep_return = math.nan
    critic_loss = math.nan
    actor_loss = math.nan
    for t in range(settings.total_steps):
        agent.sigma_now = noise_sigma(t, agent.noise)
        if t < settings.warmup_steps:
            a = agent.rng.uniform(-lim, lim, size=dim_a)
        else:
            a = agent.select_action(s, explore=True)
            if not np.all(np.isfinite(a)):
                metrics.fault_step = t
                metrics.fault_message = "non-finite action from the policy"
                break
        step = env.step(a)
        buf.push_transition(
            Transition(s, np.atleast_1d(a), step.reward, step.next_state,
                       step.absorbing)
        )
        ep_return += step.reward
        if step.done:
            last_ep_return = ep_return
            ep_return = 0.0
            s = env.reset()
        else:
            s = step.next_state

        if t >= settings.warmup_steps and len(buf) >= settings.batch_size:
            try:
                batch = buf.sample(settings.batch_size)
                critic_loss = agent.critic_update(batch)
                actor_loss = agent.actor_update(batch, buf)
                agent.soft_update()
            except TrainingFault as fault:
                metrics.fault_step = t
                metrics.fault_message = str(fault)
                fault.step = t
                break

        if (t + 1) % settings.eval_every == 0 or t + 1 == settings.total_steps:
            eval_return = math.nan
            qb_mean = qb_std = math.nan
            if eval_env_fn is not None:
                eval_return = evaluate_policy(
                    agent, eval_env_fn(), settings.eval_episodes,
                    discounted=settings.eval_discounted,
                )
                if settings.qbias_episodes > 0:
                    report = agent.q_bias(eval_env_fn(), settings.qbias_episodes)
                    qb_mean, qb_std = report.mean_bias, report.std_bias
            row = (
                t + 1,
                last_ep_return,
                eval_return,
                critic_loss,
                actor_loss,
                qb_mean,
                qb_std,
                agent.last_action_diff[0],
                agent.last_action_diff[1],
                getattr(env, "coverage", math.nan),
                agent.sigma_now,
            )
            metrics.append(row)
            if hooks is not None:
                hooks(t + 1, dict(zip(metrics.columns, row)))
    return metrics
