"""Torque-limited pendulum swing-up (classic benchmark dynamics).

Semi-implicit Euler integration of
    dth_dot = (3 g / 2 l) sin(th) + 3 / (m l^2) * u
with the torque clipped to +-max_torque, velocity to +-max_speed, and
the angle wrapped to (-pi, pi].  The quadratic cost is charged on the
state where the torque is applied (pre-integration), so the upright
rest state with zero torque is reward 0.

Observations are (cos th, sin th, th_dot); internally the state is
(th, th_dot).
"""

import math
from dataclasses import dataclass

import numpy as np

from bnlab.envs.base import EnvStep


@dataclass(frozen=True)
class PendulumParams:
    gravity: float = 10.0
    mass: float = 1.0
    length: float = 1.0
    dt: float = 0.05
    max_torque: float = 2.0
    max_speed: float = 8.0


def wrap_angle(theta):
    """Wrap to (-pi, pi]."""
    w = math.fmod(theta + math.pi, 2.0 * math.pi)
    if w <= 0.0:
        w += 2.0 * math.pi
    return w - math.pi


def pendulum_step(params, state, torque):
    th, th_dot = state
    u = min(max(float(torque), -params.max_torque), params.max_torque)
    cost = wrap_angle(th) ** 2 + 0.1 * th_dot**2 + 0.001 * u**2
    g, m, length, dt = params.gravity, params.mass, params.length, params.dt
    th_dot_new = th_dot + (
        3.0 * g / (2.0 * length) * math.sin(th) + 3.0 / (m * length**2) * u
    ) * dt
    th_dot_new = min(max(th_dot_new, -params.max_speed), params.max_speed)
    th_new = wrap_angle(th + th_dot_new * dt)
    return EnvStep(
        next_state=np.array([th_new, th_dot_new]), reward=-cost, done=False
    )


class PendulumEnv:
    def __init__(self, params=None, horizon=200, rng=None):
        self.params = params if params is not None else PendulumParams()
        self.horizon = horizon
        self.rng = rng if rng is not None else np.random.default_rng()
        self.observation_dim = 3
        self.action_dim = 1
        self.action_limit = self.params.max_torque
        self._state = (math.pi, 0.0)
        self._t = 0

    def _obs(self):
        th, th_dot = self._state
        return np.array([math.cos(th), math.sin(th), th_dot])

    def reset(self):
        th = self.rng.uniform(-math.pi, math.pi)
        th_dot = self.rng.uniform(-1.0, 1.0)
        self._state = (th, th_dot)
        self._t = 0
        return self._obs()

    def step(self, action):
        u = np.asarray(action).reshape(-1)[0]
        out = pendulum_step(self.params, self._state, u)
        self._state = (float(out.next_state[0]), float(out.next_state[1]))
        self._t += 1
        truncated = self._t >= self.horizon
        return EnvStep(
            next_state=self._obs(),
            reward=out.reward,
            done=truncated,
            info={"truncated": truncated},
        )
