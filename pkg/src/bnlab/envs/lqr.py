"""Scalar discounted LQR with closed-form solution.

Dynamics s' = A s + B a, reward = -(state_cost * s^2 + action_cost * a^2)
(cost negated so a reward-maximizing agent applies unchanged).  The
discounted problem has a quadratic optimal value -P s^2 where P is the
unique non-negative root of a scalar Riccati quadratic, and the optimal
Q-function is an explicit quadratic form -- which makes this environment
an exact oracle for critics and policies.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from bnlab.envs.base import EnvStep


@dataclass(frozen=True)
class LqrSpec:
    a: float = 1.0  # state gain
    b: float = 1.0  # action gain
    state_cost: float = 1.0
    action_cost: float = 1.0
    discount: float = 0.99

    def __post_init__(self):
        if self.state_cost <= 0:
            raise ValueError(f"state_cost must be > 0, got {self.state_cost}")
        if self.action_cost <= 0:
            raise ValueError(f"action_cost must be > 0, got {self.action_cost}")
        if not 0.0 <= self.discount < 1.0:
            raise ValueError(f"discount must be in [0, 1), got {self.discount}")


@dataclass(frozen=True)
class LqrSolution:
    """Value coefficient P plus the quadratic-form coefficients of Q*.

    Q*(s, a) = -(q_s s^2 + r_a a^2 + 2 cross s a), V*(s) = -P s^2.
    """

    p: float
    q_s: float
    r_a: float
    cross: float
    spec: LqrSpec = field(repr=False)


def lqr_solve(spec):
    """Solve the scalar Riccati quadratic for the discounted problem.

    The quadratic is  qa P^2 + qb P + qc = 0  with
        qa = discount * b^2
        qb = action_cost (1 - discount a^2) - discount state_cost b^2
        qc = -state_cost * action_cost
    and P is its larger root (the unique non-negative one).  With
    discount 0 the quadratic degenerates to a linear equation.
    """
    g = spec.discount
    qa = g * spec.b**2
    qb = spec.action_cost * (1.0 - g * spec.a**2) - g * spec.state_cost * spec.b**2
    qc = -spec.state_cost * spec.action_cost
    if qa == 0.0:
        if qb <= 0.0:
            raise ValueError(
                "no non-negative value solution: system is uncontrollable "
                f"(linear coefficient {qb} <= 0 with zero quadratic term)"
            )
        p = -qc / qb
    else:
        disc = qb * qb - 4.0 * qa * qc
        # qc < 0 and qa > 0 make -4*qa*qc positive, so this cannot fire
        # for a valid spec; kept as a guard for the closed form.
        assert disc >= 0.0, f"negative Riccati discriminant {disc}"
        root = math.sqrt(disc)
        if qb <= 0.0:
            p = (-qb + root) / (2.0 * qa)
        else:
            # Same root, evaluated without the catastrophic cancellation
            # -qb + root when qb > 0 (e.g. tiny action gain).
            p = -2.0 * qc / (qb + root)
    q_s = spec.state_cost + g * spec.a**2 * p
    r_a = spec.action_cost + g * spec.b**2 * p
    cross = g * spec.a * spec.b * p
    return LqrSolution(p=p, q_s=q_s, r_a=r_a, cross=cross, spec=spec)


def riccati_residual(spec, p):
    g = spec.discount
    qa = g * spec.b**2
    qb = spec.action_cost * (1.0 - g * spec.a**2) - g * spec.state_cost * spec.b**2
    qc = -spec.state_cost * spec.action_cost
    return qa * p * p + qb * p + qc


def lqr_optimal_q(sol, s, a):
    """Closed-form optimal Q value; accepts scalars or arrays."""
    return -(sol.q_s * s**2 + sol.r_a * a**2 + 2.0 * sol.cross * s * a)


def lqr_optimal_value(sol, s):
    return -sol.p * s**2


def lqr_optimal_gain(sol):
    """Feedback gain k* with a* = k* s maximizing Q*(s, .)."""
    if sol.r_a <= 0:
        raise ValueError(f"r_a must be positive, got {sol.r_a}")
    return -sol.cross / sol.r_a


def lqr_step(spec, s, a):
    """Pure one-step transition (no horizon bookkeeping)."""
    s_next = spec.a * s + spec.b * a
    reward = -(spec.state_cost * s * s + spec.action_cost * a * a)
    return EnvStep(next_state=s_next, reward=reward, done=False)


class LqrEnv:
    """Episodic wrapper: uniform initial states, action box, truncation."""

    def __init__(self, spec, horizon=200, action_limit=1.0, init_range=1.0, rng=None):
        if horizon < 1:
            raise ValueError(f"horizon must be >= 1, got {horizon}")
        self.spec = spec
        self.horizon = horizon
        self.action_limit = float(action_limit)
        self.init_range = float(init_range)
        self.rng = rng if rng is not None else np.random.default_rng()
        self.observation_dim = 1
        self.action_dim = 1
        self._s = 0.0
        self._t = 0

    def reset(self):
        self._s = float(self.rng.uniform(-self.init_range, self.init_range))
        self._t = 0
        return np.array([self._s])

    def step(self, action):
        a = float(np.clip(np.asarray(action).reshape(-1)[0],
                          -self.action_limit, self.action_limit))
        out = lqr_step(self.spec, self._s, a)
        self._s = out.next_state
        self._t += 1
        truncated = self._t >= self.horizon
        return EnvStep(
            next_state=np.array([self._s]),
            reward=out.reward,
            done=truncated,
            info={"truncated": truncated},
        )
