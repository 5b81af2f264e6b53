"""Environment tests: closed-form LQR oracles, maze mechanics and
coverage, pendulum integration."""

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bnlab.envs.base import EnvStep
from bnlab.envs.lqr import (
    LqrEnv,
    LqrSpec,
    lqr_optimal_gain,
    lqr_optimal_q,
    lqr_optimal_value,
    lqr_solve,
    lqr_step,
    riccati_residual,
)
from bnlab.envs.maze import (
    Box,
    MazeEnv,
    MazeSpec,
    cell_index,
    coverage,
    default_maze,
    maze_step,
)
from bnlab.envs.pendulum import PendulumEnv, PendulumParams, pendulum_step, wrap_angle


def random_specs(n, seed=0):
    """Random well-posed problems; the action gain stays bounded away
    from zero because near-uncontrollable systems have P -> infinity
    (no finite oracle to compare against)."""
    rng = np.random.default_rng(seed)
    for _ in range(n):
        yield LqrSpec(
            a=float(rng.uniform(-1.5, 1.5)),
            b=float(rng.choice([-1, 1]) * rng.uniform(0.1, 2.0)),
            state_cost=float(rng.uniform(0.05, 5.0)),
            action_cost=float(rng.uniform(0.05, 5.0)),
            discount=float(rng.uniform(0.0, 0.999)),
        )


class TestLqrSolve:
    def test_canonical_spec(self):
        spec = LqrSpec(a=1, b=1, state_cost=1, action_cost=1, discount=0.99)
        sol = lqr_solve(spec)
        # Quadratic: 0.99 P^2 - 0.98 P - 1 = 0, larger root ~1.61525.
        assert abs(riccati_residual(spec, sol.p)) < 1e-12
        assert sol.p == pytest.approx(1.61525, abs=1e-4)
        assert sol.q_s == pytest.approx(1 + 0.99 * sol.p)
        assert sol.r_a == pytest.approx(1 + 0.99 * sol.p)
        assert sol.cross == pytest.approx(0.99 * sol.p)

    def test_vanishing_state_cost_gives_zero_value(self):
        spec = LqrSpec(a=0.5, b=1.0, state_cost=1e-12, action_cost=1.0, discount=0.9)
        assert lqr_solve(spec).p < 1e-11

    def test_zero_discount_is_myopic(self):
        spec = LqrSpec(a=1.3, b=0.7, state_cost=2.5, action_cost=1.0, discount=0.0)
        sol = lqr_solve(spec)
        assert sol.p == pytest.approx(2.5, abs=1e-14)
        assert sol.cross == 0.0
        assert lqr_optimal_gain(sol) == 0.0

    def test_residual_small_over_random_specs(self):
        worst = max(
            abs(riccati_residual(spec, lqr_solve(spec).p))
            for spec in random_specs(1000, seed=1)
        )
        assert worst < 1e-10

    def test_value_is_nonnegative(self):
        for spec in random_specs(200, seed=2):
            assert lqr_solve(spec).p >= 0.0

    def test_riccati_consistency_identity(self):
        # max_a Q*(s, a) must equal V*(s): q_s - cross^2 / r_a == P.
        for spec in random_specs(200, seed=3):
            sol = lqr_solve(spec)
            assert sol.q_s - sol.cross**2 / sol.r_a == pytest.approx(
                sol.p, rel=1e-10, abs=1e-10
            )

    def test_invalid_specs_rejected(self):
        with pytest.raises(ValueError, match="state_cost"):
            LqrSpec(state_cost=0.0)
        with pytest.raises(ValueError, match="discount"):
            LqrSpec(discount=1.0)


class TestOptimalQ:
    def test_origin_is_zero(self):
        sol = lqr_solve(LqrSpec())
        assert lqr_optimal_q(sol, 0.0, 0.0) == 0.0

    def test_reads_off_coefficients(self):
        sol = lqr_solve(LqrSpec())
        assert lqr_optimal_q(sol, 1.0, 0.0) == pytest.approx(-sol.q_s)

    def test_one_step_bellman_identity(self):
        rng = np.random.default_rng(4)
        for spec in random_specs(1000, seed=5):
            sol = lqr_solve(spec)
            s = float(rng.uniform(-3, 3))
            a = float(rng.uniform(-3, 3))
            step = lqr_step(spec, s, a)
            rhs = step.reward + spec.discount * lqr_optimal_value(
                sol, step.next_state
            )
            assert lqr_optimal_q(sol, s, a) == pytest.approx(rhs, abs=1e-9)

    def test_gain_matches_bruteforce_argmax(self):
        for spec in list(random_specs(25, seed=6)) + [LqrSpec()]:
            sol = lqr_solve(spec)
            k = lqr_optimal_gain(sol)
            for s in (-2.0, 0.5, 1.0):
                grid = np.linspace(k * s - 1.0, k * s + 1.0, 2_000_001)
                best = grid[np.argmax(lqr_optimal_q(sol, s, grid))]
                assert best == pytest.approx(k * s, abs=1e-6)

    def test_canonical_gain_form(self):
        sol = lqr_solve(LqrSpec(a=1, b=1, state_cost=1, action_cost=1, discount=0.99))
        expected = -0.99 * sol.p / (1 + 0.99 * sol.p)
        assert lqr_optimal_gain(sol) == pytest.approx(expected, abs=1e-14)


class TestLqrStep:
    def test_arithmetic(self):
        spec = LqrSpec()
        out = lqr_step(spec, 1.0, -1.0)
        assert out.next_state == 0.0
        assert out.reward == -(spec.state_cost + spec.action_cost)

    def test_origin_fixed_point(self):
        out = lqr_step(LqrSpec(), 0.0, 0.0)
        assert out.next_state == 0.0 and out.reward == 0.0

    def test_markov_composition(self):
        spec = LqrSpec(a=0.9, b=1.1)
        mid = lqr_step(spec, 0.7, -0.2).next_state
        assert lqr_step(spec, mid, 0.4).next_state == pytest.approx(
            spec.a * mid + spec.b * 0.4
        )


class TestLqrEnv:
    def test_truncates_at_horizon(self):
        env = LqrEnv(LqrSpec(), horizon=5, rng=np.random.default_rng(0))
        env.reset()
        steps = [env.step(np.array([0.1])) for _ in range(5)]
        assert all(not s.done for s in steps[:-1])
        assert steps[-1].done and steps[-1].truncated and not steps[-1].absorbing

    def test_action_clipped_to_box(self):
        env = LqrEnv(LqrSpec(a=0.0, b=1.0), action_limit=0.5,
                     rng=np.random.default_rng(0))
        env.reset()
        out = env.step(np.array([10.0]))
        assert out.next_state[0] == pytest.approx(0.5)

    def test_deterministic_given_seed(self):
        def run(seed):
            env = LqrEnv(LqrSpec(), rng=np.random.default_rng(seed))
            obs = [env.reset()]
            for i in range(20):
                obs.append(env.step(np.array([math.sin(i)])).next_state)
            return np.concatenate(obs)

        assert (run(7) == run(7)).all()
        assert (run(7) != run(8)).any()


class TestMaze:
    def test_null_action_pays_step_penalty(self):
        spec = default_maze()
        out = maze_step(spec, spec.start, (0.0, 0.0))
        assert not out.done
        assert out.reward == pytest.approx(spec.step_penalty)
        assert tuple(out.next_state) == spec.start

    def test_goal_region_terminates_with_bonus(self):
        spec = default_maze()
        out = maze_step(spec, spec.goal, (0.01, 0.0))
        assert out.done and out.info.get("goal")
        assert out.reward == spec.goal_bonus

    def test_death_zone_terminates_with_penalty(self):
        spec = default_maze()
        inside = (0.6, 0.1)
        assert spec.death_zone.contains(inside)
        out = maze_step(spec, (0.54, 0.1), (1.0, 0.0))
        assert out.done and out.info.get("death")
        assert out.reward == spec.death_penalty

    def test_obstacle_blocks_movement(self):
        spec = default_maze()
        s = (0.44, 0.5)  # just left of the wall
        out = maze_step(spec, s, (1.0, 0.0))
        assert tuple(out.next_state) == s

    def test_bounds_clip(self):
        spec = default_maze()
        out = maze_step(spec, (0.01, 0.01), (-1.0, -1.0))
        assert (out.next_state >= 0.0).all()

    def test_shaping_accumulates_distance_reduced(self):
        spec = MazeSpec(
            bounds=Box(0, 0, 1, 1),
            start=(0.1, 0.1),
            goal=(0.9, 0.9),
            goal_radius=0.05,
            max_step=0.05,
        )
        s = np.array(spec.start)
        total_shaping = 0.0
        d0 = math.dist(s, spec.goal)
        for _ in range(10):
            direction = np.array(spec.goal) - s
            a = direction / np.abs(direction).max()
            out = maze_step(spec, tuple(s), a)
            total_shaping += out.reward - spec.step_penalty
            s = out.next_state
        assert total_shaping == pytest.approx(d0 - math.dist(s, spec.goal), abs=1e-12)

    @given(st.integers(0, 2**31 - 1))
    @settings(max_examples=25, deadline=None)
    def test_never_inside_obstacle(self, seed):
        spec = default_maze()
        env = MazeEnv(spec, rng=np.random.default_rng(seed))
        rng = np.random.default_rng(seed + 1)
        s = env.reset()
        for _ in range(120):
            out = env.step(rng.uniform(-1, 1, 2))
            s = out.next_state
            assert not any(ob.contains_interior(s) for ob in spec.obstacles)
            if out.done:
                s = env.reset()

    def test_coverage_counting(self):
        spec = MazeSpec(
            bounds=Box(0, 0, 1, 1),
            start=(0.05, 0.05),
            goal=(0.95, 0.95),
            goal_radius=0.05,
            grid_resolution=10,
        )
        assert coverage(set(), spec) == 0.0
        assert coverage({(0, 0)}, spec) == pytest.approx(0.01)
        every = {(i, j) for i in range(10) for j in range(10)}
        assert coverage(every, spec) == 1.0

    def test_coverage_excludes_obstacle_interior_cells(self):
        spec = default_maze()
        g = spec.grid_resolution
        every = {(i, j) for i in range(g) for j in range(g)}
        # Wall x in [0.45,0.55], y in [0.3,1]: columns 9,10 from row 6 up.
        assert coverage(every, spec) == 1.0
        blocked = {(i, j) for (i, j) in every if i in (9, 10) and j >= 6}
        assert len(blocked) == 28
        assert coverage(every - blocked, spec) == 1.0

    def test_env_coverage_monotone(self):
        env = MazeEnv(rng=np.random.default_rng(3))
        rng = np.random.default_rng(4)
        env.reset()
        prev = env.coverage
        for _ in range(200):
            out = env.step(rng.uniform(-1, 1, 2))
            assert env.coverage >= prev
            prev = env.coverage
            if out.done:
                env.reset()
        assert 0.0 < prev <= 1.0

    def test_episode_cap_truncates(self):
        spec = default_maze()
        env = MazeEnv(spec, rng=np.random.default_rng(5))
        env.reset()
        last = None
        for _ in range(spec.episode_cap):
            last = env.step((0.0, 0.0))
        assert last.done and last.truncated

    def test_cell_index_clamps_boundary(self):
        spec = default_maze()
        assert cell_index(spec, (1.0, 1.0)) == (19, 19)
        assert cell_index(spec, (0.0, 0.0)) == (0, 0)

    def test_invalid_geometry_rejected(self):
        with pytest.raises(ValueError, match="inside obstacle"):
            MazeSpec(
                bounds=Box(0, 0, 1, 1),
                start=(0.5, 0.5),
                goal=(0.9, 0.9),
                goal_radius=0.05,
                obstacles=(Box(0.4, 0.4, 0.6, 0.6),),
            )


class TestPendulum:
    def test_upright_rest_is_fixed_point(self):
        out = pendulum_step(PendulumParams(), (0.0, 0.0), 0.0)
        assert out.reward == 0.0
        assert_allclose(out.next_state, [0.0, 0.0], atol=0)

    def test_reward_nonpositive(self):
        rng = np.random.default_rng(6)
        params = PendulumParams()
        for _ in range(200):
            state = (rng.uniform(-math.pi, math.pi), rng.uniform(-8, 8))
            assert pendulum_step(params, state, rng.uniform(-2, 2)).reward <= 0.0

    def test_hand_integration_from_downward(self):
        p = PendulumParams()
        th, th_dot, u = math.pi, 0.0, 0.0
        # Independent semi-implicit Euler:
        new_dot = th_dot + (3 * p.gravity / (2 * p.length) * math.sin(th)) * p.dt
        new_dot = max(-p.max_speed, min(p.max_speed, new_dot))
        new_th = wrap_angle(th + new_dot * p.dt)
        out = pendulum_step(p, (th, th_dot), u)
        assert out.next_state[0] == pytest.approx(new_th, abs=1e-12)
        assert out.next_state[1] == pytest.approx(new_dot, abs=1e-12)
        assert out.reward == pytest.approx(-math.pi**2, abs=1e-12)

    def test_torque_and_speed_clipped(self):
        p = PendulumParams()
        out_big = pendulum_step(p, (0.5, 0.0), 100.0)
        out_max = pendulum_step(p, (0.5, 0.0), p.max_torque)
        assert_allclose(out_big.next_state, out_max.next_state, atol=0)
        fast = pendulum_step(p, (math.pi / 2, 7.9), 2.0)
        assert abs(fast.next_state[1]) <= p.max_speed

    def test_wrap_angle_range(self):
        assert wrap_angle(math.pi) == pytest.approx(math.pi)
        assert wrap_angle(-math.pi) == pytest.approx(math.pi)
        assert wrap_angle(3 * math.pi / 2) == pytest.approx(-math.pi / 2)
        assert wrap_angle(2 * math.pi) == pytest.approx(0.0)
        for t in np.linspace(-20, 20, 401):
            w = wrap_angle(t)
            assert -math.pi < w <= math.pi
            assert math.cos(w) == pytest.approx(math.cos(t), abs=1e-12)

    def test_env_observation_and_truncation(self):
        env = PendulumEnv(horizon=3, rng=np.random.default_rng(8))
        obs = env.reset()
        assert obs.shape == (3,)
        assert obs[0] ** 2 + obs[1] ** 2 == pytest.approx(1.0)
        outs = [env.step(np.array([0.5])) for _ in range(3)]
        assert not outs[0].done and outs[-1].done and outs[-1].truncated

    def test_deterministic_given_seed(self):
        def run(seed):
            env = PendulumEnv(rng=np.random.default_rng(seed))
            vals = list(env.reset())
            for i in range(30):
                out = env.step(np.array([math.cos(i)]))
                vals.extend(out.next_state)
                vals.append(out.reward)
            return np.array(vals)

        assert (run(11) == run(11)).all()


def test_envstep_flags():
    trunc = EnvStep(np.zeros(1), 0.0, True, {"truncated": True})
    absorb = EnvStep(np.zeros(1), 0.0, True, {})
    assert trunc.truncated and not trunc.absorbing
    assert absorb.absorbing and not absorb.truncated
