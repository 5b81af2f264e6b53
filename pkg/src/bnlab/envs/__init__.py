"""Verification environments with analytic or brute-force oracles."""

from bnlab.envs.base import EnvStep
from bnlab.envs.lqr import (
    LqrEnv,
    LqrSolution,
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
    coverage,
    default_maze,
    maze_reset,
    maze_step,
)
from bnlab.envs.pendulum import PendulumEnv, PendulumParams, pendulum_step, wrap_angle

__all__ = [
    "Box",
    "EnvStep",
    "LqrEnv",
    "LqrSolution",
    "LqrSpec",
    "MazeEnv",
    "MazeSpec",
    "PendulumEnv",
    "PendulumParams",
    "coverage",
    "default_maze",
    "lqr_optimal_gain",
    "lqr_optimal_q",
    "lqr_optimal_value",
    "lqr_solve",
    "lqr_step",
    "maze_reset",
    "maze_step",
    "pendulum_step",
    "riccati_residual",
    "wrap_angle",
]
