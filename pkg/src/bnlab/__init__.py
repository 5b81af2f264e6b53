"""bnlab: a desk-scale laboratory for batch-normalization mode selection
in off-policy actor-critic training.

The package provides a small explicit-backprop network core with
mode-aware batch normalization, analytic control environments with
closed-form oracles, a drifting-policy replay model, a DDPG-style agent
whose five normalization call sites are independently switchable, and an
experiment harness (configs, sweeps, aggregation, plots, verification
suites).
"""

from bnlab.errors import ConfigError, TrainingFault

__version__ = "0.1.0"

__all__ = ["ConfigError", "TrainingFault", "__version__"]
