"""Drifting-policy mixture model and distribution-mismatch metrics.

A replay buffer filled by a slowly changing Gaussian policy is modeled
as a uniform mixture of N isotropic Gaussians with means ``mu_t`` and
per-component variances ``delta2_t``, where consecutive components move
at most ``mean_step_bound`` (in l2) and ``var_step_bound`` (in absolute
variance).  This module computes the mixture's exact moments, checks
the pairwise-drift bound, and Monte-Carlo-verifies the law relating the
variance of a batch mean to the mixture variance.

It also provides the two scalar metrics used to quantify how far the
current policy's action batch sits from the buffer's action
distribution (l2 norms of the differences of per-coordinate means and
biased variances).
"""

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class DriftPolicyParams:
    means: np.ndarray  # (N, d) component means, in time order
    variances: np.ndarray  # (N,) isotropic component variances, > 0
    mean_step_bound: float
    var_step_bound: float
    actions_per_step: int = 1  # transitions contributed per component;
    # uniform over components either way, kept for bookkeeping

    def __post_init__(self):
        means = np.atleast_2d(np.asarray(self.means, dtype=float))
        variances = np.asarray(self.variances, dtype=float)
        object.__setattr__(self, "means", means)
        object.__setattr__(self, "variances", variances)
        if means.shape[0] != variances.shape[0]:
            raise ValueError(
                f"{means.shape[0]} means but {variances.shape[0]} variances"
            )
        if (variances <= 0).any():
            raise ValueError("component variances must be > 0")
        if self.mean_step_bound < 0 or self.var_step_bound < 0:
            raise ValueError("drift bounds must be >= 0")
        mean_steps = np.linalg.norm(np.diff(means, axis=0), axis=1)
        if mean_steps.size and mean_steps.max() > self.mean_step_bound + 1e-12:
            raise ValueError(
                f"mean drift {mean_steps.max():.6g} exceeds bound "
                f"{self.mean_step_bound:.6g}"
            )
        var_steps = np.abs(np.diff(variances))
        if var_steps.size and var_steps.max() > self.var_step_bound + 1e-12:
            raise ValueError(
                f"variance drift {var_steps.max():.6g} exceeds bound "
                f"{self.var_step_bound:.6g}"
            )

    @property
    def n_components(self):
        return self.means.shape[0]

    @property
    def dim(self):
        return self.means.shape[1]


@dataclass(frozen=True)
class MixtureMoments:
    mean: np.ndarray  # (d,)
    variance: float  # total: mean within-variance + mean squared spread
    variance_alt: float  # same quantity via the expanded-square identity


def mixture_moments(params):
    """Exact mixture moments, computed two ways.

    variance     = (1/N) sum delta2_t + (1/N) sum ||mu_t - mu_a||^2
    variance_alt = (1/N) sum delta2_t + (1/N) sum ||mu_t||^2 - ||mu_a||^2

    The two forms are algebraically identical; the op asserts they agree
    to 1e-10 as a live numerical self-check.
    """
    mu_a = params.means.mean(axis=0)
    within = params.variances.mean()
    spread = np.square(params.means - mu_a).sum(axis=1).mean()
    spread_alt = np.square(params.means).sum(axis=1).mean() - np.square(mu_a).sum()
    variance = within + spread
    variance_alt = within + spread_alt
    if abs(variance - variance_alt) > 1e-10 * max(1.0, abs(variance)):
        raise AssertionError(
            f"total-variance identity violated: {variance} vs {variance_alt}"
        )
    return MixtureMoments(mean=mu_a, variance=variance, variance_alt=variance_alt)


def coordinate_variances(params):
    """Per-coordinate mixture variances: mean within-component variance
    (isotropic, so the same in every coordinate) plus the per-coordinate
    spread of the means.

    Relation to the scalar total of :func:`mixture_moments`: summing
    over coordinates counts the within part d times, so
    ``sum(coordinate_variances) = variance + (d - 1) * mean(delta2)``;
    they coincide exactly in one dimension.
    """
    mu_a = params.means.mean(axis=0)
    return params.variances.mean() + np.square(params.means - mu_a).mean(axis=0)


@dataclass(frozen=True)
class PairwiseBoundReport:
    max_mean_gap: float
    max_var_gap: float
    bound: float
    satisfied: bool


def pairwise_bound_check(params):
    """Largest pairwise component gaps against the N*max(bounds) cap."""
    means = params.means
    diffs = means[:, None, :] - means[None, :, :]
    max_mean_gap = float(np.sqrt(np.square(diffs).sum(axis=2)).max())
    variances = params.variances
    max_var_gap = float(np.abs(variances[:, None] - variances[None, :]).max())
    bound = params.n_components * max(params.mean_step_bound, params.var_step_bound)
    satisfied = max_mean_gap <= bound and max_var_gap <= bound
    if not satisfied:
        raise AssertionError(
            f"pairwise drift bound violated: mean gap {max_mean_gap}, "
            f"variance gap {max_var_gap}, bound {bound}"
        )
    return PairwiseBoundReport(max_mean_gap, max_var_gap, bound, satisfied)


def sample_actions(params, n, rng):
    """Draw n i.i.d. samples from the mixture (uniform over components)."""
    idx = rng.integers(0, params.n_components, size=n)
    noise = rng.standard_normal((n, params.dim))
    return params.means[idx] + noise * np.sqrt(params.variances[idx])[:, None]


@dataclass(frozen=True)
class BatchMeanLawReport:
    batch_size: int
    trials: int
    analytic_mean: np.ndarray
    empirical_mean: np.ndarray
    mean_std_errors: np.ndarray  # per-coordinate |diff| / SE
    analytic_var: np.ndarray  # per-coordinate Var of the batch mean
    empirical_var: np.ndarray
    max_var_rel_dev: float

    @property
    def max_mean_sigmas(self):
        return float(self.mean_std_errors.max())


def batch_mean_variance_law(params, batch_size, trials, rng, chunk=10_000):
    """Monte-Carlo check that Var(batch mean) = mixture variance / B.

    Draws ``trials`` independent batches of ``batch_size`` mixture
    samples and compares the per-coordinate variance of the batch means
    with the analytic coordinate variances divided by B, and the grand
    mean with the mixture mean (reported in standard-error units).
    """
    if trials < 2:
        raise ValueError("need at least 2 trials")
    d = params.dim
    means = np.empty((trials, d))
    done = 0
    while done < trials:
        k = min(chunk, trials - done)
        draws = sample_actions(params, k * batch_size, rng)
        means[done : done + k] = draws.reshape(k, batch_size, d).mean(axis=1)
        done += k
    var_coord = coordinate_variances(params)
    analytic_var = var_coord / batch_size
    empirical_var = means.var(axis=0, ddof=1)
    mu_a = params.means.mean(axis=0)
    se = np.sqrt(analytic_var / trials)
    mean_sigmas = np.abs(means.mean(axis=0) - mu_a) / se
    max_var_rel_dev = float(
        (np.abs(empirical_var - analytic_var) / analytic_var).max()
    )
    return BatchMeanLawReport(
        batch_size=batch_size,
        trials=trials,
        analytic_mean=mu_a,
        empirical_mean=means.mean(axis=0),
        mean_std_errors=mean_sigmas,
        analytic_var=analytic_var,
        empirical_var=empirical_var,
        max_var_rel_dev=max_var_rel_dev,
    )


def random_drift(
    rng,
    n_components,
    dim,
    mean_step_bound=0.1,
    var_step_bound=0.05,
    start_scale=1.0,
    var_floor=0.05,
):
    """Random admissible drift sequence (a bounded random walk)."""
    means = np.empty((n_components, dim))
    variances = np.empty(n_components)
    means[0] = rng.uniform(-start_scale, start_scale, dim)
    variances[0] = rng.uniform(var_floor, 1.0 + var_floor)
    for t in range(1, n_components):
        direction = rng.standard_normal(dim)
        norm = np.linalg.norm(direction)
        if norm > 0:
            direction /= norm
        means[t] = means[t - 1] + direction * rng.uniform(0, mean_step_bound)
        dv = rng.uniform(-var_step_bound, var_step_bound)
        variances[t] = max(var_floor, variances[t - 1] + dv)
        # clipping can only shrink the step, never exceed the bound
    return DriftPolicyParams(
        means=means,
        variances=variances,
        mean_step_bound=mean_step_bound,
        var_step_bound=var_step_bound,
    )


def action_dist_diff(policy_actions, buffer_actions):
    """l2 distances between per-coordinate means and biased variances of
    two action batches; the live mismatch metrics logged in training."""
    policy_actions = np.asarray(policy_actions, dtype=float)
    buffer_actions = np.asarray(buffer_actions, dtype=float)
    if policy_actions.ndim != 2 or buffer_actions.ndim != 2:
        raise ValueError("action batches must be 2-d (batch, action_dim)")
    if policy_actions.shape[1] != buffer_actions.shape[1]:
        raise ValueError(
            f"action dims differ: {policy_actions.shape[1]} vs "
            f"{buffer_actions.shape[1]}"
        )
    mean_diff = policy_actions.mean(axis=0) - buffer_actions.mean(axis=0)
    var_diff = policy_actions.var(axis=0) - buffer_actions.var(axis=0)
    return float(np.linalg.norm(mean_diff)), float(np.linalg.norm(var_diff))
