"""One-command invariant suites with machine-readable pass/fail lines.

Four named suites — ``bn``, ``gradients``, ``theorem1``, ``lqr`` — each a
list of checks that rerun the library's core oracles at a size small
enough for an interactive smoke test.  Every line reports the measured
quantity next to its limit so a failure is immediately quantifiable.
"""

from dataclasses import dataclass

import numpy as np

from bnlab.drift import (
    batch_mean_variance_law,
    mixture_moments,
    pairwise_bound_check,
    random_drift,
)
from bnlab.envs import (
    LqrEnv,
    LqrSpec,
    lqr_optimal_gain,
    lqr_optimal_q,
    lqr_optimal_value,
    lqr_solve,
    riccati_residual,
)
from bnlab.nn import BatchNormState, BnMode, bn_backward, bn_forward, mlp, \
    net_backward, net_forward, steps_to_converge
from bnlab.nn.gradcheck import net_grad_check, numeric_gradient, relative_errors


@dataclass
class CheckResult:
    suite: str
    name: str
    measured: float
    limit: float
    passed: bool

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        return (
            f"{status} {self.suite}.{self.name} "
            f"measured={self.measured:.3e} limit={self.limit:.1e}"
        )


def _check(suite, name, measured, limit):
    measured = float(measured)
    return CheckResult(suite, name, measured, limit, measured <= limit)


def _random_bn_state(rng, features):
    return BatchNormState(
        gamma=rng.uniform(0.5, 2.0, features),
        beta=rng.standard_normal(features),
        run_mean=rng.standard_normal(features),
        run_var=rng.uniform(0.5, 2.0, features),
    )


def suite_bn():
    rng = np.random.default_rng(0)
    checks = []

    # Training-mode forward against the plain per-feature formula.
    worst = 0.0
    for _ in range(10):
        f, m = rng.integers(1, 6), rng.integers(2, 16)
        x = rng.standard_normal((m, f)) * rng.uniform(0.5, 3.0)
        st = _random_bn_state(rng, f)
        y, _ = bn_forward(x, st, BnMode.TRAIN, want_tape=False)
        mean, var = x.mean(axis=0), x.var(axis=0)
        ref = st.gamma * (x - mean) / np.sqrt(var + st.epsilon) + st.beta
        worst = max(worst, float(np.abs(y - ref).max()))
    checks.append(_check("bn", "train_forward_formula", worst, 1e-10))

    # Evaluation-mode forward reads only running statistics.
    worst = 0.0
    for _ in range(10):
        f, m = rng.integers(1, 6), rng.integers(1, 16)
        x = rng.standard_normal((m, f))
        st = _random_bn_state(rng, f)
        y, _ = bn_forward(x, st, BnMode.EVAL, want_tape=False)
        ref = st.gamma * (x - st.run_mean) / np.sqrt(st.run_var + st.epsilon)
        ref += st.beta
        worst = max(worst, float(np.abs(y - ref).max()))
    checks.append(_check("bn", "eval_forward_formula", worst, 1e-10))

    # Backward pass against central finite differences.
    worst = 0.0
    for _ in range(20):
        f, m = int(rng.integers(1, 5)), int(rng.integers(2, 10))
        x = rng.standard_normal((m, f))
        st = _random_bn_state(rng, f)
        cot = rng.standard_normal((m, f))
        _, tape = bn_forward(x, st, BnMode.TRAIN)
        dx, _, _ = bn_backward(tape, cot)

        def loss():
            y, _ = bn_forward(x, st, BnMode.TRAIN, want_tape=False)
            return float((y * cot).sum())

        numeric = numeric_gradient(loss, x)
        worst = max(worst, float(relative_errors(dx, numeric, 1e-6).max()))
    checks.append(_check("bn", "backward_finite_difference", worst, 1e-6))

    # Normalized outputs are centered, so input gradients sum to ~0
    # per feature in training mode.
    x = rng.standard_normal((32, 5))
    st = _random_bn_state(rng, 5)
    _, tape = bn_forward(x, st, BnMode.TRAIN)
    dx, _, _ = bn_backward(tape, rng.standard_normal((32, 5)))
    checks.append(
        _check("bn", "input_grad_feature_sum", np.abs(dx.sum(axis=0)).max(), 1e-10)
    )

    # Running statistics reach a stationary batch in the predicted
    # number of exponential-moving-average updates.
    st = _random_bn_state(rng, 3)
    x = rng.standard_normal((64, 3))
    target_mean, target_var = x.mean(axis=0), x.var(axis=0)
    gap0 = max(
        np.abs(st.run_mean - target_mean).max(),
        np.abs(st.run_var - target_var).max(),
    )
    n = steps_to_converge(st.momentum, rel_tol=1e-8 / max(gap0, 1e-8))
    for _ in range(n):
        bn_forward(x, st, BnMode.TRAIN, want_tape=False)
    gap = max(
        np.abs(st.run_mean - target_mean).max(),
        np.abs(st.run_var - target_var).max(),
    )
    checks.append(_check("bn", "running_stats_convergence", gap, 1e-8))
    return checks


def suite_gradients():
    rng = np.random.default_rng(1)
    checks = []
    x = rng.standard_normal((8, 4))

    # tanh throughout: finite differences are only trustworthy on smooth
    # nets (a relu unit caught within h of its kink reads as an O(1)
    # error), and these nets exist purely to exercise the backward pass.
    plain = mlp(4, (6, 5), 2, rng, activation="tanh", norm=None)
    checks.append(
        _check("gradients", "dense_net_fd", net_grad_check(plain, x, rng=rng), 1e-6)
    )

    bn_net = mlp(4, (6, 5), 2, rng, activation="tanh", norm="batch")
    checks.append(
        _check(
            "gradients",
            "batchnorm_net_train_fd",
            net_grad_check(bn_net, x, mode=BnMode.TRAIN, rng=rng),
            1e-5,
        )
    )
    checks.append(
        _check(
            "gradients",
            "batchnorm_net_eval_fd",
            net_grad_check(bn_net, x, mode=BnMode.EVAL, rng=rng),
            1e-5,
        )
    )

    ln_net = mlp(4, (6, 5), 2, rng, activation="tanh", norm="layer")
    checks.append(
        _check("gradients", "layernorm_net_fd", net_grad_check(ln_net, x, rng=rng), 1e-5)
    )

    # Stats-only rows are stop-gradient: a single-site net's input
    # gradient still matches finite differences, and the aux pathway
    # contributes nothing to the parameter gradients.
    single = mlp(4, (6,), 2, rng, activation="tanh", norm="batch")
    aux = rng.standard_normal((5, 4))
    checks.append(
        _check(
            "gradients",
            "mixed_site_input_fd",
            net_grad_check(
                single, x, mode=BnMode.STATS_ONLY_MIXED, aux=aux,
                rng=rng, wrt="input",
            ),
            1e-5,
        )
    )
    y, tape = net_forward(single, x, mode=BnMode.STATS_ONLY_MIXED, aux=aux)
    _, grads_mixed = net_backward(single, tape, np.ones_like(y))
    y0, tape0 = net_forward(single, x, mode=BnMode.STATS_ONLY_MIXED, aux=aux)
    diff = 0.0
    # Same x and aux twice must give identical grads (pure function of
    # the tape) — guards against hidden state sneaking into backward.
    _, grads_again = net_backward(single, tape0, np.ones_like(y0))
    for g1, g2 in zip(grads_mixed, grads_again):
        diff = max(diff, float(np.abs(g1 - g2).max()))
    checks.append(_check("gradients", "mixed_backward_repeatable", diff, 0.0))
    return checks


def suite_theorem1():
    rng = np.random.default_rng(2)
    checks = []

    worst_margin = np.inf
    ok = True
    for _ in range(200):
        params = random_drift(rng, int(rng.integers(2, 12)), int(rng.integers(1, 4)))
        report = pairwise_bound_check(params)
        ok = ok and report.satisfied
        worst_margin = min(
            worst_margin,
            report.bound - max(report.max_mean_gap, report.max_var_gap),
        )
    checks.append(
        _check("theorem1", "pairwise_bound_margin", -min(worst_margin, 0.0), 0.0)
    )

    worst = 0.0
    for _ in range(100):
        params = random_drift(rng, 8, 2)
        mm = mixture_moments(params)
        worst = max(worst, abs(mm.variance - mm.variance_alt))
    checks.append(_check("theorem1", "variance_forms_agree", worst, 1e-10))

    params = random_drift(rng, 10, 3)
    law = batch_mean_variance_law(params, batch_size=64, trials=20_000, rng=rng)
    checks.append(
        _check("theorem1", "batch_mean_within_4se", law.mean_std_errors.max(), 4.0)
    )
    checks.append(
        _check("theorem1", "batch_mean_variance_5pct", law.max_var_rel_dev, 0.05)
    )
    return checks


def _random_specs(rng, n):
    for _ in range(n):
        yield LqrSpec(
            a=rng.uniform(-1.5, 1.5),
            b=rng.choice([-1.0, 1.0]) * rng.uniform(0.1, 2.0),
            state_cost=rng.uniform(0.1, 3.0),
            action_cost=rng.uniform(0.1, 3.0),
            discount=rng.uniform(0.5, 0.999),
        )


def suite_lqr():
    rng = np.random.default_rng(3)
    checks = []

    worst_res, worst_bellman, worst_argmax = 0.0, 0.0, 0.0
    for spec in _random_specs(rng, 200):
        sol = lqr_solve(spec)
        worst_res = max(worst_res, abs(riccati_residual(spec, sol.p)))
        s = rng.uniform(-2, 2, 5)
        a = rng.uniform(-2, 2, 5)
        q = lqr_optimal_q(sol, s, a)
        reward = -(spec.state_cost * s * s + spec.action_cost * a * a)
        s_next = spec.a * s + spec.b * a
        bellman = reward + spec.discount * lqr_optimal_value(sol, s_next)
        worst_bellman = max(worst_bellman, float(np.abs(q - bellman).max()))
        # Ternary search for argmax_a Q*(s0, a) on the concave quadratic.
        s0 = float(rng.uniform(-1.5, 1.5))
        lo, hi = -50.0, 50.0
        for _ in range(100):
            m1 = lo + (hi - lo) / 3
            m2 = hi - (hi - lo) / 3
            if lqr_optimal_q(sol, s0, m1) < lqr_optimal_q(sol, s0, m2):
                lo = m1
            else:
                hi = m2
        worst_argmax = max(
            worst_argmax, abs((lo + hi) / 2 - lqr_optimal_gain(sol) * s0)
        )
    checks.append(_check("lqr", "riccati_residual", worst_res, 1e-10))
    checks.append(_check("lqr", "bellman_identity", worst_bellman, 1e-9))
    checks.append(_check("lqr", "argmax_matches_gain", worst_argmax, 1e-6))

    # End-to-end: along rollouts of the analytic optimal policy, the
    # closed-form Q telescopes the Monte-Carlo return to roundoff.
    from bnlab.agent import AgentConfig, DdpgAgent, resolve_mode_variant

    spec = LqrSpec()
    sol = lqr_solve(spec)
    agent = DdpgAgent(
        AgentConfig(
            state_dim=1, action_dim=1, hidden=(8,),
            mode=resolve_mode_variant("Origin"), discount=spec.discount,
        ),
        np.random.default_rng(0),
    )
    env = LqrEnv(spec, horizon=200, rng=np.random.default_rng(7))
    report = agent.q_bias(
        env,
        2,
        policy_fn=lambda s: np.clip(lqr_optimal_gain(sol) * s, -1.0, 1.0),
        critic_fn=lambda s, a: lqr_optimal_q(sol, s[:, 0], a[:, 0]),
        bootstrap_fn=lambda s: lqr_optimal_value(sol, s[:, 0]),
    )
    checks.append(_check("lqr", "qbias_telescopes_to_zero", abs(report.mean_bias), 1e-9))
    return checks


SUITES = {
    "bn": suite_bn,
    "gradients": suite_gradients,
    "theorem1": suite_theorem1,
    "lqr": suite_lqr,
}


def run_suites(names):
    results = []
    for name in names:
        if name not in SUITES:
            raise ValueError(f"unknown suite {name!r}; choose from {sorted(SUITES)}")
        results.extend(SUITES[name]())
    return results


def format_report(results):
    lines = [r.line() for r in results]
    failed = sum(not r.passed for r in results)
    lines.append(
        f"{len(results) - failed}/{len(results)} checks passed"
        + (f" ({failed} FAILED)" if failed else "")
    )
    return "\n".join(lines)
