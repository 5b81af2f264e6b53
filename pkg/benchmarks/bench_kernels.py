"""Head-to-head benchmark of the compiled and pure-numpy kernel backends.

Times the normalization forward/backward kernels and the optimizer steps
at several batch/feature shapes, checking numerical parity first.  With
``--e2e`` it also runs a small end-to-end training job per backend in a
subprocess (backend selection happens at import time, so a fresh
interpreter per backend is the only honest comparison).

Usage:
    python3 benchmarks/bench_kernels.py [--repeats 200] [--e2e]
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from bnlab._kernels import available_backends, reference

SHAPES = [(64, 32), (256, 64), (1024, 256)]


def load_backend(name):
    if name == "numpy":
        return reference
    from bnlab._kernels import _cyops

    return _cyops


def make_case(rng, m, f):
    x = rng.standard_normal((m, f))
    gamma = rng.uniform(0.5, 2.0, f)
    beta = rng.standard_normal(f)
    dy = rng.standard_normal((m, f))
    return x, gamma, beta, dy


def check_parity(backends, rng):
    """All backends must agree to near machine precision before timing."""
    x, gamma, beta, dy = make_case(rng, 64, 16)
    outputs = []
    for mod in backends.values():
        mean, var = mod.bn_batch_stats(x)
        y, xhat, invstd = mod.bn_apply(x, mean, var, gamma, beta, 1e-5)
        dx, dgamma, dbeta = mod.bn_train_backward(dy, xhat, invstd, gamma, x.shape[0])
        ly, lxhat, linvstd = mod.ln_forward(x, gamma, beta, 1e-5)
        ldx, _, _ = mod.ln_backward(dy, lxhat, linvstd, gamma)
        outputs.append((y, dx, dgamma, dbeta, ly, ldx))
    ref = outputs[0]
    for other in outputs[1:]:
        for a, b in zip(ref, other):
            worst = float(np.abs(a - b).max())
            if worst > 1e-12:
                raise SystemExit(f"backend parity violation: {worst:.3e} > 1e-12")
    print(f"parity: all backends agree to 1e-12 ({', '.join(backends)})")


def best_of(fn, repeats):
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def bench_backend(mod, rng, repeats):
    rows = {}
    for m, f in SHAPES:
        x, gamma, beta, dy = make_case(rng, m, f)
        mean, var = mod.bn_batch_stats(x)
        _, xhat, invstd = mod.bn_apply(x, mean, var, gamma, beta, 1e-5)

        def fwd():
            mu, v = mod.bn_batch_stats(x)
            mod.bn_apply(x, mu, v, gamma, beta, 1e-5)

        def bwd():
            mod.bn_train_backward(dy, xhat, invstd, gamma, x.shape[0])

        def ln():
            mod.ln_forward(x, gamma, beta, 1e-5)

        p = rng.standard_normal(m * f)
        g = rng.standard_normal(m * f)
        mbuf, vbuf = np.zeros_like(p), np.zeros_like(p)

        def adam():
            mod.adam_step(p, g, mbuf, vbuf, 1e-3, 0.9, 0.999, 1e-8, 0.1, 0.01)

        rows[(m, f)] = {
            "bn_forward": best_of(fwd, repeats),
            "bn_backward": best_of(bwd, repeats),
            "ln_forward": best_of(ln, repeats),
            "adam_step": best_of(adam, repeats),
        }
    return rows


def run_e2e(backend):
    """Wall-clock a tiny end-to-end training job under one backend."""
    code = (
        "import numpy as np\n"
        "from bnlab.harness import from_mapping, run_single\n"
        "import tempfile\n"
        "m = {'env': {'kind': 'lqr', 'horizon': 50},\n"
        "     'agent': {'hidden': [32, 32]},\n"
        "     'train': {'total_steps': 1500, 'warmup_steps': 100,\n"
        "               'batch_size': 64, 'eval_every': 1500,\n"
        "               'eval_episodes': 1, 'qbias_episodes': 0},\n"
        "     'seeds': [0]}\n"
        "import bnlab._kernels as k\n"
        "print('backend:', k.BACKEND)\n"
        "with tempfile.TemporaryDirectory() as d:\n"
        "    run_single(from_mapping(m), 0, out_dir=d)\n"
    )
    env = dict(os.environ, BNLAB_KERNELS=backend)
    t0 = time.perf_counter()
    subprocess.run([sys.executable, "-c", code], env=env, check=True)
    return time.perf_counter() - t0


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=300)
    parser.add_argument("--e2e", action="store_true",
                        help="also time a small training job per backend")
    args = parser.parse_args(argv)

    names = available_backends()
    backends = {name: load_backend(name) for name in names}
    rng = np.random.default_rng(0)
    check_parity(backends, rng)

    results = {name: bench_backend(mod, rng, args.repeats)
               for name, mod in backends.items()}

    kernels = ["bn_forward", "bn_backward", "ln_forward", "adam_step"]
    for m, f in SHAPES:
        print(f"\nshape {m}x{f} (best of {args.repeats}, microseconds)")
        header = f"  {'kernel':<12}" + "".join(f"{n:>12}" for n in names)
        if len(names) == 2:
            header += f"{'speedup':>10}"
        print(header)
        for kernel in kernels:
            line = f"  {kernel:<12}"
            times = [results[n][(m, f)][kernel] for n in names]
            for t in times:
                line += f"{t * 1e6:>12.2f}"
            if len(times) == 2 and times[0] > 0:
                line += f"{times[1] / times[0]:>9.2f}x"
            print(line)

    if args.e2e:
        print("\nend-to-end (1500 steps, batch 64, hidden 32x32):")
        for name in names:
            wall = run_e2e(name)
            print(f"  {name:<8} {wall:.2f}s")


if __name__ == "__main__":
    main()
