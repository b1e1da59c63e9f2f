"""Compare the compiled training kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--epochs N] [--repeats R]

Times one MLE model fit and one expected-SARSA fit on a 500-step gridworld
buffer per backend and checks that both produce the same parameters.
"""

import argparse
import time

import numpy as np

from ivelab import _kernels
from ivelab._kernels import _tabular_py
from ivelab.env import GridworldSpec, build_gridworld, exclude_cell, rollout
from ivelab.mdp import uniform_policy
from ivelab.tabular_learn import TrainConfig, fit_model_mle, fit_q_expected_sarsa


def _fits(buffer, policy, config):
    model = fit_model_mle(buffer, (25, 4), config)
    q = fit_q_expected_sarsa(buffer, policy, (25, 4), config, 0.9)
    return model, q


def _time(fn, repeats):
    best = float("inf")
    result = None
    for _ in range(repeats):
        start = time.perf_counter()
        result = fn()
        best = min(best, time.perf_counter() - start)
    return best, result


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--epochs", type=int, default=1000)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args(argv)

    spec = GridworldSpec(wind_prob=0.1)
    policy = uniform_policy(25, 4)
    buffer = exclude_cell(rollout(build_gridworld(spec), spec, policy, 500, rng_seed=0), 0)
    config = TrainConfig(epochs=args.epochs, seed=0)

    timings = {}
    results = {}
    saved = _kernels.mle_steps, _kernels.sarsa_steps
    backends = {"numpy": (_tabular_py.mle_steps, _tabular_py.sarsa_steps)}
    if _kernels.BACKEND == "cython":
        backends = {"cython": saved, **backends}
    try:
        for name, (mle, sarsa) in backends.items():
            _kernels.mle_steps, _kernels.sarsa_steps = mle, sarsa
            timings[name], results[name] = _time(lambda: _fits(buffer, policy, config), args.repeats)
    finally:
        _kernels.mle_steps, _kernels.sarsa_steps = saved

    steps = args.epochs * -(-len(buffer) // config.batch_size)
    print(f"buffer={len(buffer)} epochs={args.epochs} optimizer_steps={steps} per fit")
    for name, seconds in timings.items():
        print(f"{name:>7}: {seconds:8.3f} s  ({2 * steps / seconds:,.0f} steps/s)")
    if len(timings) == 2:
        print(f"speedup: {timings['numpy'] / timings['cython']:.1f}x")
        (m_c, q_c), (m_p, q_p) = results["cython"], results["numpy"]
        diff = max(
            np.abs(m_c.transition_logits - m_p.transition_logits).max(),
            np.abs(m_c.reward - m_p.reward).max(),
            np.abs(q_c - q_p).max(),
        )
        print(f"max parameter difference: {diff:.3e}")
    else:
        print("compiled kernel not built; only the fallback was timed")


if __name__ == "__main__":
    main()
