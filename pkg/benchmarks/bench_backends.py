"""Compare the compiled kernels against the pure-Python fallback.

Times the two hot kernels (RK4 transition-matrix propagation and the
active-set gain QP) head to head, then a full closed-loop scenario under
each backend by rebinding the kernel module used by the simulation stack.

Usage: python benchmarks/bench_backends.py [--trials N]
"""

import argparse
import time

import numpy as np

import htlip._kernels as pure

try:
    import htlip._speedups as fast
except ImportError:
    fast = None

import htlip.controller
import htlip.dynamics
import htlip.simulate
from htlip import ModelParams, Scenario, make_profile, make_reference, run_scenario


def time_fn(fn, repeat):
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn()
    return (time.perf_counter() - t0) / repeat


def bench_kernels(backend, name, repeat=2000):
    rng = np.random.default_rng(0)
    f = np.ascontiguousarray(rng.uniform(20.0, 60.0, size=601))
    t_stm = time_fn(lambda: backend.rk4_stm(f, 1e-3, 300), repeat)

    s = 825.0
    c1, c2 = -825.0, -140.0
    E = np.ascontiguousarray(rng.normal(scale=5.0, size=12))
    d = np.ascontiguousarray(rng.uniform(0.5, 3.0, size=6))
    t_qp = time_fn(lambda: backend.qp_solve(s, c1, c2, E, d), repeat)
    print(f"  {name:<12} rk4_stm(300 steps): {t_stm * 1e6:8.1f} us   "
          f"qp_solve: {t_qp * 1e6:7.2f} us")
    return t_stm, t_qp


def bench_scenario(backend, name):
    for mod in (htlip.dynamics, htlip.simulate, htlip.controller):
        mod.kernels = backend
    profile = make_profile("hc1")
    params = ModelParams()
    ref = make_reference(0.0, params.dtau, profile, params)
    scn = Scenario(profile=profile, params=params, reference=ref,
                   duration=12.0, e0=(0.03, 0.1), seed=1, collect_samples=False)
    t0 = time.perf_counter()
    result = run_scenario(scn)
    elapsed = time.perf_counter() - t0
    assert not result.diverged
    print(f"  {name:<12} 12 s closed-loop run (per-tick QP): {elapsed * 1e3:7.1f} ms")
    return elapsed


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--trials", type=int, default=2000)
    args = parser.parse_args()

    print("kernel microbenchmarks:")
    tp = bench_kernels(pure, "pure-python", args.trials)
    if fast is not None:
        tf = bench_kernels(fast, "compiled", args.trials)
        print(f"  speedup: rk4_stm {tp[0] / tf[0]:.1f}x, qp_solve {tp[1] / tf[1]:.1f}x")
    else:
        print("  compiled extension not available")

    print("closed-loop scenario:")
    sp = bench_scenario(pure, "pure-python")
    if fast is not None:
        sf = bench_scenario(fast, "compiled")
        print(f"  speedup: {sp / sf:.1f}x")
        bench_scenario(fast, "compiled")  # leave the fast backend bound


if __name__ == "__main__":
    main()
