"""Timing comparison of the compiled and numpy step kernels.

Usage: python benchmarks/bench_step.py [repeats]

Shapes cover the shipped models: scalar double well, 2-d flocking, 3-d
neuron model, and a small ensemble with the cross-particle term enabled.
"""

import sys
import time

import numpy as np

from mvmilstein import _kernels

SHAPES = [
    # (label, N, d, m, with_cross)
    ("double_well N=100", 100, 1, 1, False),
    ("double_well N=1000", 1000, 1, 1, False),
    ("cucker_smale N=1000", 1000, 2, 1, False),
    ("fitzhugh_nagumo N=1000", 1000, 3, 3, False),
    ("double_well N=64 +cross", 64, 1, 1, True),
    ("fitzhugh_nagumo N=64 +cross", 64, 3, 3, True),
]


def make_inputs(N, d, m, with_cross, seed=0):
    rng = np.random.default_rng(seed)
    c = np.ascontiguousarray
    return dict(
        states=c(rng.normal(size=(N, d))),
        F=c(rng.normal(scale=5.0, size=(N, d))),
        G=c(rng.normal(size=(N, m, d))),
        LY=c(rng.normal(size=(N, m, m, d))),
        LR=c(rng.normal(size=(N, N, m, m, d))) if with_cross else None,
        dW=c(rng.normal(scale=0.1, size=(N, m))),
        own_I=c(rng.normal(scale=0.01, size=(N, m, m))),
        cross_I=(c(rng.normal(scale=0.01, size=(N * m, N * m)))
                 if with_cross else None),
    )


def bench(fn, inp, with_cross, repeats):
    kinds = (1, 2, 3, 1)
    h = 2.0 ** -6
    args = (inp["states"], inp["F"], inp["G"], inp["LY"], inp["LR"],
            inp["dW"], inp["own_I"], inp["cross_I"], h, kinds, True,
            with_cross)
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeats):
        fn(*args)
    return (time.perf_counter() - t0) / repeats


def main():
    repeats = int(sys.argv[1]) if len(sys.argv) > 1 else 200
    if _kernels.compiled_step is None:
        print("compiled kernel not available; timing the numpy path only")
    print(f"{'shape':<30}{'numpy':>12}{'compiled':>12}{'speedup':>10}")
    for label, N, d, m, with_cross in SHAPES:
        inp = make_inputs(N, d, m, with_cross)
        t_np = bench(_kernels.fallback_step, inp, with_cross, repeats)
        if _kernels.compiled_step is not None:
            t_c = bench(_kernels.compiled_step, inp, with_cross, repeats)
            print(f"{label:<30}{t_np * 1e6:>10.1f}us"
                  f"{t_c * 1e6:>10.1f}us{t_np / t_c:>9.1f}x")
        else:
            print(f"{label:<30}{t_np * 1e6:>10.1f}us{'-':>12}{'-':>10}")


if __name__ == "__main__":
    main()
