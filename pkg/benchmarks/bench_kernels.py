"""Compare the compiled and plain-numpy kernel lanes.

Runs each hot kernel on workload shapes matching real use (a long
multichannel recording for the filter, a block of analysis windows for the
correlation gradient) and prints per-lane timings. The lane is switched via
SPELLERSEC_NUMBA, which the kernels re-read on every call, so one process
covers both.

Usage: python benchmarks/bench_kernels.py [--repeats N]
"""

import argparse
import os
import time

import numpy as np

from spellersec import dsp, kernels, ssvep
from spellersec._backend import numba_enabled


def _bench(fn, repeats):
    fn()  # warmup, includes jit compilation on the compiled lane
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def _workloads():
    rng = np.random.Generator(np.random.PCG64(0))
    long_rec = rng.standard_normal((64, 60 * 240))
    coeffs = dsp.design_bandpass(1.0, 40.0, 4, 240.0)
    b, a = coeffs.b, coeffs.a

    windows = rng.standard_normal((39, 9, 312))
    delta = 0.1 * rng.standard_normal((9, 312))
    ref = ssvep.reference_signal(10.0, 312, 250.0)
    yn, gy_inv = ssvep.normalized_reference(ref)

    return [
        ("iir_filter 64ch x 14400", lambda: kernels.iir_filter(b, a, long_rec)),
        ("ssvep_trace_grad 39x9x312",
         lambda: kernels.ssvep_trace_grad(windows, delta, yn, gy_inv,
                                          ssvep.DEFAULT_LOADING)),
    ]


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeats", type=int, default=20)
    args = parser.parse_args()

    lanes = [("numpy", "0"), ("numba", "1")]
    results = {}
    for lane, flag in lanes:
        os.environ["SPELLERSEC_NUMBA"] = flag
        if lane == "numba" and not numba_enabled():
            print("numba not importable, skipping compiled lane")
            continue
        for name, fn in _workloads():
            results[(name, lane)] = _bench(fn, args.repeats)

    print(f"{'kernel':<28} {'numpy':>10} {'numba':>10} {'speedup':>8}")
    for name, _ in _workloads():
        base = results[(name, "numpy")]
        fast = results.get((name, "numba"))
        if fast is None:
            print(f"{name:<28} {base * 1e3:>8.2f}ms {'-':>10} {'-':>8}")
        else:
            print(f"{name:<28} {base * 1e3:>8.2f}ms {fast * 1e3:>8.2f}ms "
                  f"{base / fast:>7.1f}x")


if __name__ == "__main__":
    main()
