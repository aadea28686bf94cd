"""Time the python and compiled kernel backends on typical workloads.

Usage: python benchmarks/bench_kernels.py [--repeat N]

Each row reports the median wall time per call for both backends and the
speed-up.  The workloads match the default training shapes: a batch of 32
windows, 30 steps, 2 features and 50 hidden units.
"""

import argparse
import statistics
import time

import numpy as np

from sentistock import _pykernels as py
from sentistock import backend

B, T, F, H = 32, 30, 2, 50


def median_time(fn, repeat):
    fn()
    times = []
    for _ in range(repeat):
        t = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t)
    return statistics.median(times)


def workloads(mod, rng):
    X = rng.normal(size=(B, T, F))
    h0 = rng.normal(0, 0.1, (B, H))
    c0 = rng.normal(0, 0.1, (B, H))
    dH = rng.normal(size=(B, T, H))
    Wg = [rng.normal(0, 0.2, (H, H + F)) for _ in range(3)]
    bg = [rng.normal(0, 0.1, H) for _ in range(3)]
    Wl = [rng.normal(0, 0.2, (H, H + F)) for _ in range(4)]
    bl = [rng.normal(0, 0.1, H) for _ in range(4)]
    w, x = rng.normal(size=1000), rng.normal(size=1000)
    phi, theta = np.array([0.5, 0.2, -0.1, 0.05, 0.02]), np.array([0.3])

    def gru():
        _, cache = mod.gru_sequence_forward(*Wg, *bg, X, h0)
        mod.gru_sequence_backward(*Wg, X, cache, dH)

    def lstm():
        _, cache = mod.lstm_sequence_forward(*Wl, *bl, X, h0, c0)
        mod.lstm_sequence_backward(*Wl, X, cache, dH)

    def css():
        mod.css_residuals(w, phi, theta, 0.1, 5, x, 0.4)

    return {"gru forward+backward": gru, "lstm forward+backward": lstm,
            "css residuals (n=1000)": css}


def main(argv=None):
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=30)
    args = parser.parse_args(argv)
    if "cython" not in backend.available():
        parser.exit(1, "compiled kernels are not built; run pip install -e .\n")
    from sentistock import _ckernels as cy

    py_jobs = workloads(py, np.random.default_rng(0))
    cy_jobs = workloads(cy, np.random.default_rng(0))
    print(f"{'kernel':<26}{'python ms':>12}{'cython ms':>12}{'speed-up':>10}")
    for name in py_jobs:
        tp = median_time(py_jobs[name], args.repeat) * 1e3
        tc = median_time(cy_jobs[name], args.repeat) * 1e3
        print(f"{name:<26}{tp:>12.3f}{tc:>12.3f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
