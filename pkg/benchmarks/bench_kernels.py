#!/usr/bin/env python
"""Benchmark the compiled kernels against the NumPy fallback.

Times the per-replicate reductions on batch shapes representative of the
sweep workloads (small-N unbiasedness checks through full-scale SNR grids)
and prints the per-call medians plus the speedup. Run after an editable
install; the compiled backend is skipped if the extension is missing.
"""

from __future__ import annotations

import time

import numpy as np

from vriwae import _kernels_py

try:
    from vriwae import _kernels_cy
except ImportError:
    _kernels_cy = None

SHAPES = [(4096, 8), (1024, 256), (256, 4096), (64, 32768)]
REPEATS = 7


def _time(fn, *args) -> float:
    best = float("inf")
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best


def main() -> None:
    rng = np.random.default_rng(0)
    backends = [("numpy", _kernels_py)]
    if _kernels_cy is not None:
        backends.append(("cython", _kernels_cy))
    else:
        print("compiled extension not built; benchmarking numpy only")

    header = f"{'kernel':<16}{'batch':<16}" + "".join(
        f"{name:>12}" for name, _ in backends)
    if len(backends) == 2:
        header += f"{'speedup':>10}"
    print(header)
    print("-" * len(header))

    for b, n in SHAPES:
        lw = np.ascontiguousarray(3.0 * rng.normal(size=(b, n)))
        part = np.ascontiguousarray(rng.normal(size=(b, n)))
        xi = np.ascontiguousarray(rng.normal(size=(b, n)))
        cases = [
            ("rep_estimates", lambda impl: impl.rep_estimates(lw, part, 0.5)),
            ("drep_estimates", lambda impl: impl.drep_estimates(lw, part, 0.5)),
            ("bound_estimates", lambda impl: impl.bound_estimates(lw, 0.5)),
            ("softmax_stats", lambda impl: impl.softmax_stats(xi, 10.0, 2.0, 0.5)),
        ]
        for name, call in cases:
            times = [_time(call, impl) for _, impl in backends]
            row = f"{name:<16}{f'{b}x{n}':<16}" + "".join(
                f"{t * 1e3:>10.2f}ms" for t in times)
            if len(times) == 2:
                row += f"{times[0] / times[1]:>9.2f}x"
            print(row)


if __name__ == "__main__":
    main()
