"""Compare the compiled kernel backend against the numpy fallback.

Runs each hot kernel on realistic trace sizes, reports per-call timings and
the speedup, and cross-checks that both backends agree on every output.

    python3 benchmarks/bench_kernels.py [--frames N] [--repeats R]
"""

import argparse
import time

import numpy as np

from zadkit import _kernels_py

try:
    from zadkit import _kernels
except ImportError:
    _kernels = None


def bench(fn, args, repeats):
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        fn(*args)
        best = min(best, time.perf_counter() - start)
    return best


def random_segments(rng, num_frames, count):
    begins = rng.integers(0, num_frames - 2, size=count)
    lengths = rng.integers(1, max(2, num_frames // 10), size=count)
    ends = np.minimum(begins + lengths, num_frames - 1)
    return begins.astype(np.int64), ends.astype(np.int64)


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--frames", type=int, default=200_000,
                        help="trace length (default 200k)")
    parser.add_argument("--window", type=int, default=60)
    parser.add_argument("--segments", type=int, default=2_000)
    parser.add_argument("--repeats", type=int, default=7)
    args = parser.parse_args()

    if _kernels is None:
        print("compiled extension not available; nothing to compare")
        return 1

    rng = np.random.default_rng(0)
    trace = rng.uniform(size=args.frames)
    norm = _kernels_py.minmax_normalize(
        _kernels_py.moving_average(trace, args.window))
    pre = _kernels_py.prefix_sum(norm)
    starts, ends = random_segments(rng, args.frames, args.segments)

    cases = [
        ("prefix_sum", (trace,)),
        ("moving_average", (trace, args.window)),
        ("minmax_normalize", (trace,)),
        ("runs_above", (norm, 0.5)),
        ("batch_segment_scores",
         (norm, pre, starts, ends, 1.0, 0.2, 1.0)),
    ]

    print(f"trace: {args.frames} frames, window {args.window}, "
          f"{args.segments} segments, best of {args.repeats}")
    header = f"{'kernel':<22}{'numpy':>12}{'compiled':>12}{'speedup':>10}"
    print(header)
    print("-" * len(header))
    for name, case_args in cases:
        py_fn = getattr(_kernels_py, name)
        cy_fn = getattr(_kernels, name)
        py_out = py_fn(*case_args)
        cy_out = cy_fn(*case_args)
        if isinstance(py_out, tuple):
            for a, b in zip(py_out, cy_out):
                np.testing.assert_allclose(np.asarray(a, dtype=np.float64),
                                           np.asarray(b, dtype=np.float64),
                                           rtol=1e-12, atol=0)
        else:
            np.testing.assert_allclose(np.asarray(py_out),
                                       np.asarray(cy_out), rtol=1e-12,
                                       atol=0)
        t_py = bench(py_fn, case_args, args.repeats)
        t_cy = bench(cy_fn, case_args, args.repeats)
        print(f"{name:<22}{t_py * 1e3:>10.3f}ms{t_cy * 1e3:>10.3f}ms"
              f"{t_py / t_cy:>9.1f}x")
    print("outputs agree across backends (rtol 1e-12)")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
