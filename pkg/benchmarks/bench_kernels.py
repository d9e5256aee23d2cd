"""Time the compiled kernels against the pure-Python fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]
"""

import argparse
import timeit

import numpy as np

from radiosv import _backend
from radiosv.dsp import design_butterworth_lowpass


def bench_sosfilt(impl, repeat):
    coefs = design_butterworth_lowpass(12, 2700, 64000).coefficients
    x = np.random.default_rng(0).normal(size=64000)  # one second at the NBFM quadrature rate
    return min(timeit.repeat(lambda: impl.sosfilt(coefs, x), number=1, repeat=repeat))


def bench_jacobi(impl, repeat):
    x = np.random.default_rng(0).normal(size=(198, 80))  # two seconds of 80-band features

    def run():
        impl.jacobi_sweeps(np.ascontiguousarray(x.T).copy(), 1e-12, 60)

    return min(timeit.repeat(run, number=1, repeat=repeat))


def main():
    parser = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    parser.add_argument("--repeat", type=int, default=3)
    args = parser.parse_args()

    backends = _backend.available_backends()
    if "compiled" not in backends:
        print("compiled kernels not built; only the fallback is timed")
    print(f"{'kernel':<28}{'backend':<10}{'seconds':>10}{'speedup':>10}")
    for label, fn in (("sosfilt 12th order, 64k", bench_sosfilt), ("jacobi svd 198x80", bench_jacobi)):
        times = {name: fn(impl, args.repeat) for name, impl in sorted(backends.items())}
        for name, t in times.items():
            speedup = times["python"] / t
            print(f"{label:<28}{name:<10}{t:>10.4f}{speedup:>9.1f}x")


if __name__ == "__main__":
    main()
