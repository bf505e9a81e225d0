"""Compare the compiled kernels with the pure-Python fallback.

Usage: python benchmarks/bench_backends.py [--repeat N]

Each kernel is timed in-process for both backends; the end-to-end rows run
a short channel-benefit grid in a subprocess per backend, since the backend
is chosen at import time.
"""

import argparse
import os
import random
import subprocess
import sys
import timeit

from edgetoll import _purepy
from edgetoll.crypto import CURVE_N

try:
    from edgetoll import _core
except ImportError:
    _core = None

E2E = (
    "import time\n"
    "from edgetoll import _backend, harness\n"
    "t = time.perf_counter()\n"
    "harness.run_channel_benefit(harness.ExperimentConfig(repetitions=5))\n"
    "print(_backend.NATIVE, time.perf_counter() - t)\n"
)


def kernel_cases(impl, rng):
    a, b = rng.randrange(1, CURVE_N), rng.randrange(1, CURVE_N)
    point = _purepy.base_mul(rng.randrange(1, CURVE_N))
    table = impl.PointTable(point)
    data = rng.randbytes(200)
    return {
        "keccak256 (200 B)": lambda: impl.keccak256(data),
        "base_mul": lambda: impl.base_mul(a),
        "point_mul": lambda: impl.point_mul(a, point),
        "mul_add": lambda: impl.mul_add(a, b, point),
        "table mul_add": lambda: table.mul_add(a, b),
    }


def time_us(fn, repeat):
    number = max(1, repeat)
    return min(timeit.repeat(fn, number=number, repeat=3)) / number * 1e6


def end_to_end(pure: bool) -> float:
    env = {**os.environ, "EDGETOLL_PURE_PYTHON": "1" if pure else "0"}
    out = subprocess.run([sys.executable, "-c", E2E], env=env, capture_output=True, text=True, check=True)
    return float(out.stdout.split()[1])


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=200, help="calls per timing sample")
    parser.add_argument("--skip-e2e", action="store_true", help="kernels only")
    args = parser.parse_args()

    if _core is None:
        print("compiled kernels are not built; only the pure-Python backend is available")
    rng = random.Random(0)
    pure = kernel_cases(_purepy, rng)
    native = kernel_cases(_core, random.Random(0)) if _core else {}
    print(f"{'kernel':<20}{'native us':>12}{'python us':>12}{'speedup':>10}")
    for name, fn in pure.items():
        slow = time_us(fn, args.repeat // 10 if "mul" in name else args.repeat)
        fast = time_us(native[name], args.repeat) if native else float("nan")
        print(f"{name:<20}{fast:>12.2f}{slow:>12.2f}{slow / fast:>10.1f}")

    if not args.skip_e2e:
        print("\nchannel-benefit, 5 repetitions")
        pure_s = end_to_end(True)
        native_s = end_to_end(False) if _core else float("nan")
        print(f"{'native':<10}{native_s:>8.2f} s")
        print(f"{'python':<10}{pure_s:>8.2f} s")


if __name__ == "__main__":
    main()
