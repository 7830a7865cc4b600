"""Compare the compiled and pure-Python Monte-Carlo event loops.

Both backends consume the same random draws, so besides timing them the
script checks that they return identical counts.

    python benchmarks/bench_kernels.py --duration 0.5 --repeat 3
"""

import argparse
import time

import numpy as np

from thaotdr import kernels
from thaotdr.layouts import two_reflector_layout
from thaotdr.simulator import AcquisitionConfig, SpadModel, simulate_trace


def time_backend(backend, layout, spad, config, repeat):
    best = float("inf")
    trace = None
    for _ in range(repeat):
        start = time.perf_counter()
        trace = simulate_trace(layout, spad, config, 1550.0, backend=backend)
        best = min(best, time.perf_counter() - start)
    return best, trace


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--duration", type=float, default=0.5, help="simulated seconds")
    ap.add_argument("--dark-rate", type=float, default=2e5,
                    help="dark count rate (cps); sets the number of events")
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)

    layout = two_reflector_layout()
    spad = SpadModel(dark_rate_cps=args.dark_rate, dead_time_s=2e-6)
    config = AcquisitionConfig(duration_s=args.duration, seed=args.seed)

    results = {}
    names = ["python"] + (["cython"] if kernels.BACKEND == "cython" else [])
    for name in names:
        results[name] = time_backend(name, layout, spad, config, args.repeat)

    events = int(results["python"][1].counts.sum())
    print(f"{config.n_pulses} pulses, {events} detections")
    for name, (t, _) in results.items():
        print(f"{name:>7}: {t * 1e3:9.2f} ms  ({events / t:,.0f} detections/s)")
    if "cython" in results:
        same = np.array_equal(results["python"][1].counts, results["cython"][1].counts)
        print(f"speed-up: {results['python'][0] / results['cython'][0]:.1f}x; "
              f"identical counts: {same}")
        if not same:
            raise SystemExit(1)
    else:
        print("compiled kernel not available; only the Python backend was timed")


if __name__ == "__main__":
    main()
