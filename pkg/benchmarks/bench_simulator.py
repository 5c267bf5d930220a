"""Nanoseconds per uniformized event for the compiled and pure-Python cores.

Both backends run the same flat configuration from the same seed and must end in
the same state, so the timing compares identical work.

    python3 benchmarks/bench_simulator.py [--particles 2000] [--events 200000]
"""
import argparse
import time

import numpy as np

from pushasep.simulator import _pycore
from pushasep.simulator.engine import _flat_positions, core


def run(mod, x0, events, seed, repeats):
    best = float("inf")
    for _ in range(repeats):
        x = x0.copy()
        g = np.random.PCG64(seed)
        t0 = time.perf_counter()
        mod.advance_uniform(x, 0, 0.5, events, g)
        best = min(best, time.perf_counter() - t0)
    return best, x, int(g.random_raw())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--particles", type=int, default=2000)
    ap.add_argument("--events", type=int, default=200_000)
    ap.add_argument("--seed", type=int, default=1)
    ap.add_argument("--repeats", type=int, default=3)
    args = ap.parse_args()
    x0 = _flat_positions(args.particles, 1)
    if core.BACKEND != "cython":
        raise SystemExit("compiled core not built; run pip install -e . --no-build-isolation")
    fast, xf, rf = run(core, x0, args.events, args.seed, args.repeats)
    slow, xs, rs = run(_pycore, x0, args.events, args.seed, 1)
    assert np.array_equal(xf, xs) and rf == rs, "backends diverged"
    print(f"events per run: {args.events}, particles: {len(x0)}")
    print(f"cython: {1e9 * fast / args.events:8.1f} ns/event")
    print(f"python: {1e9 * slow / args.events:8.1f} ns/event")
    print(f"speedup: {slow / fast:.1f}x")


if __name__ == "__main__":
    main()
