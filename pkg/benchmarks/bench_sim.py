#!/usr/bin/env python3
"""Throughput benchmark: numba-jitted simulator kernel vs pure-Python fallback.

The package selects the execution mode at import time from the
``EEECOAL_NO_NUMBA`` environment variable, so the comparison spawns a child
interpreter for the fallback measurement.

    python benchmarks/bench_sim.py              # jitted + fallback comparison
    python benchmarks/bench_sim.py --no-fallback
    EEECOAL_NO_NUMBA=1 python benchmarks/bench_sim.py --no-fallback
"""

import argparse
import json
import os
import subprocess
import sys
import time

from eeecoal import EeeParams, FixedSize, Poisson, PolicyConfig, TrafficSpec, run
from eeecoal._accel import NUMBA_ENABLED

WORKLOADS = [
    ("static_timer", PolicyConfig.static_timer(24.0)),
    ("dynamic_timer", PolicyConfig.dynamic_timer(16.0)),
    ("dynamic_size", PolicyConfig.dynamic_size(16.0)),
]


def bench(n_frames: int) -> dict:
    spec = TrafficSpec(arrival=Poisson(5000.0 / 12000.0), sizes=FixedSize(1500))
    params = EeeParams()
    # prime the JIT (or do nothing in fallback mode)
    run(spec, PolicyConfig.static_timer(24.0), params, n_frames=1000, seed=0)
    run(spec, PolicyConfig.dynamic_timer(16.0), params, n_frames=1000, seed=0)
    run(spec, PolicyConfig.dynamic_size(16.0), params, n_frames=1000, seed=0)
    results = {}
    for name, policy in WORKLOADS:
        t0 = time.perf_counter()
        run(spec, policy, params, n_frames=n_frames, seed=1)
        dt = time.perf_counter() - t0
        results[name] = {"seconds": dt, "frames_per_sec": n_frames / dt}
    return results


def main() -> int:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--frames", type=int, default=1_000_000,
                    help="frames per workload in the jitted run")
    ap.add_argument("--fallback-frames", type=int, default=50_000,
                    help="frames per workload in the pure-Python run")
    ap.add_argument("--no-fallback", action="store_true",
                    help="benchmark only the current mode")
    ap.add_argument("--json", action="store_true", help="machine-readable output")
    args = ap.parse_args()

    mode = "numba" if NUMBA_ENABLED else "pure-python"
    n = args.frames if NUMBA_ENABLED else args.fallback_frames
    mine = bench(n)

    other = None
    if not args.no_fallback and NUMBA_ENABLED:
        env = dict(os.environ, EEECOAL_NO_NUMBA="1")
        out = subprocess.run(
            [sys.executable, __file__, "--no-fallback", "--json",
             "--fallback-frames", str(args.fallback_frames)],
            env=env, capture_output=True, text=True, check=True,
        )
        other = json.loads(out.stdout)

    if args.json:
        print(json.dumps({"mode": mode, "frames": n, "results": mine}))
        return 0

    print(f"mode: {mode} ({n} frames per workload)")
    for name, r in mine.items():
        print(f"  {name:14s}  {r['seconds']:8.3f} s   {r['frames_per_sec'] / 1e6:8.2f} Mframes/s")
    if other is not None:
        print(f"mode: {other['mode']} ({other['frames']} frames per workload)")
        for name, r in other["results"].items():
            speedup = mine[name]["frames_per_sec"] / r["frames_per_sec"]
            print(f"  {name:14s}  {r['seconds']:8.3f} s   "
                  f"{r['frames_per_sec'] / 1e6:8.2f} Mframes/s   (jit {speedup:6.0f}x)")
    return 0


if __name__ == "__main__":
    sys.exit(main())
