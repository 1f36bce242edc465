"""Time the compiled and pure-Python simulator kernels on the same phases.

    python benchmarks/bench_kernels.py [--phase-s 2] [--repeat 3]

Both kernels must produce identical cycle series; the script checks that
before reporting the speedup.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from rtflood.model import Phase, canonical_config
from rtflood.sim import SimParams, build_cores, get_kernel

CASES = [("SF", "syn_flood", False), ("SD", "arp_flood", False), ("DD", "none", True),
         ("DF", "syn_scan", False), ("C", "syn_flood", True)]


def time_kernel(kernel, inputs, repeat: int) -> tuple[float, list]:
    best = float("inf")
    out = None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = [kernel(inp) for _, inp in inputs]
        best = min(best, time.perf_counter() - t0)
    return best, out


def _same(a, b) -> bool:
    # run_core returns (starts, end, bins, processed, dropped)
    return all(np.array_equal(np.asarray(x), np.asarray(y)) for x, y in zip(a, b))


def main(argv=None) -> int:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--phase-s", type=float, default=2.0, help="simulated seconds per case")
    ap.add_argument("--repeat", type=int, default=3)
    args = ap.parse_args(argv)
    try:
        fast = get_kernel("c")
    except ImportError:
        print("compiled kernel not built; run `pip install -e . --no-build-isolation` first")
        return 1
    slow = get_kernel("py")
    params = SimParams()
    print(f"{'case':24s} {'c [s]':>9s} {'py [s]':>9s} {'speedup':>8s}")
    tc_all = tp_all = 0.0
    for code, atk, stress in CASES:
        cfg = canonical_config(code, atk, stress, args.phase_s)
        phase = Phase.ATTACK if atk != "none" else Phase.IDLE_PRE
        inputs, _ = build_cores(cfg, params, phase)
        tc, rc = time_kernel(fast, inputs, args.repeat)
        # the Python kernel is slow enough that one pass is representative
        tp, rp = time_kernel(slow, inputs, 1)
        if not all(_same(a, b) for a, b in zip(rc, rp)):
            print(f"{cfg.id}: kernels disagree")
            return 2
        tc_all += tc
        tp_all += tp
        print(f"{cfg.id:24s} {tc:9.4f} {tp:9.3f} {tp / tc:7.1f}x")
    print(f"{'total':24s} {tc_all:9.4f} {tp_all:9.3f} {tp_all / tc_all:7.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
