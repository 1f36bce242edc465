"""Pinned busy-spin CPU load at normal scheduling class."""

from __future__ import annotations

import multiprocessing as mp
import os
import time
from dataclasses import dataclass, field

from ..errors import AffinityError


def read_cpu_times() -> dict[int, tuple[int, int]]:
    """Per-core ``(user_ticks, total_ticks)`` from /proc/stat; user includes nice."""
    out = {}
    with open("/proc/stat") as fh:
        for line in fh:
            if not line.startswith("cpu") or line.startswith("cpu "):
                continue
            parts = line.split()
            vals = [int(x) for x in parts[1:]]
            # guest time is already contained in user
            total = sum(vals[:8])
            out[int(parts[0][3:])] = (vals[0] + vals[1], total)
    return out


def utilization(before: dict, after: dict) -> dict[int, float]:
    res = {}
    for core, (u1, t1) in after.items():
        u0, t0 = before.get(core, (0, 0))
        dt = t1 - t0
        res[core] = (u1 - u0) / dt if dt > 0 else 0.0
    return res


def _spin(core: int, stop) -> None:
    os.sched_setaffinity(0, {core})
    x = 0
    while not stop.is_set():
        for _ in range(100_000):
            x += 1


@dataclass
class LoadReport:
    workers: int
    pinning: list[int]
    duration_s: float
    per_core_user: dict[int, float] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {"workers": self.workers, "pinning": self.pinning, "duration_s": self.duration_s,
                "per_core_user": {str(k): v for k, v in self.per_core_user.items()}}


class StressWorkers:
    """Start/stop handle for ``workers`` spinning processes, round-robin over ``pinning``."""

    def __init__(self, workers: int, pinning):
        self.workers = int(workers)
        self.pinning = [int(c) for c in pinning]
        if self.workers < 0:
            raise ValueError("workers must be >= 0")
        if self.workers and not self.pinning:
            raise AffinityError("workers need at least one core to pin to")
        n = os.cpu_count() or 1
        for c in self.pinning:
            if c < 0 or c >= n:
                raise AffinityError(f"core index {c} not present (host has {n} cores)")
        self._ctx = mp.get_context("fork")
        self._stop = self._ctx.Event()
        self._procs: list = []
        self._t0 = 0.0
        self._cpu0: dict = {}

    def start(self) -> StressWorkers:
        self._stop.clear()
        self._cpu0 = read_cpu_times()
        self._t0 = time.monotonic()
        for i in range(self.workers):
            p = self._ctx.Process(target=_spin, args=(self.pinning[i % len(self.pinning)], self._stop), daemon=True)
            p.start()
            self._procs.append(p)
        return self

    def stop(self) -> LoadReport:
        self._stop.set()
        for p in self._procs:
            p.join(5)
            if p.is_alive():
                p.kill()
                p.join()
        self._procs = []
        util = utilization(self._cpu0, read_cpu_times())
        return LoadReport(self.workers, self.pinning, time.monotonic() - self._t0, util)

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()


def cpu_stress(workers: int, pinning, duration_s: float) -> LoadReport:
    """Load the given cores for ``duration_s`` and report per-core user utilization."""
    sw = StressWorkers(workers, pinning)
    if sw.workers == 0:
        return LoadReport(0, sw.pinning, 0.0, {})
    sw.start()
    # sample only the steady state, after the workers are up
    time.sleep(min(0.2, duration_s / 10))
    before = read_cpu_times()
    time.sleep(max(0.0, duration_s - (time.monotonic() - sw._t0)))
    after = read_cpu_times()
    rep = sw.stop()
    rep.per_core_user = utilization(before, after)
    return rep
