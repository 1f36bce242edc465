"""Report what real-time features the host grants this process."""

from __future__ import annotations

import multiprocessing as mp
import os
import platform
import resource

from ..model import SchedulerPolicy
from . import loop, sched


def _probe_child(conn, policy_dict):
    try:
        applied = sched.set_policy_and_affinity(SchedulerPolicy.from_dict(policy_dict), [0])
        conn.send((True, applied.to_dict()))
    except Exception as e:
        conn.send((False, f"{type(e).__name__}: {e}"))


def probe_policy(policy: SchedulerPolicy) -> tuple[bool, object]:
    """Try ``policy`` in a throwaway child; returns (granted, read-back or reason)."""
    ctx = mp.get_context("fork")
    parent, child = ctx.Pipe(duplex=False)
    p = ctx.Process(target=_probe_child, args=(child, policy.to_dict()))
    p.start()
    child.close()
    ok = parent.poll(10)
    res = parent.recv() if ok else (False, "probe timed out")
    p.join(5)
    return res


def kernel_flavor() -> str:
    version = platform.version()
    try:
        with open("/sys/kernel/realtime") as fh:
            if fh.read().strip() == "1":
                return "preempt_rt"
    except OSError:
        pass
    if "PREEMPT_RT" in version:
        return "preempt_rt"
    if "PREEMPT_DYNAMIC" in version:
        return "preempt_dynamic"
    if "PREEMPT" in version:
        return "preempt"
    return "voluntary/none"


def host_capabilities() -> dict:
    soft, hard = resource.getrlimit(resource.RLIMIT_RTPRIO)
    policies = {}
    for name, pol in (("fifo", SchedulerPolicy.fifo(99)), ("rr", SchedulerPolicy.round_robin(99)),
                      ("deadline", SchedulerPolicy.deadline())):
        ok, info = probe_policy(pol)
        policies[name] = {"granted": ok, "detail": info}
    try:
        with open("/proc/sys/kernel/sched_rt_runtime_us") as fh:
            rt_runtime = int(fh.read())
    except OSError:
        rt_runtime = None
    return {
        "kernel": platform.release(),
        "kernel_flavor": kernel_flavor(),
        "machine": platform.machine(),
        "cores": os.cpu_count(),
        "allowed_cores": sorted(os.sched_getaffinity(0)),
        "euid": os.geteuid(),
        "rlimit_rtprio": [soft, hard],
        "sched_rt_runtime_us": rt_runtime,
        "policies": policies,
        "compiled_cycle_loop": loop._cycleloop is not None,
    }
