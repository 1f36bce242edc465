"""Scheduling policy and CPU affinity for the calling thread, with read-back.

SCHED_DEADLINE has no wrapper in the ``os`` module, so it goes through the
raw ``sched_setattr``/``sched_getattr`` syscalls via ctypes.
"""

from __future__ import annotations

import ctypes
import errno
import os
import platform
from dataclasses import dataclass

from ..errors import AdmissionError, AffinityError, ConfigError, PrivilegeError
from ..model import Policy, SchedulerPolicy

SCHED_DEADLINE = 6

# (sched_setattr, sched_getattr) per architecture
_SYSCALLS = {
    "x86_64": (314, 315),
    "aarch64": (274, 275),
    "armv7l": (380, 381),
    "armv6l": (380, 381),
    "i686": (351, 352),
}


class SchedAttr(ctypes.Structure):
    _fields_ = [
        ("size", ctypes.c_uint32),
        ("sched_policy", ctypes.c_uint32),
        ("sched_flags", ctypes.c_uint64),
        ("sched_nice", ctypes.c_int32),
        ("sched_priority", ctypes.c_uint32),
        ("sched_runtime", ctypes.c_uint64),
        ("sched_deadline", ctypes.c_uint64),
        ("sched_period", ctypes.c_uint64),
    ]


_libc = None


def _syscall():
    global _libc
    if _libc is None:
        _libc = ctypes.CDLL(None, use_errno=True)
    return _libc.syscall


def _nr():
    nrs = _SYSCALLS.get(platform.machine())
    if nrs is None:
        raise AdmissionError(f"SCHED_DEADLINE syscalls unknown on {platform.machine()}")
    return nrs


def sched_setattr(attr: SchedAttr, pid: int = 0) -> None:
    if _syscall()(_nr()[0], pid, ctypes.byref(attr), 0) != 0:
        err = ctypes.get_errno()
        raise OSError(err, os.strerror(err))


def sched_getattr(pid: int = 0) -> SchedAttr:
    attr = SchedAttr()
    if _syscall()(_nr()[1], pid, ctypes.byref(attr), ctypes.sizeof(SchedAttr), 0) != 0:
        err = ctypes.get_errno()
        raise OSError(err, os.strerror(err))
    return attr


@dataclass(frozen=True)
class AppliedSettings:
    policy: Policy | None
    priority: int
    runtime_ns: int
    deadline_ns: int
    period_ns: int
    cores: tuple[int, ...]

    def to_dict(self) -> dict:
        return {"policy": self.policy.value if self.policy else "other", "priority": self.priority, "runtime_ns": self.runtime_ns,
                "deadline_ns": self.deadline_ns, "period_ns": self.period_ns, "cores": list(self.cores)}


def read_back(pid: int = 0) -> AppliedSettings:
    cores = tuple(sorted(os.sched_getaffinity(pid)))
    pol = os.sched_getscheduler(pid)
    if pol == SCHED_DEADLINE:
        a = sched_getattr(pid)
        return AppliedSettings(Policy.DEADLINE, 0, a.sched_runtime, a.sched_deadline, a.sched_period, cores)
    prio = os.sched_getparam(pid).sched_priority
    # None for non-real-time classes, so a comparison with a request fails
    kind = {os.SCHED_FIFO: Policy.FIFO, os.SCHED_RR: Policy.ROUND_ROBIN}.get(pol)
    return AppliedSettings(kind, prio, 0, 0, 0, cores)


def _check_cores(cores) -> tuple[int, ...]:
    cores = tuple(sorted(set(int(c) for c in cores)))
    if not cores:
        raise AffinityError("empty core list")
    n = os.cpu_count() or 1
    bad = [c for c in cores if c < 0 or c >= n]
    if bad:
        raise AffinityError(f"core index {bad[0]} not present (host has {n} cores)")
    return cores


def _expected(policy: SchedulerPolicy, cores) -> AppliedSettings:
    if policy.policy is Policy.DEADLINE:
        return AppliedSettings(Policy.DEADLINE, 0, policy.runtime_ns, policy.deadline_ns, policy.period_ns, cores)
    return AppliedSettings(policy.policy, policy.priority, 0, 0, 0, cores)


def set_policy_and_affinity(policy: SchedulerPolicy, cores) -> AppliedSettings:
    """Apply ``policy`` and pin to ``cores`` for the calling thread.

    Returns the settings read back from the OS; any mismatch with the request
    raises instead of running degraded.
    """
    if policy.policy is not Policy.DEADLINE and not 1 <= (policy.priority or 0) <= 99:
        raise ConfigError(f"priority {policy.priority} out of range 1-99")
    cores = _check_cores(cores)
    # affinity first: the kernel refuses to narrow the mask of a deadline task
    try:
        os.sched_setaffinity(0, cores)
    except PermissionError as e:
        raise PrivilegeError(f"cannot set affinity: {e}") from e
    except OSError as e:
        raise AffinityError(f"cannot pin to cores {list(cores)}: {e}") from e
    try:
        if policy.policy is Policy.DEADLINE:
            attr = SchedAttr(ctypes.sizeof(SchedAttr), SCHED_DEADLINE, 0, 0, 0,
                             policy.runtime_ns, policy.deadline_ns, policy.period_ns)
            sched_setattr(attr)
        else:
            native = os.SCHED_FIFO if policy.policy is Policy.FIFO else os.SCHED_RR
            os.sched_setscheduler(0, native, os.sched_param(policy.priority))
    except OSError as e:
        if e.errno == errno.EPERM:
            raise PrivilegeError(f"not permitted to set {policy.policy.value}: {e.strerror}") from e
        if policy.policy is Policy.DEADLINE and e.errno in (errno.EBUSY, errno.EINVAL, errno.ENOSYS):
            raise AdmissionError(f"deadline reservation rejected: {e.strerror}") from e
        raise ConfigError(f"scheduler rejected {policy.policy.value}: {e.strerror}") from e
    got = read_back()
    want = _expected(policy, cores)
    if got != want:
        raise AdmissionError(f"read-back mismatch: requested {want.to_dict()}, OS reports {got}")
    return got


def reset_policy() -> None:
    """Return the calling thread to SCHED_OTHER (used by probes and tests)."""
    os.sched_setscheduler(0, os.SCHED_OTHER, os.sched_param(0))
