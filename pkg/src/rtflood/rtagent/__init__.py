"""Real-mode backend: the cyclic toggle task under a real-time policy."""

from .loop import AgentHandle, check_privileges, cycle_loop, lock_memory, run_cycle_loop
from .sched import AppliedSettings, read_back, reset_policy, set_policy_and_affinity
from .selftest import host_capabilities, probe_policy

__all__ = [
    "AgentHandle", "AppliedSettings", "check_privileges", "cycle_loop", "host_capabilities", "lock_memory",
    "probe_policy", "read_back", "reset_policy", "run_cycle_loop", "set_policy_and_affinity",
]
