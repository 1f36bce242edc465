"""Real-mode cyclic toggle task.

The loop runs in a child process so that the real-time policy, the memory
lock and the affinity never leak into the orchestrator.  Wakeups sit on an
absolute grid ``anchor + k * period`` (clock_nanosleep with TIMER_ABSTIME):
a late cycle is followed by immediate catch-up cycles, never by a shifted
schedule.
"""

from __future__ import annotations

import ctypes
import multiprocessing as mp
import os
import time
from dataclasses import dataclass, field

import numpy as np

from ..errors import BenchError, ConfigError, PrivilegeError
from ..model import NS_PER_S, ArchitectureVariant, Backend, CycleSeries, ExperimentConfig, Phase
from . import sched

_cycleloop = None
if os.environ.get("RTFLOOD_PURE_PYTHON") != "1":
    try:
        from . import _cycleloop
    except ImportError:  # extension not built
        pass

CLOCK_MONOTONIC = 1
TIMER_ABSTIME = 1
MCL_CURRENT, MCL_FUTURE = 1, 2
# the loop checks for stop requests between chunks of this many cycles
CHUNK = 256


class _Timespec(ctypes.Structure):
    _fields_ = [("tv_sec", ctypes.c_long), ("tv_nsec", ctypes.c_long)]


def _libc():
    return ctypes.CDLL(None, use_errno=True)


def _py_loop(anchor_ns, period_ns, starts, k0, level, gpio):
    libc = _libc()
    sleep = libc.clock_nanosleep
    ts = _Timespec()
    ref = ctypes.byref(ts)
    now = time.clock_gettime_ns
    for i in range(len(starts)):
        t = anchor_ns + (k0 + i) * period_ns
        ts.tv_sec, ts.tv_nsec = divmod(t, NS_PER_S)
        while sleep(CLOCK_MONOTONIC, TIMER_ABSTIME, ref, None) != 0:
            pass
        starts[i] = now(time.CLOCK_MONOTONIC)
        level ^= 1
        gpio(level)
    return level


def _noop_gpio(level: int) -> None:
    pass


def lock_memory() -> bool:
    """mlockall(MCL_CURRENT | MCL_FUTURE); False when the OS refuses."""
    return _libc().mlockall(MCL_CURRENT | MCL_FUTURE) == 0


def cycle_loop(anchor_ns: int, period_ns: int, starts: np.ndarray, gpio=None,
               stop=None, impl: str | None = None) -> tuple[int, int]:
    """Fill ``starts`` with the wake times of cycles 1..n; cycle 0 wakes at ``anchor_ns``.

    Returns ``(cycles_done, final_level)``.  ``stop`` is polled between
    chunks; the compiled loop is used unless a GPIO hook is given (it needs
    the interpreter) or ``impl == "py"``.
    """
    use_c = _cycleloop is not None and gpio is None and impl != "py"
    gpio = gpio or _noop_gpio
    level = 0
    anchor_buf = np.zeros(1, dtype=np.int64)
    if use_c:
        level = _cycleloop.run_loop(anchor_ns, period_ns, anchor_buf, 0, level)
    else:
        level = _py_loop(anchor_ns, period_ns, anchor_buf, 0, level, gpio)
    n = len(starts)
    done = 0
    while done < n:
        if stop is not None and stop.is_set():
            break
        chunk = starts[done:done + CHUNK]
        if use_c:
            level = _cycleloop.run_loop(anchor_ns, period_ns, chunk, done + 1, level)
        else:
            level = _py_loop(anchor_ns, period_ns, chunk, done + 1, level, gpio)
        done += len(chunk)
    return done, level


def _target_cores(config: ExperimentConfig) -> list[int]:
    if config.architecture is ArchitectureVariant.CO_PROCESSOR:
        raise ConfigError("the co-processor variant has no real backend on this host")
    return [config.architecture.rt_core]


def _child(conn, config_dict, n_cycles, start_delay_ns, stop, impl):
    try:
        config = ExperimentConfig.from_dict(config_dict)
        starts = np.zeros(n_cycles, dtype=np.int64)  # preallocated before any RT setting
        starts[:] = 0
        locked = lock_memory()
        applied = sched.set_policy_and_affinity(config.scheduler, _target_cores(config))
        conn.send(("ready", applied.to_dict(), locked))
        anchor = time.clock_gettime_ns(time.CLOCK_MONOTONIC) + start_delay_ns
        t0 = time.monotonic_ns()
        done, _ = cycle_loop(anchor, config.cycle_period_ns, starts, stop=stop, impl=impl)
        wall = time.monotonic_ns() - t0
        conn.send(("done", anchor, starts[:done].tobytes(), wall))
    except BaseException as e:  # forwarded to the parent and re-raised there
        conn.send(("error", type(e).__name__, str(e)))
    finally:
        conn.close()


_ERRORS = {cls.__name__: cls for cls in BenchError.__subclasses__()}
_ERRORS["BenchError"] = BenchError


@dataclass
class AgentHandle:
    """One cycle loop in a child process; at most one active loop per handle."""

    config: ExperimentConfig
    impl: str | None = None
    start_delay_ns: int = 2_000_000
    applied: dict = field(default_factory=dict)
    memory_locked: bool = False
    _proc: object = None
    _conn: object = None
    _stop: object = None
    _n: int = 0

    @property
    def active(self) -> bool:
        return self._proc is not None

    def start(self, n_cycles: int) -> None:
        if self.active:
            raise BenchError("a cycle loop is already running on this handle")
        ctx = mp.get_context("fork")
        self._conn, child = ctx.Pipe(duplex=False)
        self._stop = ctx.Event()
        self._n = n_cycles
        self._proc = ctx.Process(target=_child, args=(child, self.config.to_dict(), n_cycles,
                                                      self.start_delay_ns, self._stop, self.impl),
                                 daemon=True)
        self._proc.start()
        child.close()
        msg = self._recv()
        self.applied, self.memory_locked = msg[1], msg[2]

    def _recv(self, timeout: float | None = 30.0):
        if not self._conn.poll(timeout):
            self._abort()
            raise BenchError("agent did not respond")
        try:
            msg = self._conn.recv()
        except EOFError:
            self._abort()
            raise BenchError("agent exited without reporting") from None
        if msg[0] == "error":
            self._abort()
            raise _ERRORS.get(msg[1], BenchError)(msg[2])
        return msg

    def stop(self) -> None:
        """Ask the loop to finish at the next chunk boundary."""
        if self._stop is not None:
            self._stop.set()

    def wait(self, phase: Phase | str = Phase.ATTACK, timeout: float | None = None) -> CycleSeries:
        if not self.active:
            raise BenchError("no cycle loop running")
        if timeout is None:
            timeout = self._n * self.config.cycle_period_ns / NS_PER_S * 2 + 30
        _, anchor, raw, wall = self._recv(timeout)
        self._proc.join(5)
        self._proc = None
        starts = np.frombuffer(raw, dtype=np.int64).copy()
        meta = {"backend": "real", "code": self.config.code, "attack_kind": self.config.attack.kind.value,
                "stress": self.config.stress.enabled, "cycle_period_ns": self.config.cycle_period_ns,
                "applied": self.applied, "memory_locked": self.memory_locked,
                "loop": "c" if _cycleloop is not None and self.impl != "py" else "py"}
        if len(starts) < self._n:
            meta["incomplete"] = True
        return CycleSeries.from_starts(phase, self.config.id, anchor, starts, wall, meta)

    def _abort(self) -> None:
        if self._proc is not None:
            self._proc.kill()
            self._proc.join(5)
            self._proc = None


def run_cycle_loop(config: ExperimentConfig, duration_s: float, phase: Phase | str = Phase.ATTACK,
                   impl: str | None = None) -> CycleSeries:
    """Run the toggle loop for ``duration_s`` under the config's policy and pinning."""
    if config.backend is not Backend.REAL:
        raise ConfigError(f"config {config.id} is not a real-backend config")
    if duration_s < 0:
        raise ConfigError("duration must be >= 0")
    n = int(round(duration_s * NS_PER_S / config.cycle_period_ns))
    if n == 0:
        return CycleSeries(phase, config.id, [], [], [], 0, {"backend": "real", "code": config.code})
    _target_cores(config)
    h = AgentHandle(config, impl=impl)
    h.start(n)
    return h.wait(phase)


def check_privileges(config: ExperimentConfig) -> None:
    """Fail fast, before any phase starts, if the policy cannot be applied."""
    h = AgentHandle(config)
    h.start(0)
    h.wait()
    if not h.applied:
        raise PrivilegeError("could not apply the real-time policy")
