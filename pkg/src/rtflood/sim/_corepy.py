"""Pure-Python per-core event loop.

This is the reference implementation; ``_simcore.pyx`` mirrors it line for
line with C types and must produce identical output for identical inputs.

One core is modelled as a priority stack:

1. packet bursts (hardirq + NAPI poll), never preempted once started;
2. the real-time control task (FIFO/RR, or SCHED_DEADLINE with CBS budget);
3. deferred NET_RX polling (runs only while the RT task is not runnable);
4. a normal-class CPU hog (stress worker), else idle.

While the NIC is in interrupt mode (empty RX queue) a packet arrival starts a
burst immediately, interrupting whatever runs.  When a burst exhausts its
batch budget with backlog left, the NIC stays in polling mode and the next
batch is deferred; the RT task then only meets it at batch boundaries, except
that pending NET_RX work also runs inline at scheduler-tick exit.  Inline
bursts are charged to the runtime budget of the task they interrupt.
"""

from __future__ import annotations

from bisect import bisect_right

NS = 1_000_000_000
INF = 1 << 62

# task states
SLEEP, BLOCKED, THROTTLED, READY, RUNNING, DONE, NOTASK = range(7)
STATE_NAMES = ("sleep", "blocked", "throttled", "ready", "running", "done", "notask")

# accounting classes, row order of the bins array
HARDIRQ, SOFTIRQ, RT_USER, NORMAL_USER, IDLE = range(5)
N_CLASSES = 5

ARR_NONE, ARR_ANALYTIC, ARR_ARRAY = 0, 1, 2


class CoreSim:
    """Discrete-event model of one CPU core.  See module docstring."""

    def __init__(self, inp):
        self.has_task = bool(inp.has_task)
        self.n_cycles = int(inp.n_cycles)
        self.period = int(inp.period_ns)
        self.exec_ns = int(inp.exec_ns)
        self.lat = [int(x) for x in inp.latency]
        self.dl = bool(inp.deadline)
        self.Q = int(inp.dl_runtime_ns)
        self.D = int(inp.dl_deadline_ns)
        self.Pd = int(inp.dl_period_ns)

        self.arr_mode = int(inp.arr_mode)
        self.a_start = int(inp.a_start)
        self.a_rate = int(inp.a_rate)
        self.a_group = int(inp.a_group)
        self.a_gap = int(inp.a_gap)
        self.arrivals = [int(x) for x in inp.arrivals]
        self.h = int(inp.hardirq_ns)
        self.s = int(inp.softirq_ns)
        self.batch = int(inp.napi_batch)
        self.cost_jitter = [int(x) for x in inp.cost_jitter]
        self.n_bursts = 0
        self.ring = int(inp.ring_size)
        self.tick = int(inp.tick_ns)
        self.tick_off = int(inp.tick_offset_ns)
        self.stress = bool(inp.local_stress)
        self.lock_start = [int(x) for x in inp.lock_start]
        self.lock_end = [int(x) for x in inp.lock_end]
        self.horizon = int(inp.horizon_ns)
        self.bin_ns = int(inp.bin_ns)
        self.nbins = int(inp.nbins)

        if self.arr_mode == ARR_ANALYTIC:
            a_end, a_max = int(inp.a_end), int(inp.a_max)
            self.total = min(a_max, self._count_raw(a_end - 1)) if a_end > self.a_start else 0
        elif self.arr_mode == ARR_ARRAY:
            self.total = len(self.arrivals)
        else:
            self.total = 0

        self.now = 0
        self.q = 0
        self.ai = 0
        self.poll = False
        self.processed = 0
        self.dropped = 0
        self.li = 0
        self.bins = [[0] * self.nbins for _ in range(N_CLASSES)]

        self.k = 0
        self.started = False
        self.rem = self.exec_ns
        self.runtime = 0
        self.deadline = -1  # a fresh entity: first wakeup always refills
        self.throttled = False
        self.throttle_until = 0
        self.throttle_after = False
        self.lock_until = 0
        self.wake_pending = False
        self.starts = [0] * (self.n_cycles + 1)
        self.end_time = 0
        if self.has_task:
            self.state = SLEEP
            self.task_event = self.lat[0]
        else:
            self.state = NOTASK
            self.task_event = INF

    # -- packet source --------------------------------------------------------

    def _count_raw(self, t):
        if t < self.a_start:
            return 0
        G = self.a_group
        g = ((t - self.a_start + 1) * self.a_rate - 1) // (G * NS)
        S = self.a_start + (g * G * NS) // self.a_rate
        if self.a_gap == 0:
            j = G
        else:
            j = min(G, (t - S) // self.a_gap + 1)
        return g * G + j

    def _count(self, t):
        if self.arr_mode == ARR_ANALYTIC:
            return min(self.total, self._count_raw(t))
        if self.arr_mode == ARR_ARRAY:
            return bisect_right(self.arrivals, t, self.ai)
        return 0

    def _arrival_time(self, i):
        if i >= self.total:
            return INF
        if self.arr_mode == ARR_ARRAY:
            return self.arrivals[i]
        G = self.a_group
        return self.a_start + ((i // G) * G * NS) // self.a_rate + (i % G) * self.a_gap

    def _absorb(self, t):
        c = self._count(t)
        new = c - self.ai
        if new > 0:
            space = self.ring - self.q
            if new <= space:
                self.q += new
            else:
                self.q = self.ring
                self.dropped += new - space
            self.ai = c

    # -- accounting -----------------------------------------------------------

    def _account(self, cls, t0, t1):
        row = self.bins[cls]
        last = self.nbins - 1
        while t0 < t1:
            w = t0 // self.bin_ns
            if w >= last:
                row[last] += t1 - t0
                return
            seg = min(t1, (w + 1) * self.bin_ns)
            row[w] += seg - t0
            t0 = seg

    def _next_tick(self, t):
        if self.tick <= 0:
            return INF
        if t < self.tick_off:
            return self.tick_off
        return self.tick_off + ((t - self.tick_off) // self.tick + 1) * self.tick

    # -- network --------------------------------------------------------------

    def _burst(self, inline):
        t0 = self.now
        end = t0
        p = 0
        cost = self.h + self.s
        while p < self.batch:
            self._absorb(end)
            if self.q == 0:
                break
            take = min(self.q, self.batch - p)
            self.q -= take
            p += take
            end += take * cost
        if self.cost_jitter:
            end += p * self.cost_jitter[self.n_bursts % len(self.cost_jitter)]
        self.n_bursts += 1
        self._absorb(end)
        self.poll = self.q > 0
        self.processed += p
        mid = t0 + p * self.h
        self._account(HARDIRQ, t0, mid)
        self._account(SOFTIRQ, mid, end)
        self.now = end
        if inline and self.state == RUNNING and self.dl:
            self.runtime -= end - t0
            if self.runtime <= 0 and self.rem > 0:
                self._throttle()

    # -- CBS ------------------------------------------------------------------

    def _replenish(self, at):
        while self.runtime <= 0:
            self.deadline += self.Pd
            self.runtime += self.Q
        if self.deadline < at:
            self.deadline = at + self.D
            self.runtime = self.Q
        self.throttled = False

    def _throttle(self):
        self.throttled = True
        self.throttle_until = self.deadline
        self.state = THROTTLED
        self.task_event = self.deadline
        self.lock_until = 0
        self.wake_pending = False

    def _block(self, t, e):
        need = e - t
        self.state = BLOCKED
        if self.dl and self.runtime <= need:
            # priority-inherited holder runs on our reservation until it is gone
            self.task_event = t + self.runtime
            self.throttle_after = True
            self.lock_until = e
        else:
            if self.dl:
                self.runtime -= need
            self.task_event = e
            self.throttle_after = False

    def _contend(self, t):
        n = len(self.lock_end)
        while self.li < n and self.lock_end[self.li] <= t:
            self.li += 1
        if self.li < n and self.lock_start[self.li] <= t:
            self._block(t, self.lock_end[self.li])
        else:
            self.state = READY

    # -- task -----------------------------------------------------------------

    def _task_event(self):
        t = self.now
        if self.state == SLEEP:
            if self.dl:
                if self.throttled:
                    if self.throttle_until > t:
                        self.state = THROTTLED
                        self.task_event = self.throttle_until
                        self.wake_pending = True
                        return
                    self._replenish(t)
                if self.deadline < t or self.runtime * self.D > (self.deadline - t) * self.Q:
                    self.deadline = t + self.D
                    self.runtime = self.Q
            self._contend(t)
        elif self.state == BLOCKED:
            if self.throttle_after:
                self.runtime = 0
                self.throttled = True
                self.throttle_until = self.deadline
                self.state = THROTTLED
                self.task_event = self.deadline
                self.throttle_after = False
            else:
                self.state = READY
        elif self.state == THROTTLED:
            self._replenish(t)
            if self.lock_until > t:
                e = self.lock_until
                self.lock_until = 0
                self._block(t, e)
            elif self.wake_pending:
                self.wake_pending = False
                self.lock_until = 0
                self._contend(t)
            else:
                self.lock_until = 0
                self.state = READY

    def _complete(self):
        if self.dl and self.runtime <= 0:
            self.throttled = True
            self.throttle_until = self.deadline
        if self.k == self.n_cycles:
            self.state = DONE
            self.task_event = INF
            self.end_time = self.now
            return
        self.k += 1
        self.started = False
        self.rem = self.exec_ns
        release = self.k * self.period
        if release > self.now:
            self.state = SLEEP
            self.task_event = release + self.lat[self.k]
        elif self.dl and self.throttled:
            self.state = THROTTLED
            self.task_event = self.throttle_until
            self.lock_until = 0
            self.wake_pending = False
        else:
            self.state = READY

    def _run_segment(self):
        limit = self.now + self.rem
        if self.dl and self.now + self.runtime < limit:
            limit = self.now + self.runtime
        tk = INF
        if self.poll:
            tk = self._next_tick(self.now)
            if tk < limit:
                limit = tk
        else:
            na = self._arrival_time(self.ai)
            if na < limit:
                limit = na
        dt = limit - self.now
        self._account(RT_USER, self.now, limit)
        self.rem -= dt
        if self.dl:
            self.runtime -= dt
        self.now = limit
        if self.rem == 0:
            self._complete()
        elif self.dl and self.runtime <= 0:
            self._throttle()
        elif self.poll and limit == tk:
            self._burst(True)

    # -- main loop ------------------------------------------------------------

    def finished(self):
        if self.has_task:
            return self.state == DONE
        return self.now >= self.horizon

    def step(self):
        """Apply exactly one event; return False once the core has finished."""
        if self.finished():
            return False
        self._absorb(self.now)
        if not self.poll and self.q > 0:
            self._burst(self.state == RUNNING)
        elif self.state in (SLEEP, BLOCKED, THROTTLED) and self.task_event <= self.now:
            self._task_event()
        elif self.state == READY:
            self.state = RUNNING
            if not self.started:
                self.starts[self.k] = self.now
                self.started = True
        elif self.state == RUNNING:
            self._run_segment()
        elif self.poll:
            self._burst(False)
        else:
            t_next = self._arrival_time(self.ai)
            if self.state in (SLEEP, BLOCKED, THROTTLED) and self.task_event < t_next:
                t_next = self.task_event
            if not self.has_task and self.horizon < t_next:
                t_next = self.horizon
            self._account(NORMAL_USER if self.stress else IDLE, self.now, t_next)
            self.now = t_next
        if not self.has_task and self.now >= self.horizon:
            self.end_time = self.now
        return not self.finished()

    def run(self):
        while self.step():
            pass
        return self.starts, self.end_time, self.bins, self.processed, self.dropped


def run_core(inp):
    return CoreSim(inp).run()
