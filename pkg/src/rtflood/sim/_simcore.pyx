# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled per-core event loop.

Mirrors ``_corepy.CoreSim`` statement for statement; every quantity is a
64-bit integer and all divisions act on non-negative operands, so C
truncation agrees with Python floor division.
"""

import numpy as np

ctypedef long long i64

cdef i64 NS = 1000000000
cdef i64 INF = 1LL << 62

cdef enum:
    SLEEP = 0
    BLOCKED = 1
    THROTTLED = 2
    READY = 3
    RUNNING = 4
    DONE = 5
    NOTASK = 6

cdef enum:
    HARDIRQ = 0
    SOFTIRQ = 1
    RT_USER = 2
    NORMAL_USER = 3
    IDLE = 4

cdef enum:
    ARR_NONE = 0
    ARR_ANALYTIC = 1
    ARR_ARRAY = 2


cdef inline i64 imin(i64 a, i64 b) noexcept nogil:
    return a if a < b else b


cdef class _Core:
    cdef bint has_task, dl, stress, poll, started, throttled, throttle_after, wake_pending
    cdef i64 n_cycles, period, exec_ns, Q, D, Pd
    cdef int arr_mode
    cdef i64 a_start, a_rate, a_group, a_gap, total
    cdef i64 h, s, batch, ring, tick, tick_off, horizon, bin_ns, nbins
    cdef i64 n_jit, n_bursts, n_lock, n_arr
    cdef i64 now, q, ai, processed, dropped, li
    cdef i64 k, rem, runtime, deadline, throttle_until, lock_until, end_time, task_event
    cdef int state
    cdef i64[::1] lat, arrivals, cost_jitter, lock_start, lock_end, starts
    cdef i64[:, ::1] bins

    def __init__(self, inp):
        self.has_task = bool(inp.has_task)
        self.n_cycles = int(inp.n_cycles)
        self.period = int(inp.period_ns)
        self.exec_ns = int(inp.exec_ns)
        self.lat = np.ascontiguousarray(inp.latency, dtype=np.int64)
        self.dl = bool(inp.deadline)
        self.Q = int(inp.dl_runtime_ns)
        self.D = int(inp.dl_deadline_ns)
        self.Pd = int(inp.dl_period_ns)

        self.arr_mode = int(inp.arr_mode)
        self.a_start = int(inp.a_start)
        self.a_rate = int(inp.a_rate)
        self.a_group = int(inp.a_group)
        self.a_gap = int(inp.a_gap)
        self.arrivals = np.ascontiguousarray(inp.arrivals, dtype=np.int64)
        self.n_arr = self.arrivals.shape[0]
        self.h = int(inp.hardirq_ns)
        self.s = int(inp.softirq_ns)
        self.batch = int(inp.napi_batch)
        self.cost_jitter = np.ascontiguousarray(inp.cost_jitter, dtype=np.int64)
        self.n_jit = self.cost_jitter.shape[0]
        self.n_bursts = 0
        self.ring = int(inp.ring_size)
        self.tick = int(inp.tick_ns)
        self.tick_off = int(inp.tick_offset_ns)
        self.stress = bool(inp.local_stress)
        self.lock_start = np.ascontiguousarray(inp.lock_start, dtype=np.int64)
        self.lock_end = np.ascontiguousarray(inp.lock_end, dtype=np.int64)
        self.n_lock = self.lock_end.shape[0]
        self.horizon = int(inp.horizon_ns)
        self.bin_ns = int(inp.bin_ns)
        self.nbins = int(inp.nbins)

        cdef i64 a_end, a_max
        if self.arr_mode == ARR_ANALYTIC:
            a_end, a_max = int(inp.a_end), int(inp.a_max)
            self.total = imin(a_max, self._count_raw(a_end - 1)) if a_end > self.a_start else 0
        elif self.arr_mode == ARR_ARRAY:
            self.total = self.n_arr
        else:
            self.total = 0

        self.now = 0
        self.q = 0
        self.ai = 0
        self.poll = False
        self.processed = 0
        self.dropped = 0
        self.li = 0
        self.bins = np.zeros((5, self.nbins), dtype=np.int64)

        self.k = 0
        self.started = False
        self.rem = self.exec_ns
        self.runtime = 0
        self.deadline = -1
        self.throttled = False
        self.throttle_until = 0
        self.throttle_after = False
        self.lock_until = 0
        self.wake_pending = False
        self.starts = np.zeros(self.n_cycles + 1, dtype=np.int64)
        self.end_time = 0
        if self.has_task:
            self.state = SLEEP
            self.task_event = self.lat[0]
        else:
            self.state = NOTASK
            self.task_event = INF

    # -- packet source

    cdef i64 _count_raw(self, i64 t) noexcept nogil:
        cdef i64 G, g, S, j
        if t < self.a_start:
            return 0
        G = self.a_group
        g = ((t - self.a_start + 1) * self.a_rate - 1) // (G * NS)
        S = self.a_start + (g * G * NS) // self.a_rate
        if self.a_gap == 0:
            j = G
        else:
            j = imin(G, (t - S) // self.a_gap + 1)
        return g * G + j

    cdef i64 _count(self, i64 t) noexcept nogil:
        cdef i64 lo, hi, mid
        if self.arr_mode == ARR_ANALYTIC:
            return imin(self.total, self._count_raw(t))
        if self.arr_mode == ARR_ARRAY:
            lo = self.ai
            hi = self.n_arr
            while lo < hi:
                mid = (lo + hi) // 2
                if t < self.arrivals[mid]:
                    hi = mid
                else:
                    lo = mid + 1
            return lo
        return 0

    cdef i64 _arrival_time(self, i64 i) noexcept nogil:
        cdef i64 G
        if i >= self.total:
            return INF
        if self.arr_mode == ARR_ARRAY:
            return self.arrivals[i]
        G = self.a_group
        return self.a_start + ((i // G) * G * NS) // self.a_rate + (i % G) * self.a_gap

    cdef void _absorb(self, i64 t) noexcept nogil:
        cdef i64 c = self._count(t)
        cdef i64 new = c - self.ai
        cdef i64 space
        if new > 0:
            space = self.ring - self.q
            if new <= space:
                self.q += new
            else:
                self.q = self.ring
                self.dropped += new - space
            self.ai = c

    # -- accounting

    cdef void _account(self, int cls, i64 t0, i64 t1) noexcept nogil:
        cdef i64 last = self.nbins - 1
        cdef i64 w, seg
        while t0 < t1:
            w = t0 // self.bin_ns
            if w >= last:
                self.bins[cls, last] += t1 - t0
                return
            seg = imin(t1, (w + 1) * self.bin_ns)
            self.bins[cls, w] += seg - t0
            t0 = seg

    cdef i64 _next_tick(self, i64 t) noexcept nogil:
        if self.tick <= 0:
            return INF
        if t < self.tick_off:
            return self.tick_off
        return self.tick_off + ((t - self.tick_off) // self.tick + 1) * self.tick

    # -- network

    cdef void _burst(self, bint inline) noexcept nogil:
        cdef i64 t0 = self.now
        cdef i64 end = t0
        cdef i64 p = 0
        cdef i64 cost = self.h + self.s
        cdef i64 take, mid
        while p < self.batch:
            self._absorb(end)
            if self.q == 0:
                break
            take = imin(self.q, self.batch - p)
            self.q -= take
            p += take
            end += take * cost
        if self.n_jit > 0:
            end += p * self.cost_jitter[self.n_bursts % self.n_jit]
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

    # -- CBS

    cdef void _replenish(self, i64 at) noexcept nogil:
        while self.runtime <= 0:
            self.deadline += self.Pd
            self.runtime += self.Q
        if self.deadline < at:
            self.deadline = at + self.D
            self.runtime = self.Q
        self.throttled = False

    cdef void _throttle(self) noexcept nogil:
        self.throttled = True
        self.throttle_until = self.deadline
        self.state = THROTTLED
        self.task_event = self.deadline
        self.lock_until = 0
        self.wake_pending = False

    cdef void _block(self, i64 t, i64 e) noexcept nogil:
        cdef i64 need = e - t
        self.state = BLOCKED
        if self.dl and self.runtime <= need:
            self.task_event = t + self.runtime
            self.throttle_after = True
            self.lock_until = e
        else:
            if self.dl:
                self.runtime -= need
            self.task_event = e
            self.throttle_after = False

    cdef void _contend(self, i64 t) noexcept nogil:
        while self.li < self.n_lock and self.lock_end[self.li] <= t:
            self.li += 1
        if self.li < self.n_lock and self.lock_start[self.li] <= t:
            self._block(t, self.lock_end[self.li])
        else:
            self.state = READY

    # -- task

    cdef void _task_event(self) noexcept nogil:
        cdef i64 t = self.now
        cdef i64 e
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

    cdef void _complete(self) noexcept nogil:
        cdef i64 release
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

    cdef void _run_segment(self) noexcept nogil:
        cdef i64 limit = self.now + self.rem
        cdef i64 tk = INF
        cdef i64 na, dt
        if self.dl and self.now + self.runtime < limit:
            limit = self.now + self.runtime
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

    # -- main loop

    cdef bint _finished(self) noexcept nogil:
        if self.has_task:
            return self.state == DONE
        return self.now >= self.horizon

    cdef void _step(self) noexcept nogil:
        cdef i64 t_next
        self._absorb(self.now)
        if not self.poll and self.q > 0:
            self._burst(self.state == RUNNING)
        elif (self.state == SLEEP or self.state == BLOCKED or self.state == THROTTLED) and self.task_event <= self.now:
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
            if (self.state == SLEEP or self.state == BLOCKED or self.state == THROTTLED) and self.task_event < t_next:
                t_next = self.task_event
            if not self.has_task and self.horizon < t_next:
                t_next = self.horizon
            self._account(NORMAL_USER if self.stress else IDLE, self.now, t_next)
            self.now = t_next
        if not self.has_task and self.now >= self.horizon:
            self.end_time = self.now

    def run(self):
        with nogil:
            while not self._finished():
                self._step()
        return (np.asarray(self.starts), self.end_time, np.asarray(self.bins),
                self.processed, self.dropped)


def run_core(inp):
    """Run one core to completion; same contract as ``_corepy.run_core``."""
    return _Core(inp).run()
