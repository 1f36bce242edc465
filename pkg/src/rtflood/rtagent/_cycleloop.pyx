# cython: language_level=3, boundscheck=False, wraparound=False
"""Absolute-time periodic loop without the GIL.

Wakeups are computed from the anchor (``anchor + k * period``), never from
the previous wakeup, so a late cycle does not shift later ones.
"""

cdef extern from "<time.h>" nogil:
    ctypedef long time_t
    cdef struct timespec:
        time_t tv_sec
        long tv_nsec
    ctypedef int clockid_t
    int CLOCK_MONOTONIC
    int TIMER_ABSTIME
    int clock_gettime(clockid_t clk, timespec *tp)
    int clock_nanosleep(clockid_t clk, int flags, const timespec *req, timespec *rem)

ctypedef long long i64


cdef inline i64 _now() noexcept nogil:
    cdef timespec ts
    clock_gettime(CLOCK_MONOTONIC, &ts)
    return <i64>ts.tv_sec * 1000000000 + ts.tv_nsec


cdef inline void _sleep_until(i64 t) noexcept nogil:
    cdef timespec ts
    ts.tv_sec = <time_t>(t // 1000000000)
    ts.tv_nsec = <long>(t % 1000000000)
    # EINTR: retry the same absolute deadline
    while clock_nanosleep(CLOCK_MONOTONIC, TIMER_ABSTIME, &ts, NULL) != 0:
        pass


cdef inline void _spin(i64 ns) noexcept nogil:
    cdef i64 until
    if ns <= 0:
        return
    until = _now() + ns
    while _now() < until:
        pass


def monotonic_ns():
    return _now()


def run_loop(i64 anchor_ns, i64 period_ns, i64[::1] starts, i64 k0=1, int level=0, i64 work_ns=0):
    """Wake at ``anchor_ns + (k0 + i) * period_ns`` and store the wake time in ``starts[i]``.

    Each cycle timestamps first, then inverts the output level; the final
    level is returned.
    """
    cdef Py_ssize_t i, n = starts.shape[0]
    with nogil:
        for i in range(n):
            _sleep_until(anchor_ns + (k0 + i) * period_ns)
            starts[i] = _now()
            level ^= 1
            _spin(work_ns)
    return level
