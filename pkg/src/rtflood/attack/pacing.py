"""Token-bucket pacing and per-second send/response telemetry."""

from __future__ import annotations

import json
import queue
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path


class PacingBucket:
    """Continuous-refill token bucket.

    Tokens accrue at ``rate_pps`` up to ``depth``; ``take(n)`` grants at most
    ``n`` whole tokens.  Over any interval T the grant count is bounded by
    ``rate * T + depth``.
    """

    def __init__(self, rate_pps: int, depth: int | None = None, clock=time.monotonic):
        if rate_pps <= 0:
            raise ValueError("rate must be positive")
        self.rate = float(rate_pps)
        # default depth: 1 ms of traffic, at least one packet
        self.depth = int(depth) if depth is not None else max(1, int(rate_pps // 1000))
        if self.depth < 1:
            raise ValueError("bucket depth must be >= 1")
        self._clock = clock
        self._last = clock()
        self.tokens = 0.0

    def _refill(self) -> None:
        now = self._clock()
        self.tokens = min(float(self.depth), self.tokens + (now - self._last) * self.rate)
        self._last = now

    def take(self, n: int) -> int:
        self._refill()
        got = min(int(self.tokens), n)
        self.tokens -= got
        return got

    def wait_time(self) -> float:
        """Seconds until one whole token is available."""
        self._refill()
        return max(0.0, (1.0 - self.tokens) / self.rate)


@dataclass
class FloodTelemetry:
    """Per-second windows of sent packets and received responses."""

    target_rate_pps: int
    duration_s: float
    sent_pps: list[int] = field(default_factory=list)
    received_response_pps: list[int] = field(default_factory=list)
    errors: int = 0
    elapsed_s: float = 0.0
    meta: dict = field(default_factory=dict)

    @property
    def sent_total(self) -> int:
        return sum(self.sent_pps)

    @property
    def responses_total(self) -> int:
        return sum(self.received_response_pps)

    @property
    def achieved_pps(self) -> float:
        return self.sent_total / self.elapsed_s if self.elapsed_s > 0 else 0.0

    @property
    def shortfall(self) -> bool:
        """Achieved rate more than 10 % below target."""
        return self.achieved_pps < 0.9 * self.target_rate_pps

    def windows(self) -> list[dict]:
        return [{"t_s": i, "sent": s, "responses": r}
                for i, (s, r) in enumerate(zip(self.sent_pps, self.received_response_pps))]

    def to_dict(self) -> dict:
        return {"target_rate_pps": self.target_rate_pps, "duration_s": self.duration_s,
                "sent_total": self.sent_total, "responses_total": self.responses_total,
                "achieved_pps": self.achieved_pps, "shortfall": self.shortfall, "errors": self.errors,
                "elapsed_s": self.elapsed_s, **self.meta}

    def save(self, path: str | Path) -> Path:
        """JSONL: one line per window, then a summary line."""
        path = Path(path)
        lines = [json.dumps(w) for w in self.windows()]
        lines.append(json.dumps({"summary": self.to_dict()}, sort_keys=True))
        path.write_text("\n".join(lines) + "\n")
        return path


class TelemetryCollector:
    """Aggregates ``(kind, t, count)`` events from a bounded queue in its own thread.

    Producers call :meth:`add`, which never blocks: when the queue is full the
    count is held back and merged into the next successful put.
    """

    def __init__(self, t0: float, n_windows: int, maxsize: int = 4096):
        self.t0 = t0
        self.n = max(1, n_windows)
        self.sent = [0] * self.n
        self.resp = [0] * self.n
        self.q: queue.Queue = queue.Queue(maxsize=maxsize)
        self._held: dict = {}
        self._lock = threading.Lock()
        self._thread = threading.Thread(target=self._drain, name="telemetry", daemon=True)
        self._done = threading.Event()

    def start(self) -> TelemetryCollector:
        self._thread.start()
        return self

    def _window(self, t: float) -> int:
        return min(self.n - 1, max(0, int(t - self.t0)))

    def add(self, kind: str, t: float, count: int) -> None:
        key = (kind, self._window(t))
        with self._lock:
            count += self._held.pop(key, 0)
            try:
                self.q.put_nowait((kind, key[1], count))
            except queue.Full:
                self._held[key] = count

    def _apply(self, kind, w, count):
        (self.sent if kind == "sent" else self.resp)[w] += count

    def _drain(self):
        while not (self._done.is_set() and self.q.empty()):
            try:
                item = self.q.get(timeout=0.05)
            except queue.Empty:
                continue
            self._apply(*item)

    def close(self) -> tuple[list[int], list[int]]:
        self._done.set()
        self._thread.join()
        with self._lock:
            for (kind, w), c in self._held.items():
                self._apply(kind, w, c)
            self._held.clear()
        return self.sent, self.resp
