"""Half-open (SYN) port scanner."""

from __future__ import annotations

import random
import socket
import time
from dataclasses import dataclass, field

from .flood import _raw_socket, route_source
from .packets import TCP_ACK, TCP_RST, TCP_SYN, SynTemplate, parse_ipv4_tcp
from .pacing import PacingBucket


@dataclass
class ScanSummary:
    target: str
    port_range: tuple[int, int]
    probed: int
    open: list[int] = field(default_factory=list)
    closed_count: int = 0
    filtered: list[int] = field(default_factory=list)
    sent: int = 0
    elapsed_s: float = 0.0

    @property
    def responses(self) -> dict:
        return {"syn_ack": len(self.open), "rst": self.closed_count, "none": len(self.filtered)}

    def to_dict(self) -> dict:
        return {"target": self.target, "port_range": list(self.port_range), "probed": self.probed,
                "open": self.open, "closed": self.closed_count, "filtered_count": len(self.filtered),
                "sent": self.sent, "elapsed_s": self.elapsed_s}


def _collect(sock, target, sport, pending: set, opened: set, closed: set, wait_s: float):
    """Read answers until ``pending`` empties or ``wait_s`` passes; 0 drains what is queued."""
    deadline = time.monotonic() + wait_s
    while pending:
        sock.settimeout(max(0.0, deadline - time.monotonic()))
        try:
            pkt = sock.recv(65535)
        except (socket.timeout, BlockingIOError):
            break
        p = parse_ipv4_tcp(pkt)
        if p is None or p["src"] != target or p["dport"] != sport or p["sport"] not in pending:
            continue
        f = p["flags"]
        if f & TCP_SYN and f & TCP_ACK:
            opened.add(p["sport"])
        elif f & TCP_RST:
            closed.add(p["sport"])
        else:
            continue
        pending.discard(p["sport"])


def syn_scan(target: str, port_range: tuple[int, int] = (1, 65535), parallelism: int = 1024,
             timeout_s: float = 0.5, retries: int = 1, rate_pps: int | None = None,
             seed: int | None = None) -> ScanSummary:
    """Probe each port once (plus ``retries`` for silent ones) and classify it.

    SYN/ACK means open, RST closed, silence after all tries filtered.  Ports
    go out in batches of ``parallelism``; each batch waits at most
    ``timeout_s`` for answers.  Unthrottled unless ``rate_pps`` is given.
    """
    lo, hi = int(port_range[0]), int(port_range[1])
    if lo > hi:
        raise ValueError("empty port range")
    if lo < 1 or hi > 65535:
        raise ValueError("ports must lie in 1-65535")
    if parallelism < 1:
        raise ValueError("parallelism must be >= 1")
    src = route_source(target)
    rng = random.Random(seed)
    sport = rng.randrange(40000, 60000)
    tx = _raw_socket(socket.AF_INET, socket.SOCK_RAW, socket.IPPROTO_RAW, "SYN scan")
    rx = _raw_socket(socket.AF_INET, socket.SOCK_RAW, socket.IPPROTO_TCP, "SYN scan capture")
    rx.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, 8 << 20)
    tpl = SynTemplate(src, target)
    bucket = PacingBucket(rate_pps, depth=max(1, rate_pps // 100)) if rate_pps else None
    isn = rng.getrandbits(32)
    opened: set[int] = set()
    closed: set[int] = set()
    filtered: list[int] = []
    sent = 0
    t0 = time.monotonic()
    try:
        for b0 in range(lo, hi + 1, parallelism):
            pending = set(range(b0, min(hi, b0 + parallelism - 1) + 1))
            for _ in range(1 + retries):
                for port in sorted(pending):
                    if bucket is not None:
                        while bucket.take(1) == 0:
                            time.sleep(bucket.wait_time())
                    tx.sendto(tpl.make(sport, port, isn + port, port), (target, 0))
                    sent += 1
                    # drain answers as we go so the receive buffer cannot overflow
                    if sent % 64 == 0:
                        _collect(rx, target, sport, pending, opened, closed, 0.0)
                _collect(rx, target, sport, pending, opened, closed, timeout_s)
                if not pending:
                    break
            filtered.extend(sorted(pending))
    finally:
        tx.close()
        rx.close()
    return ScanSummary(target, (lo, hi), hi - lo + 1, sorted(opened), len(closed), filtered, sent,
                       time.monotonic() - t0)
