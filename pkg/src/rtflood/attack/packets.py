"""Byte-level builders and parsers for TCP SYN segments and gratuitous ARP frames."""

from __future__ import annotations

import socket
import struct

ETH_P_ARP = 0x0806
ETH_P_IP = 0x0800
BROADCAST = b"\xff" * 6

TCP_FIN, TCP_SYN, TCP_RST, TCP_PSH, TCP_ACK = 0x01, 0x02, 0x04, 0x08, 0x10

_IP_HDR = struct.Struct("!BBHHHBBH4s4s")
_TCP_HDR = struct.Struct("!HHIIBBHHH")
_ETH_HDR = struct.Struct("!6s6sH")
_ARP_BODY = struct.Struct("!HHBBH6s4s6s4s")


def _fold(s: int) -> int:
    while s >> 16:
        s = (s & 0xFFFF) + (s >> 16)
    return s


def inet_checksum(data: bytes) -> int:
    if len(data) % 2:
        data += b"\0"
    return ~_fold(sum(struct.unpack(f"!{len(data) // 2}H", data))) & 0xFFFF


def _tcp_checksum(src: bytes, dst: bytes, segment: bytes) -> int:
    pseudo = src + dst + struct.pack("!BBH", 0, socket.IPPROTO_TCP, len(segment))
    return inet_checksum(pseudo + segment)


def build_syn(src_ip: str, dst_ip: str, sport: int, dport: int, seq: int = 0,
              ip_id: int = 0, ttl: int = 64, window: int = 64240) -> bytes:
    """IPv4 header + 20-byte TCP header with only SYN set, both checksums filled."""
    src, dst = socket.inet_aton(src_ip), socket.inet_aton(dst_ip)
    tcp = _TCP_HDR.pack(sport, dport, seq & 0xFFFFFFFF, 0, 5 << 4, TCP_SYN, window, 0, 0)
    csum = _tcp_checksum(src, dst, tcp)
    tcp = tcp[:16] + struct.pack("!H", csum) + tcp[18:]
    ip = _IP_HDR.pack(0x45, 0, 20 + len(tcp), ip_id & 0xFFFF, 0x4000, ttl, socket.IPPROTO_TCP, 0, src, dst)
    ip = ip[:10] + struct.pack("!H", inet_checksum(ip)) + ip[12:]
    return ip + tcp


class SynTemplate:
    """Pre-built SYN whose ports, sequence and IP id are patched per packet.

    The one's-complement sums over the fixed fields are computed once; each
    packet only adds its variable words, which keeps the send loop cheap.
    """

    def __init__(self, src_ip: str, dst_ip: str):
        self.src_ip, self.dst_ip = src_ip, dst_ip
        self._buf = bytearray(build_syn(src_ip, dst_ip, 0, 0, 0, 0))
        self._buf[10:12] = b"\0\0"
        self._buf[36:38] = b"\0\0"
        self._ip_base = sum(struct.unpack("!10H", bytes(self._buf[:20])))
        src, dst = socket.inet_aton(src_ip), socket.inet_aton(dst_ip)
        pseudo = src + dst + struct.pack("!BBH", 0, socket.IPPROTO_TCP, 20)
        self._tcp_base = sum(struct.unpack("!16H", pseudo + bytes(self._buf[20:40])))

    def make(self, sport: int, dport: int, seq: int, ip_id: int = 0) -> bytes:
        b = self._buf
        seq &= 0xFFFFFFFF
        ip_id &= 0xFFFF
        struct.pack_into("!H", b, 4, ip_id)
        struct.pack_into("!H", b, 10, ~_fold(self._ip_base + ip_id) & 0xFFFF)
        struct.pack_into("!HHI", b, 20, sport, dport, seq)
        tcs = _fold(self._tcp_base + sport + dport + (seq >> 16) + (seq & 0xFFFF))
        struct.pack_into("!H", b, 36, ~tcs & 0xFFFF)
        return bytes(b)


def parse_ipv4_tcp(pkt: bytes) -> dict | None:
    """Decode an IPv4/TCP packet (no link header); None if it is something else."""
    if len(pkt) < 20 or pkt[0] >> 4 != 4:
        return None
    ihl = (pkt[0] & 0x0F) * 4
    vhl, tos, total, ident, frag, ttl, proto, csum, src, dst = _IP_HDR.unpack_from(pkt)
    if proto != socket.IPPROTO_TCP or len(pkt) < ihl + 20:
        return None
    sport, dport, seq, ack, off, flags, window, tcsum, urg = _TCP_HDR.unpack_from(pkt, ihl)
    seg = pkt[ihl:total]
    return {
        "src": socket.inet_ntoa(src), "dst": socket.inet_ntoa(dst), "ttl": ttl, "id": ident,
        "ip_checksum_ok": inet_checksum(pkt[:ihl]) == 0,
        "sport": sport, "dport": dport, "seq": seq, "ack": ack, "flags": flags, "window": window,
        "tcp_checksum_ok": _tcp_checksum(src, dst, seg) == 0,
    }


def mac_bytes(mac: str) -> bytes:
    return bytes(int(x, 16) for x in mac.split(":"))


def interface_mac(iface: str) -> bytes:
    try:
        with open(f"/sys/class/net/{iface}/address") as fh:
            return mac_bytes(fh.read().strip())
    except OSError:
        return b"\0" * 6


def build_gratuitous_arp(src_mac: bytes, ip: str) -> bytes:
    """Broadcast ARP request announcing ``ip``: sender IP = target IP, padded to 60 bytes."""
    addr = socket.inet_aton(ip)
    eth = _ETH_HDR.pack(BROADCAST, src_mac, ETH_P_ARP)
    arp = _ARP_BODY.pack(1, ETH_P_IP, 6, 4, 1, src_mac, addr, b"\0" * 6, addr)
    frame = eth + arp
    return frame + b"\0" * (60 - len(frame))


def parse_arp(frame: bytes) -> dict | None:
    if len(frame) < 42:
        return None
    dst, src, etype = _ETH_HDR.unpack_from(frame)
    if etype != ETH_P_ARP:
        return None
    htype, ptype, hlen, plen, oper, sha, spa, tha, tpa = _ARP_BODY.unpack_from(frame, 14)
    return {"eth_dst": dst, "eth_src": src, "htype": htype, "ptype": ptype, "oper": oper,
            "sha": sha, "spa": socket.inet_ntoa(spa), "tha": tha, "tpa": socket.inet_ntoa(tpa)}
