"""Traffic and load generators: SYN flood, gratuitous-ARP flood, SYN scan, CPU stress."""

from .flood import arp_flood, paced_send, route_source, syn_flood
from .pacing import FloodTelemetry, PacingBucket, TelemetryCollector
from .packets import build_gratuitous_arp, build_syn, inet_checksum, parse_arp, parse_ipv4_tcp, SynTemplate
from .scan import ScanSummary, syn_scan
from .stress import LoadReport, StressWorkers, cpu_stress, read_cpu_times, utilization

__all__ = [
    "FloodTelemetry", "LoadReport", "PacingBucket", "ScanSummary", "StressWorkers", "SynTemplate",
    "TelemetryCollector", "arp_flood", "build_gratuitous_arp", "build_syn", "cpu_stress", "inet_checksum",
    "paced_send", "parse_arp", "parse_ipv4_tcp", "read_cpu_times", "route_source", "syn_flood", "syn_scan",
    "utilization",
]
