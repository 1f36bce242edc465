"""Simulation parameters and the small state records exposed by the simulator."""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass, fields

import numpy as np

from ..errors import ConfigError


class ArrivalModel(enum.Enum):
    CONSTANT_RATE = "constant_rate"
    POISSON = "poisson"


@dataclass(frozen=True)
class SimParams:
    """Interference and scheduler-model constants.

    Defaults were tuned against the reference maxima in
    ``rtflood.sim.calibration``; ``docs/calibration.md`` explains what each
    constant controls.  All times are nanoseconds.
    """

    per_packet_hardirq_ns: int = 500
    per_packet_softirq_ns: int = 11_500
    # gratuitous ARP needs no reply, so less protocol work than a SYN
    arp_softirq_ns: int = 10_500
    napi_batch: int = 300
    # per-packet cost varies from poll to poll (cache state, branch history)
    per_packet_jitter_ns: int = 200
    # used when an AttackSpec does not carry its own rate
    packet_rate_pps: int = 100_000
    arrival_model: ArrivalModel = ArrivalModel.CONSTANT_RATE
    task_exec_ns: int = 10_000
    sched_latency_ns: int = 20_000
    latency_jitter_ns: int = 8_000
    rng_seed: int = 0
    ring_size: int = 1024
    tick_hz: int = 1000
    spillover_fraction: float = 0.05
    scan_rate_pps: int = 20_000
    scan_burst: int = 128
    wire_gap_ns: int = 672
    lock_hold_ns: int = 130_000
    lock_interval_ns: int = 2_000_000
    bin_ns: int = 10_000_000

    def __post_init__(self):
        object.__setattr__(self, "arrival_model", ArrivalModel(self.arrival_model))
        for f in fields(self):
            v = getattr(self, f.name)
            if f.name in ("arrival_model", "spillover_fraction"):
                continue
            if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
                raise ConfigError(f"{f.name} must be an integer, got {v!r}")
            if v < 0:
                raise ConfigError(f"{f.name} must be >= 0, got {v}")
        if self.napi_batch < 1:
            raise ConfigError("napi_batch must be >= 1")
        if self.ring_size < 1:
            raise ConfigError("ring_size must be >= 1")
        if self.bin_ns < 1:
            raise ConfigError("bin_ns must be >= 1")
        if self.scan_burst < 1:
            raise ConfigError("scan_burst must be >= 1")
        if not 0.0 <= float(self.spillover_fraction) <= 1.0:
            raise ConfigError("spillover_fraction must lie in [0, 1]")

    def to_dict(self) -> dict:
        d = asdict(self)
        d["arrival_model"] = self.arrival_model.value
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SimParams:
        unknown = set(d) - {f.name for f in fields(cls)}
        if unknown:
            raise ConfigError(f"unknown simulation parameter(s): {sorted(unknown)}")
        return cls(**d)

    def with_zero_interference(self) -> SimParams:
        return type(self)(**{**self.to_dict(), "per_packet_hardirq_ns": 0, "per_packet_softirq_ns": 0,
                             "arp_softirq_ns": 0, "sched_latency_ns": 0, "latency_jitter_ns": 0})


@dataclass(frozen=True)
class CbsState:
    budget_ns: int
    absolute_deadline_ns: int
    replenish_period_ns: int


@dataclass
class CoreState:
    """Per-class busy time of one simulated core, binned in ``bin_ns`` slices."""

    core: str
    bin_ns: int
    end_time_ns: int
    bins: np.ndarray  # shape (5, nbins): hardirq, softirq, rt_user, normal_user, idle
    packets_processed: int = 0
    packets_dropped: int = 0

    CLASSES = ("hardirq", "softirq", "rt_user", "normal_user", "idle")

    def totals(self) -> dict[str, int]:
        return {name: int(self.bins[i].sum()) for i, name in enumerate(self.CLASSES)}
