"""Experiment vocabulary: architectures, schedulers, attacks, configs and cycle series.

Every type here is an immutable value object.  Configs round-trip through the
YAML config-file format (see ``docs/config.md``) and cycle series through JSONL.
"""

from __future__ import annotations

import enum
import itertools
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Iterable, Iterator, Sequence

import numpy as np
import yaml

from .errors import ConfigError

NS_PER_S = 1_000_000_000
DEFAULT_PERIOD_NS = 1_000_000
DEFAULT_PHASE_S = 300.0
DEFAULT_SCAN_PHASE_S = 10.0
DEFAULT_GAP_S = 5.0
DEFAULT_FLOOD_PPS = 100_000


class ArchitectureVariant(enum.Enum):
    SINGLE_CORE = "single_core"
    DUAL_CORE_PINNED = "dual_core_pinned"
    CO_PROCESSOR = "co_processor"

    @property
    def letter(self) -> str:
        return {"single_core": "S", "dual_core_pinned": "D", "co_processor": "C"}[self.value]

    @property
    def linux_cores(self) -> int:
        return 1 if self is ArchitectureVariant.SINGLE_CORE else 2

    @property
    def rt_core(self) -> int:
        # core index of the control task; the co-processor is its own unit
        return 1 if self is ArchitectureVariant.DUAL_CORE_PINNED else 0


class Policy(enum.Enum):
    FIFO = "fifo"
    ROUND_ROBIN = "rr"
    DEADLINE = "deadline"

    @property
    def letter(self) -> str:
        return {"fifo": "F", "rr": "R", "deadline": "D"}[self.value]


class AttackKind(enum.Enum):
    NONE = "none"
    SYN_FLOOD = "syn_flood"
    ARP_FLOOD = "arp_flood"
    SYN_SCAN = "syn_scan"

    @property
    def is_flood(self) -> bool:
        return self in (AttackKind.SYN_FLOOD, AttackKind.ARP_FLOOD)

    @property
    def column(self) -> str:
        return {"none": "Idle", "syn_flood": "SYN flooding",
                "arp_flood": "ARP flooding", "syn_scan": "Nmap"}[self.value]


class Phase(enum.Enum):
    IDLE_PRE = "idle_pre"
    ATTACK = "attack"
    IDLE_POST = "idle_post"


class Backend(enum.Enum):
    REAL = "real"
    SIM = "sim"


PHASES = (Phase.IDLE_PRE, Phase.ATTACK, Phase.IDLE_POST)


def _enum(cls, value):
    if isinstance(value, cls):
        return value
    try:
        return cls(value)
    except ValueError:
        choices = ", ".join(m.value for m in cls)
        raise ConfigError(f"invalid {cls.__name__} {value!r}; expected one of: {choices}") from None


def _seconds(name, value) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float, np.integer, np.floating)):
        raise ConfigError(f"{name} must be a number of seconds, got {value!r}")
    value = float(value)
    if not math.isfinite(value) or value < 0:
        raise ConfigError(f"{name} must be a finite number >= 0, got {value}")
    return value


def _int_field(name, value, *, minimum=None):
    if isinstance(value, bool) or not isinstance(value, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer, got {value!r}")
    value = int(value)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}")
    return value


@dataclass(frozen=True)
class SchedulerPolicy:
    policy: Policy = Policy.FIFO
    priority: int | None = None
    runtime_ns: int | None = None
    deadline_ns: int | None = None
    period_ns: int | None = None

    def __post_init__(self):
        pol = _enum(Policy, self.policy)
        object.__setattr__(self, "policy", pol)
        if pol is Policy.DEADLINE:
            if self.priority is not None:
                raise ConfigError("deadline policy does not take a priority")
            runtime = 100_000 if self.runtime_ns is None else _int_field("runtime_ns", self.runtime_ns, minimum=1)
            deadline = 1_000_000 if self.deadline_ns is None else _int_field("deadline_ns", self.deadline_ns, minimum=1)
            period = deadline if self.period_ns is None else _int_field("period_ns", self.period_ns, minimum=1)
            if not runtime <= deadline <= period:
                raise ConfigError(
                    f"deadline parameters must satisfy runtime <= deadline <= period, "
                    f"got {runtime}/{deadline}/{period}")
            object.__setattr__(self, "runtime_ns", runtime)
            object.__setattr__(self, "deadline_ns", deadline)
            object.__setattr__(self, "period_ns", period)
        else:
            if any(v is not None for v in (self.runtime_ns, self.deadline_ns, self.period_ns)):
                raise ConfigError(f"{pol.value} policy does not take deadline parameters")
            prio = 99 if self.priority is None else _int_field("priority", self.priority)
            if not 1 <= prio <= 99:
                raise ConfigError(f"priority out of range 1-99: {prio}")
            object.__setattr__(self, "priority", prio)

    @classmethod
    def fifo(cls, priority: int = 99) -> SchedulerPolicy:
        return cls(Policy.FIFO, priority=priority)

    @classmethod
    def round_robin(cls, priority: int = 99) -> SchedulerPolicy:
        return cls(Policy.ROUND_ROBIN, priority=priority)

    @classmethod
    def deadline(cls, runtime_ns: int = 100_000, deadline_ns: int = 1_000_000,
                 period_ns: int = 1_000_000) -> SchedulerPolicy:
        return cls(Policy.DEADLINE, runtime_ns=runtime_ns, deadline_ns=deadline_ns, period_ns=period_ns)

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"policy": self.policy.value}
        if self.policy is Policy.DEADLINE:
            d.update(runtime_ns=self.runtime_ns, deadline_ns=self.deadline_ns, period_ns=self.period_ns)
        else:
            d["priority"] = self.priority
        return d

    @classmethod
    def from_dict(cls, d: dict) -> SchedulerPolicy:
        _check_keys("scheduler", d, {"policy", "priority", "runtime_ns", "deadline_ns", "period_ns"})
        return cls(**d)


@dataclass(frozen=True)
class AttackSpec:
    kind: AttackKind = AttackKind.NONE
    rate_pps: int | None = None
    port_range: tuple[int, int] | None = None
    duration_s: float | None = None
    target: str = "127.0.0.1"
    interface: str = "lo"

    def __post_init__(self):
        kind = _enum(AttackKind, self.kind)
        object.__setattr__(self, "kind", kind)
        if kind.is_flood:
            rate = DEFAULT_FLOOD_PPS if self.rate_pps is None else _int_field("rate_pps", self.rate_pps)
            if rate <= 0:
                raise ConfigError(f"rate_pps must be positive for {kind.value}, got {rate}")
            object.__setattr__(self, "rate_pps", rate)
        elif self.rate_pps is not None:
            # the scanner runs unthrottled; a rate is meaningless here
            object.__setattr__(self, "rate_pps", None)
        if kind is AttackKind.SYN_SCAN:
            lo, hi = (1, 65535) if self.port_range is None else self.port_range
            lo, hi = _int_field("port_range[0]", lo), _int_field("port_range[1]", hi)
            if not (1 <= lo <= 65535 and 1 <= hi <= 65535):
                raise ConfigError(f"port range out of bounds: {lo}-{hi}")
            if lo > hi:
                raise ConfigError(f"empty port range {lo}-{hi}")
            object.__setattr__(self, "port_range", (lo, hi))
            if self.duration_s is None:
                object.__setattr__(self, "duration_s", DEFAULT_SCAN_PHASE_S)
        elif self.port_range is not None:
            raise ConfigError("port_range only applies to syn_scan")
        if self.duration_s is not None:
            object.__setattr__(self, "duration_s", _seconds("duration_s", self.duration_s))

    @property
    def n_ports(self) -> int:
        lo, hi = self.port_range or (1, 0)
        return hi - lo + 1

    def to_dict(self) -> dict:
        d: dict[str, Any] = {"kind": self.kind.value}
        if self.rate_pps is not None:
            d["rate_pps"] = self.rate_pps
        if self.port_range is not None:
            d["port_range"] = list(self.port_range)
        if self.duration_s is not None:
            d["duration_s"] = self.duration_s
        d["target"] = self.target
        d["interface"] = self.interface
        return d

    @classmethod
    def from_dict(cls, d: dict) -> AttackSpec:
        _check_keys("attack", d, {"kind", "rate_pps", "port_range", "duration_s", "target", "interface"})
        d = dict(d)
        if d.get("port_range") is not None:
            pr = d["port_range"]
            if not isinstance(pr, (list, tuple)) or len(pr) != 2:
                raise ConfigError(f"port_range must be a [low, high] pair, got {pr!r}")
            d["port_range"] = tuple(pr)
        return cls(**d)


@dataclass(frozen=True)
class StressSpec:
    enabled: bool = False
    workers: int = 0
    pinning: tuple[int, ...] = ()

    def __post_init__(self):
        if not isinstance(self.enabled, bool):
            raise ConfigError(f"stress.enabled must be a boolean, got {self.enabled!r}")
        workers = _int_field("workers", self.workers, minimum=0)
        pinning = tuple(_int_field("pinning", c, minimum=0) for c in self.pinning)
        if not self.enabled and (workers or pinning):
            raise ConfigError("disabled stress cannot carry workers or pinning")
        if self.enabled and workers == 0:
            raise ConfigError("enabled stress needs at least one worker")
        if pinning and len(pinning) != workers:
            raise ConfigError(f"pinning lists {len(pinning)} cores for {workers} workers")
        object.__setattr__(self, "workers", workers)
        object.__setattr__(self, "pinning", pinning)

    @classmethod
    def for_architecture(cls, arch: ArchitectureVariant, enabled: bool) -> StressSpec:
        """One worker per Linux core, each pinned to its own core."""
        if not enabled:
            return cls()
        n = _enum(ArchitectureVariant, arch).linux_cores
        return cls(True, n, tuple(range(n)))

    def to_dict(self) -> dict:
        return {"enabled": self.enabled, "workers": self.workers, "pinning": list(self.pinning)}

    @classmethod
    def from_dict(cls, d: dict) -> StressSpec:
        _check_keys("stress", d, {"enabled", "workers", "pinning"})
        d = dict(d)
        pin = d.get("pinning") or ()
        if not isinstance(pin, (list, tuple)):
            raise ConfigError(f"pinning must be a list of core indices, got {pin!r}")
        d["pinning"] = tuple(pin)
        return cls(**d)


@dataclass(frozen=True)
class ExperimentConfig:
    id: str
    architecture: ArchitectureVariant
    scheduler: SchedulerPolicy = field(default_factory=SchedulerPolicy)
    cycle_period_ns: int = DEFAULT_PERIOD_NS
    attack: AttackSpec = field(default_factory=AttackSpec)
    stress: StressSpec = field(default_factory=StressSpec)
    phase_duration_s: float = DEFAULT_PHASE_S
    gap_s: float = DEFAULT_GAP_S
    backend: Backend = Backend.SIM

    def __post_init__(self):
        if not isinstance(self.id, str) or not self.id:
            raise ConfigError("config id must be a non-empty string")
        arch = _enum(ArchitectureVariant, self.architecture)
        object.__setattr__(self, "architecture", arch)
        object.__setattr__(self, "backend", _enum(Backend, self.backend))
        for name, typ in (("scheduler", SchedulerPolicy), ("attack", AttackSpec), ("stress", StressSpec)):
            if not isinstance(getattr(self, name), typ):
                raise ConfigError(f"{name} must be a {typ.__name__}")
        _int_field("cycle_period_ns", self.cycle_period_ns, minimum=1)
        object.__setattr__(self, "phase_duration_s", _seconds("phase_duration_s", self.phase_duration_s))
        object.__setattr__(self, "gap_s", _seconds("gap_s", self.gap_s))
        if self.stress.enabled:
            n = arch.linux_cores
            bad = [c for c in self.stress.pinning if c >= n]
            if bad:
                raise ConfigError(f"stress pinned to core(s) {bad} but {arch.value} has {n} Linux core(s)")

    @property
    def code(self) -> str:
        """Two-letter test-case code (SF, SR, SD, DF, DR, DD, C)."""
        if self.architecture is ArchitectureVariant.CO_PROCESSOR:
            return "C"
        return self.architecture.letter + self.scheduler.policy.letter

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "architecture": self.architecture.value,
            "scheduler": self.scheduler.to_dict(),
            "cycle_period_ns": self.cycle_period_ns,
            "attack": self.attack.to_dict(),
            "stress": self.stress.to_dict(),
            "phase_duration_s": self.phase_duration_s,
            "gap_s": self.gap_s,
            "backend": self.backend.value,
        }

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        if not isinstance(d, dict):
            raise ConfigError(f"experiment must be a mapping, got {type(d).__name__}")
        _check_keys("experiment", d, {f for f in cls.__dataclass_fields__})
        if "id" not in d or "architecture" not in d:
            raise ConfigError("experiment needs at least 'id' and 'architecture'")
        d = dict(d)
        for name, typ in (("scheduler", SchedulerPolicy), ("attack", AttackSpec), ("stress", StressSpec)):
            if name in d:
                if not isinstance(d[name], dict):
                    raise ConfigError(f"{name} must be a mapping")
                d[name] = typ.from_dict(d[name])
        return cls(**d)


def _check_keys(where: str, d: dict, allowed: set[str]) -> None:
    unknown = set(d) - allowed
    if unknown:
        raise ConfigError(f"unknown key(s) in {where}: {sorted(unknown)}")


CANONICAL_CODES = ("SF", "SR", "SD", "DF", "DR", "DD", "C")
# row order of the result tables
TABLE_ROW_ORDER = ("SD", "SF", "SR", "DD", "DF", "DR", "C")

_CODE_LAYOUT = {
    "SF": (ArchitectureVariant.SINGLE_CORE, Policy.FIFO),
    "SR": (ArchitectureVariant.SINGLE_CORE, Policy.ROUND_ROBIN),
    "SD": (ArchitectureVariant.SINGLE_CORE, Policy.DEADLINE),
    "DF": (ArchitectureVariant.DUAL_CORE_PINNED, Policy.FIFO),
    "DR": (ArchitectureVariant.DUAL_CORE_PINNED, Policy.ROUND_ROBIN),
    "DD": (ArchitectureVariant.DUAL_CORE_PINNED, Policy.DEADLINE),
    "C": (ArchitectureVariant.CO_PROCESSOR, Policy.FIFO),
}


def canonical_config(code: str, attack: AttackSpec | AttackKind | str = AttackKind.NONE,
                     stress: bool = False, phase_duration_s: float = DEFAULT_PHASE_S,
                     backend: Backend | str = Backend.SIM) -> ExperimentConfig:
    if code not in _CODE_LAYOUT:
        raise ConfigError(f"unknown test case {code!r}; expected one of {CANONICAL_CODES}")
    arch, pol = _CODE_LAYOUT[code]
    if not isinstance(attack, AttackSpec):
        attack = AttackSpec(_enum(AttackKind, attack))
    phase = phase_duration_s
    if attack.kind is AttackKind.SYN_SCAN:
        # scan runs use short ten-second captures for every phase
        phase = attack.duration_s
    elif attack.kind.is_flood and attack.duration_s is None:
        attack = replace(attack, duration_s=float(phase))
    ident = f"{code}:{attack.kind.value}" + (":stress" if stress else "")
    return ExperimentConfig(
        id=ident,
        architecture=arch,
        scheduler=SchedulerPolicy(pol),
        attack=attack,
        stress=StressSpec.for_architecture(arch, stress),
        phase_duration_s=phase,
        backend=backend,
    )


def canonical_matrix(phase_duration_s: float,
                     attack_list: Sequence[AttackSpec | AttackKind | str],
                     stress_variants: Sequence[bool] = (False,),
                     backend: Backend | str = Backend.SIM) -> list[ExperimentConfig]:
    """Cross product of the seven test cases with attacks and stress flags."""
    if not phase_duration_s or phase_duration_s <= 0:
        raise ConfigError("phase_duration_s must be positive")
    if not attack_list:
        raise ConfigError("empty attack list")
    if not stress_variants:
        raise ConfigError("empty stress variant list")
    return [
        canonical_config(code, attack, bool(stress), phase_duration_s, backend)
        for stress, attack, code in itertools.product(stress_variants, attack_list, CANONICAL_CODES)
    ]


# -- config files -------------------------------------------------------------

def dump_configs(configs: Iterable[ExperimentConfig]) -> str:
    return yaml.safe_dump({"experiments": [c.to_dict() for c in configs]}, sort_keys=False)


def parse_configs(text: str) -> list[ExperimentConfig]:
    """Parse a config file.

    Accepted top-level shapes: a single experiment mapping, ``experiments: [...]``,
    or ``matrix: {phase_duration_s, attacks, stress}`` expanding to the canonical set.
    """
    try:
        doc = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"config file is not valid YAML: {exc}") from None
    if not isinstance(doc, dict):
        raise ConfigError("config file must contain a mapping")
    if "experiments" in doc:
        items = doc["experiments"]
        if not isinstance(items, list) or not items:
            raise ConfigError("'experiments' must be a non-empty list")
        configs = [ExperimentConfig.from_dict(item) for item in items]
    elif "matrix" in doc:
        m = doc["matrix"] or {}
        _check_keys("matrix", m, {"phase_duration_s", "attacks", "stress", "backend"})
        configs = canonical_matrix(
            m.get("phase_duration_s", DEFAULT_PHASE_S),
            m.get("attacks", ["syn_flood", "arp_flood", "syn_scan"]),
            m.get("stress", [False, True]),
            m.get("backend", "sim"),
        )
    else:
        configs = [ExperimentConfig.from_dict(doc)]
    ids = [c.id for c in configs]
    if len(set(ids)) != len(ids):
        raise ConfigError("duplicate experiment ids in config file")
    return configs


def load_configs(path: str | Path) -> list[ExperimentConfig]:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc.strerror}") from None
    return parse_configs(text)


# -- cycle series --------------------------------------------------------------

@dataclass(frozen=True)
class CycleRecord:
    index: int
    start_time_ns: int
    period_ns: int


class CycleSeries:
    """Timestamped cycles of one phase, stored column-wise.

    ``period_ns[i]`` is the start-to-start distance to the previous cycle; the
    anchor cycle that opens the phase is not itself recorded.
    """

    __slots__ = ("phase", "config_id", "index", "start_time_ns", "period_ns", "wall_duration_ns", "meta")

    def __init__(self, phase: Phase | str, config_id: str, index, start_time_ns, period_ns,
                 wall_duration_ns: int, meta: dict | None = None):
        self.phase = _enum(Phase, phase)
        self.config_id = config_id
        self.index = np.asarray(index, dtype=np.int64)
        self.start_time_ns = np.asarray(start_time_ns, dtype=np.int64)
        self.period_ns = np.asarray(period_ns, dtype=np.int64)
        self.wall_duration_ns = int(wall_duration_ns)
        self.meta = dict(meta or {})
        if not (len(self.index) == len(self.start_time_ns) == len(self.period_ns)):
            raise ValueError("series columns differ in length")

    @classmethod
    def from_starts(cls, phase, config_id, anchor_ns: int, starts, wall_duration_ns: int,
                    meta: dict | None = None) -> CycleSeries:
        starts = np.asarray(starts, dtype=np.int64)
        periods = np.diff(starts, prepend=np.int64(anchor_ns))
        index = np.arange(1, len(starts) + 1, dtype=np.int64)
        return cls(phase, config_id, index, starts, periods, wall_duration_ns, meta)

    def __len__(self) -> int:
        return len(self.period_ns)

    def __iter__(self) -> Iterator[CycleRecord]:
        for i, s, p in zip(self.index.tolist(), self.start_time_ns.tolist(), self.period_ns.tolist()):
            yield CycleRecord(i, s, p)

    @property
    def records(self) -> list[CycleRecord]:
        return list(self)

    def __eq__(self, other) -> bool:
        if not isinstance(other, CycleSeries):
            return NotImplemented
        return (self.phase is other.phase and self.config_id == other.config_id
                and self.wall_duration_ns == other.wall_duration_ns
                and np.array_equal(self.index, other.index)
                and np.array_equal(self.start_time_ns, other.start_time_ns)
                and np.array_equal(self.period_ns, other.period_ns))

    def __repr__(self) -> str:
        return f"CycleSeries({self.config_id!r}, {self.phase.value}, n={len(self)})"

    def check_invariants(self, nominal_ns: int | None = None) -> None:
        if len(self) == 0:
            return
        if np.any(self.period_ns <= 0):
            raise ValueError("non-positive period in series")
        if np.any(np.diff(self.index) <= 0):
            raise ValueError("record index not strictly increasing")
        if np.any(np.diff(self.start_time_ns) < 0):
            raise ValueError("start times go backwards")
        if nominal_ns is not None and int(self.period_ns.sum()) > self.wall_duration_ns + nominal_ns:
            raise ValueError("periods exceed the phase wall duration")

    def metadata(self) -> dict:
        return {"phase": self.phase.value, "config_id": self.config_id,
                "records": len(self), "wall_duration_ns": self.wall_duration_ns, **self.meta}

    def to_jsonl(self) -> str:
        lines = [
            f'{{"index":{i},"start_time_ns":{s},"period_ns":{p}}}\n'
            for i, s, p in zip(self.index.tolist(), self.start_time_ns.tolist(), self.period_ns.tolist())
        ]
        return "".join(lines)

    def save(self, path: str | Path) -> tuple[Path, Path]:
        """Write ``<path>`` (JSONL records) and ``<path>.meta.json``."""
        path = Path(path)
        path.write_text(self.to_jsonl())
        meta_path = path.with_name(path.name + ".meta.json")
        meta_path.write_text(json.dumps(self.metadata(), indent=2, sort_keys=True) + "\n")
        return path, meta_path

    @classmethod
    def load(cls, path: str | Path) -> CycleSeries:
        path = Path(path)
        meta = json.loads(path.with_name(path.name + ".meta.json").read_text())
        idx, starts, periods = [], [], []
        with path.open() as fh:
            for line in fh:
                if not line.strip():
                    continue
                rec = json.loads(line)
                idx.append(rec["index"])
                starts.append(rec["start_time_ns"])
                periods.append(rec["period_ns"])
        phase = meta.pop("phase")
        config_id = meta.pop("config_id")
        wall = meta.pop("wall_duration_ns")
        meta.pop("records", None)
        return cls(phase, config_id, idx, starts, periods, wall, meta)
