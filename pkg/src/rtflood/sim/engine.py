"""Map experiment configs onto per-core kernel inputs and run them."""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field

import numpy as np

from ..errors import ConfigError
from ..model import (NS_PER_S, ArchitectureVariant, AttackKind, Backend, CycleSeries,
                     ExperimentConfig, Phase, Policy, PHASES)
from . import _corepy
from .params import ArrivalModel, CbsState, CoreState, SimParams

_EMPTY = np.zeros(0, dtype=np.int64)


@dataclass
class CoreInputs:
    has_task: bool = False
    n_cycles: int = 0
    period_ns: int = 1_000_000
    exec_ns: int = 0
    latency: np.ndarray = field(default_factory=lambda: np.zeros(1, dtype=np.int64))
    deadline: bool = False
    dl_runtime_ns: int = 0
    dl_deadline_ns: int = 0
    dl_period_ns: int = 0
    arr_mode: int = _corepy.ARR_NONE
    a_start: int = 0
    a_end: int = 0
    a_rate: int = 1
    a_group: int = 1
    a_gap: int = 0
    a_max: int = 0
    arrivals: np.ndarray = field(default_factory=lambda: _EMPTY)
    hardirq_ns: int = 0
    softirq_ns: int = 0
    napi_batch: int = 1
    cost_jitter: np.ndarray = field(default_factory=lambda: _EMPTY)
    ring_size: int = 1
    tick_ns: int = 0
    tick_offset_ns: int = 0
    local_stress: bool = False
    lock_start: np.ndarray = field(default_factory=lambda: _EMPTY)
    lock_end: np.ndarray = field(default_factory=lambda: _EMPTY)
    horizon_ns: int = 0
    bin_ns: int = 10_000_000
    nbins: int = 1


def _seed(config: ExperimentConfig, params: SimParams, phase: Phase) -> np.random.SeedSequence:
    return np.random.SeedSequence([params.rng_seed, zlib.crc32(config.id.encode()), PHASES.index(phase)])


def _set_source(inp: CoreInputs, rng, model: ArrivalModel, rate: int, group: int, gap: int,
                end: int, max_packets: int) -> None:
    if rate <= 0 or max_packets <= 0 or end <= 0:
        return
    spacing = (group * NS_PER_S) // rate
    if group > 1 and (group - 1) * gap >= spacing:
        raise ConfigError("packet groups overlap: lower the burst size or the rate")
    if model is ArrivalModel.CONSTANT_RATE:
        inp.arr_mode = _corepy.ARR_ANALYTIC
        inp.a_start = int(rng.integers(0, max(spacing, 1)))
        inp.a_end, inp.a_rate, inp.a_group, inp.a_gap = end, rate, group, gap
        inp.a_max = max_packets
        return
    n_groups = int(end * rate / (group * NS_PER_S) * 1.25) + 16
    starts = np.floor(np.cumsum(rng.exponential(spacing, size=n_groups))).astype(np.int64)
    if group > 1:
        starts = (starts[:, None] + np.arange(group, dtype=np.int64) * gap).ravel()
    starts = starts[starts < end][:max_packets]
    inp.arr_mode = _corepy.ARR_ARRAY
    inp.arrivals = np.ascontiguousarray(starts, dtype=np.int64)


def _set_scan_source(inp: CoreInputs, rng, rate: int, group: int, gap: int, end: int, total: int) -> None:
    """Grouped probes whose group start wanders inside its slot.

    A scanner's send loop is not phase-locked to anything on the target, so
    each group starts at a uniform offset within the first half of its slot;
    consecutive groups therefore stay at least half a slot apart.
    """
    if rate <= 0 or total <= 0 or end <= 0:
        return
    spacing = (group * NS_PER_S) // rate
    free = min(spacing // 2, spacing - (group - 1) * gap)
    if free <= 0:
        raise ConfigError("packet groups overlap: lower the burst size or the rate")
    n_groups = -(-total // group)
    starts = np.arange(n_groups, dtype=np.int64) * spacing + rng.integers(0, free, size=n_groups, dtype=np.int64)
    times = (starts[:, None] + np.arange(group, dtype=np.int64) * gap).ravel()[:total]
    times = times[times < end]
    inp.arr_mode = _corepy.ARR_ARRAY
    inp.arrivals = np.ascontiguousarray(times, dtype=np.int64)


def _lock_sections(rng, horizon: int, hold: int, interval: int):
    if hold <= 0 or interval <= 0:
        return _EMPTY, _EMPTY
    n = int(horizon / (interval + hold) * 1.5) + 16
    gaps = np.floor(rng.exponential(interval, size=n)).astype(np.int64)
    starts = np.cumsum(gaps + hold) - hold
    starts = starts[starts < horizon + NS_PER_S]
    return starts.astype(np.int64), (starts + hold).astype(np.int64)


def _check(config: ExperimentConfig) -> None:
    if config.backend is not Backend.SIM:
        raise ConfigError(f"config {config.id} is not a simulation config (backend={config.backend.value})")
    sch = config.scheduler
    if sch.policy is Policy.DEADLINE and sch.runtime_ns > sch.period_ns:
        raise ConfigError("CBS admission: runtime exceeds period")


def build_cores(config: ExperimentConfig, params: SimParams, phase: Phase) -> tuple[list[tuple[str, CoreInputs]], str]:
    """Return ``[(core_name, inputs), ...]`` and the name of the core running the task."""
    _check(config)
    phase = Phase(phase)
    P = config.cycle_period_ns
    n = int(round(config.phase_duration_s * NS_PER_S / P))
    horizon = n * P
    nbins = horizon // params.bin_ns + 2 + max(1, NS_PER_S // params.bin_ns)
    rngs = [np.random.default_rng(s) for s in _seed(config, params, phase).spawn(4)]
    arch = config.architecture
    attack = config.attack
    active = phase is Phase.ATTACK and attack.kind is not AttackKind.NONE
    tick_ns = NS_PER_S // params.tick_hz if params.tick_hz else 0
    stress_cores = set(config.stress.pinning) if config.stress.enabled else set()

    def linux_core(idx: int, rng) -> CoreInputs:
        return CoreInputs(
            napi_batch=params.napi_batch, ring_size=params.ring_size,
            tick_ns=tick_ns, tick_offset_ns=int(rng.integers(0, tick_ns)) if tick_ns else 0,
            cost_jitter=rng.integers(0, params.per_packet_jitter_ns + 1, size=4096, dtype=np.int64),
            local_stress=idx in stress_cores, horizon_ns=horizon,
            bin_ns=params.bin_ns, nbins=nbins, period_ns=P,
        )

    n_linux = arch.linux_cores
    cores = [linux_core(i, rngs[i]) for i in range(n_linux)]

    if active:
        if attack.kind is AttackKind.SYN_SCAN:
            rate, group, gap = params.scan_rate_pps, params.scan_burst, params.wire_gap_ns
            total = attack.n_ports
            soft = params.per_packet_softirq_ns
        else:
            rate = attack.rate_pps or params.packet_rate_pps
            group, gap, total = 1, 0, 1 << 60
            soft = params.arp_softirq_ns if attack.kind is AttackKind.ARP_FLOOD else params.per_packet_softirq_ns
        spill_rate = int(round(rate * params.spillover_fraction)) if n_linux > 1 else 0
        main_rate = rate - spill_rate
        main_total = total if spill_rate == 0 else int(round(total * main_rate / rate))
        c0 = cores[0]
        c0.hardirq_ns, c0.softirq_ns = params.per_packet_hardirq_ns, soft
        if attack.kind is AttackKind.SYN_SCAN:
            _set_scan_source(c0, rngs[0], main_rate, group, gap, horizon, main_total)
        else:
            _set_source(c0, rngs[0], params.arrival_model, main_rate, group, gap, horizon, main_total)
        if spill_rate:
            # steered packets only raise the interrupt here; protocol work stays on core 0
            c1 = cores[1]
            c1.hardirq_ns, c1.softirq_ns = params.per_packet_hardirq_ns, 0
            _set_source(c1, rngs[1], params.arrival_model, spill_rate, 1, 0, horizon, total - main_total)

    def attach_task(inp: CoreInputs, rng, linux: bool) -> None:
        inp.has_task = True
        inp.n_cycles = n
        inp.exec_ns = params.task_exec_ns
        if linux:
            jit = rng.integers(0, params.latency_jitter_ns + 1, size=n + 1, dtype=np.int64)
            inp.latency = params.sched_latency_ns + jit
        else:
            inp.latency = np.zeros(n + 1, dtype=np.int64)
        sch = config.scheduler
        if linux and sch.policy is Policy.DEADLINE:
            inp.deadline = True
            inp.dl_runtime_ns, inp.dl_deadline_ns, inp.dl_period_ns = sch.runtime_ns, sch.deadline_ns, sch.period_ns

    if arch is ArchitectureVariant.CO_PROCESSOR:
        mcu = CoreInputs(horizon_ns=horizon, bin_ns=params.bin_ns, nbins=nbins, period_ns=P, ring_size=1)
        attach_task(mcu, rngs[3], linux=False)
        named = [(f"cpu{i}", c) for i, c in enumerate(cores)] + [("mcu", mcu)]
        return named, "mcu"

    rt = cores[arch.rt_core]
    attach_task(rt, rngs[3], linux=True)
    if arch is ArchitectureVariant.DUAL_CORE_PINNED and 0 in stress_cores:
        # the hog pinned to core 0 contends for a kernel lock on the task's wakeup path
        rt.lock_start, rt.lock_end = _lock_sections(rngs[2], horizon, params.lock_hold_ns, params.lock_interval_ns)
    return [(f"cpu{i}", c) for i, c in enumerate(cores)], f"cpu{arch.rt_core}"


def simulate_phase_detailed(config: ExperimentConfig, params: SimParams, phase: Phase | str,
                            kernel=None) -> tuple[CycleSeries, list[CoreState]]:
    from . import get_kernel

    run_core = kernel or get_kernel()
    phase = Phase(phase)
    named, task_core = build_cores(config, params, phase)
    states: list[CoreState] = []
    series = None
    for name, inp in named:
        starts, end, bins, processed, dropped = run_core(inp)
        bins = np.asarray(bins, dtype=np.int64)
        states.append(CoreState(name, inp.bin_ns, int(end), bins, int(processed), int(dropped)))
        if name == task_core:
            starts = np.asarray(starts, dtype=np.int64)
            meta = {
                "backend": "sim",
                "code": config.code,
                "attack_kind": config.attack.kind.value,
                "stress": config.stress.enabled,
                "cycle_period_ns": config.cycle_period_ns,
                "rng_seed": params.rng_seed,
                "sim_params": params.to_dict(),
            }
            series = CycleSeries.from_starts(phase, config.id, int(starts[0]), starts[1:], int(end), meta)
    for st in states:
        series.meta.setdefault("packets", {})[st.core] = {
            "processed": st.packets_processed, "dropped": st.packets_dropped}
    return series, states


def simulate_phase(config: ExperimentConfig, params: SimParams | None = None,
                   phase: Phase | str = Phase.ATTACK) -> CycleSeries:
    """Simulate one measurement phase and return its cycle series."""
    return simulate_phase_detailed(config, params or SimParams(), phase)[0]


def cbs_state(sim) -> CbsState:
    """Snapshot the CBS server of a stepped ``CoreSim``."""
    return CbsState(sim.runtime, sim.deadline, sim.Pd)


def report_cpu_breakdown(core_states: list[CoreState], window_s: float = 1.0) -> dict[str, list[dict]]:
    """Per-window utilisation fractions per core: softirq, user, idle, system.

    ``system`` is hardirq time; ``user`` merges the RT task and normal-class work.
    A window longer than the run collapses to one aggregate window.
    """
    if window_s <= 0:
        raise ValueError("window_s must be positive")
    out: dict[str, list[dict]] = {}
    for st in core_states:
        per = max(1, int(round(window_s * NS_PER_S / st.bin_ns)))
        used = max(1, -(-st.end_time_ns // st.bin_ns))
        if per >= used:
            per = st.bins.shape[1]
        rows = []
        nb = st.bins.shape[1]
        for w0 in range(0, nb, per):
            chunk = st.bins[:, w0:w0 + per].sum(axis=1)
            total = int(chunk.sum())
            if total == 0:
                continue
            hard, soft, rt, norm, idle = (int(x) for x in chunk)
            rows.append({
                "t_start_s": w0 * st.bin_ns / NS_PER_S,
                "softirq": soft / total,
                "user": (rt + norm) / total,
                "idle": idle / total,
                "system": hard / total,
            })
        out[st.core] = rows
    return out
