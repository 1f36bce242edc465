"""Three-phase measurement procedures, matrices over many configs, and re-analysis."""

from __future__ import annotations

import json
import logging
import os
import platform
import threading
import time
from dataclasses import dataclass, field, replace
from datetime import datetime, timezone
from pathlib import Path

from .analysis import PhaseReport, ResultMatrix, build_result_matrix, compare_phases
from .errors import AnalysisError, BenchError, ConfigError
from .model import PHASES, AttackKind, Backend, CycleSeries, ExperimentConfig, Phase
from .sim import SimParams, kernel_name, simulate_phase

log = logging.getLogger(__name__)

ARTIFACT_ENV = "RTFLOOD_ARTIFACTS"
# generators start this long before the attack window and stop this long after
ATTACK_MARGIN_S = 1.0
TITLES = {False: "Maximum cycle time, without additional CPU load",
          True: "Maximum cycle time, with additional CPU load"}


def artifact_root() -> Path:
    return Path(os.environ.get(ARTIFACT_ENV, "artifacts"))


def _now_iso() -> str:
    return datetime.now(timezone.utc).isoformat(timespec="microseconds")


def host_info() -> dict:
    return {"hostname": platform.node(), "kernel": platform.release(), "machine": platform.machine(),
            "python": platform.python_version(), "cores": os.cpu_count()}


@dataclass
class ProcedurePlan:
    """Phase order and durations for one config.

    ``scale_factor`` shrinks phases and gaps proportionally.  Scan phases are
    kept at their configured length: the scan itself needs seconds to cover
    the port range, so a shorter window would cut it off.
    """

    config: ExperimentConfig
    scale_factor: float = 1.0
    phases: tuple = PHASES

    def __post_init__(self):
        if not self.scale_factor > 0:
            raise ConfigError("scale factor must be positive")

    @property
    def phase_s(self) -> float:
        if self.config.attack.kind is AttackKind.SYN_SCAN:
            return self.config.phase_duration_s
        return self.config.phase_duration_s * self.scale_factor

    @property
    def gap_s(self) -> float:
        return self.config.gap_s * self.scale_factor

    def scaled_config(self) -> ExperimentConfig:
        return replace(self.config, phase_duration_s=self.phase_s, gap_s=self.gap_s)


def run_dir_name(config_id: str) -> str:
    return config_id.replace(":", "__").replace("/", "_")


def _write_json(path: Path, obj) -> None:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")


class _Generator:
    """Attack generator running in a thread for the real backend."""

    def __init__(self, config: ExperimentConfig, window_s: float):
        from . import attack as atk

        a = config.attack
        self.stop_evt = threading.Event()
        self.result = None
        self.error = None
        if a.kind is AttackKind.SYN_FLOOD:
            self._fn = lambda: atk.syn_flood(a.target, a.rate_pps, window_s, stop=self.stop_evt)
        elif a.kind is AttackKind.ARP_FLOOD:
            self._fn = lambda: atk.arp_flood(a.interface, a.target, a.rate_pps, window_s, stop=self.stop_evt)
        elif a.kind is AttackKind.SYN_SCAN:
            self._fn = lambda: atk.syn_scan(a.target, a.port_range)
        else:
            self._fn = None
        self._thread = threading.Thread(target=self._run, name="attack", daemon=True)

    def _run(self):
        try:
            self.result = self._fn()
        except BaseException as e:
            self.error = e

    def start(self):
        if self._fn is not None:
            self._thread.start()

    def stop(self):
        if self._fn is None:
            return None
        self.stop_evt.set()
        self._thread.join()
        if self.error is not None:
            raise self.error
        return self.result


def _run_phase_real(config: ExperimentConfig, phase: Phase, plan: ProcedurePlan, events: list):
    from .rtagent import run_cycle_loop

    gen = None
    if phase is Phase.ATTACK and config.attack.kind is not AttackKind.NONE:
        gen = _Generator(config, plan.phase_s + 2 * ATTACK_MARGIN_S)
        gen.start()
        events.append({"event": "generator_start", "t": _now_iso()})
        time.sleep(ATTACK_MARGIN_S)
    try:
        series = run_cycle_loop(config, plan.phase_s, phase)
    finally:
        if gen is not None:
            time.sleep(ATTACK_MARGIN_S)
            telemetry = gen.stop()
            events.append({"event": "generator_stop", "t": _now_iso()})
    if gen is not None and telemetry is not None:
        series.meta["attack_telemetry"] = telemetry.to_dict()
    return series


def run_procedure(plan: ProcedurePlan, out_dir: str | Path | None = None,
                  params: SimParams | None = None) -> PhaseReport:
    """Run idle-pre, attack and idle-post for one config and persist everything.

    On a failure the artifacts written so far stay on disk and ``run.json``
    is marked incomplete before the error propagates.
    """
    config = plan.scaled_config()
    params = params or SimParams()
    out = Path(out_dir) if out_dir is not None else artifact_root() / run_dir_name(config.id)
    out.mkdir(parents=True, exist_ok=True)
    run_meta = {"config": config.to_dict(), "scale_factor": plan.scale_factor, "backend": config.backend.value,
                "host": host_info(), "started": _now_iso(), "status": "running", "events": [],
                "t_start_ns": time.monotonic_ns()}
    if config.backend is Backend.SIM:
        run_meta["sim_params"] = params.to_dict()
        run_meta["sim_kernel"] = kernel_name()
    _write_json(out / "run.json", run_meta)
    stress = None
    series: dict[Phase, CycleSeries] = {}
    try:
        if config.backend is Backend.REAL:
            from .rtagent import check_privileges

            check_privileges(config)  # before any phase starts
            if config.stress.enabled:
                from .attack import StressWorkers

                stress = StressWorkers(config.stress.workers, config.stress.pinning).start()
        for i, phase in enumerate(plan.phases):
            if i and config.backend is Backend.REAL:
                time.sleep(plan.gap_s)
            run_meta["events"].append({"event": f"{phase.value}_start", "t": _now_iso()})
            if config.backend is Backend.SIM:
                s = simulate_phase(config, params, phase)
            else:
                s = _run_phase_real(config, phase, plan, run_meta["events"])
            s.meta["started"] = run_meta["events"][-1]["t"]
            s.save(out / f"{phase.value}.jsonl")
            series[phase] = s
            run_meta["events"].append({"event": f"{phase.value}_end", "t": _now_iso()})
    except BaseException as e:
        run_meta["status"] = "incomplete"
        run_meta["error"] = f"{type(e).__name__}: {e}"
        raise
    finally:
        if stress is not None:
            run_meta["stress_report"] = stress.stop().to_dict()
        run_meta["finished"] = _now_iso()
        run_meta["t_end_ns"] = time.monotonic_ns()
        if run_meta["status"] == "running":
            run_meta["status"] = "complete"
        _write_json(out / "run.json", run_meta)
    report = compare_phases(*(series[p] for p in PHASES), nominal_ns=config.cycle_period_ns)
    _write_json(out / "report.json", report.to_dict())
    return report


def _failed_report(config: ExperimentConfig, error: str) -> PhaseReport:
    return PhaseReport(config.id, {}, False, 0.0, 0.0, 0.0, 0, code=config.code,
                       attack=config.attack.kind.value, stress=config.stress.enabled, complete=False,
                       meta={"error": error})


@dataclass
class MatrixResult:
    matrices: dict  # stress flag -> ResultMatrix
    reports: list[PhaseReport]
    out_dir: Path
    runs: list[dict] = field(default_factory=list)

    def render(self) -> str:
        return "\n".join(self.matrices[k].to_text() for k in sorted(self.matrices))


def build_matrices(reports: list[PhaseReport]) -> dict:
    groups: dict = {}
    for r in reports:
        groups.setdefault(r.stress, []).append(r)
    return {k: build_result_matrix(v, TITLES[k]) for k, v in sorted(groups.items())}


def _write_matrices(out: Path, matrices: dict) -> None:
    for stress, m in matrices.items():
        stem = "matrix_stress" if stress else "matrix_idle_load"
        (out / f"{stem}.csv").write_text(m.to_csv())
        (out / f"{stem}.txt").write_text(m.to_text())


def run_matrix(configs: list[ExperimentConfig], backend: Backend | str | None = None, scale: float = 1.0,
               out_dir: str | Path | None = None, params: SimParams | None = None,
               progress=None) -> MatrixResult:
    """Run every config's procedure one after another, then tabulate.

    A failing run is recorded and leaves its cells empty; the others continue.
    """
    if not configs:
        raise ConfigError("no configs to run")
    if backend is not None:
        configs = [replace(c, backend=Backend(backend)) for c in configs]
    out = Path(out_dir) if out_dir is not None else artifact_root() / datetime.now().strftime("%Y%m%d-%H%M%S")
    out.mkdir(parents=True, exist_ok=True)
    reports, runs = [], []
    for cfg in configs:
        t0 = time.monotonic_ns()
        entry = {"config_id": cfg.id, "dir": run_dir_name(cfg.id), "t_start_ns": t0}
        try:
            rep = run_procedure(ProcedurePlan(cfg, scale), out / run_dir_name(cfg.id), params)
            entry["status"] = "complete"
        except BenchError as e:
            log.error("run %s failed: %s", cfg.id, e)
            rep = _failed_report(cfg, str(e))
            entry["status"] = "failed"
            entry["error"] = str(e)
        entry["t_end_ns"] = time.monotonic_ns()
        reports.append(rep)
        runs.append(entry)
        if progress is not None:
            progress(cfg, rep)
    matrices = build_matrices(reports)
    _write_matrices(out, matrices)
    _write_json(out / "matrix.json", {"scale": scale, "runs": runs, "created": _now_iso()})
    return MatrixResult(matrices, reports, out, runs)


def analyze_dir(path: str | Path) -> MatrixResult:
    """Recompute reports and matrices purely from the persisted series files."""
    root = Path(path)
    if not root.is_dir():
        raise ConfigError(f"no such artifact directory: {root}")
    run_dirs = sorted(p.parent for p in root.glob("*/run.json"))
    if (root / "run.json").exists():
        run_dirs = [root]
    if not run_dirs:
        raise AnalysisError(f"no runs found under {root}")
    reports = []
    for d in run_dirs:
        meta = json.loads((d / "run.json").read_text())
        cfg = ExperimentConfig.from_dict(meta["config"])
        files = [d / f"{p.value}.jsonl" for p in PHASES]
        if meta.get("status") != "complete" or not all(f.exists() for f in files):
            reports.append(_failed_report(cfg, meta.get("error", "incomplete artifacts")))
            continue
        series = [CycleSeries.load(f) for f in files]
        reports.append(compare_phases(*series, nominal_ns=cfg.cycle_period_ns))
    index = root / "matrix.json"
    if index.exists():
        order = [r["config_id"] for r in json.loads(index.read_text())["runs"]]
        reports.sort(key=lambda r: order.index(r.config_id) if r.config_id in order else len(order))
    return MatrixResult(build_matrices(reports), reports, root)


def stored_matrices(path: str | Path) -> dict:
    root = Path(path)
    out = {}
    for stress, stem in ((False, "matrix_idle_load"), (True, "matrix_stress")):
        f = root / f"{stem}.csv"
        if f.exists():
            out[stress] = ResultMatrix.from_csv(f.read_text(), TITLES[stress])
    return out
