"""Reference maxima the default parameters were tuned against, and a comparison table.

The targets are worst-case start-to-start periods in milliseconds observed on
a dual-core ARM board at 1 ms nominal cycle (100 000 pps floods, one full
nmap-style scan).  ``None`` marks combinations without a published figure.
"""

from __future__ import annotations

from ..model import Phase, canonical_config
from .engine import simulate_phase
from .params import SimParams

COLUMNS = ("idle", "syn_flood", "arp_flood", "syn_scan")

TARGETS_MS: dict[tuple[str, bool], tuple] = {
    ("SD", False): (1.008, 27.852, 25.685, 21.678),
    ("SF", False): (1.013, 3.438, 3.331, 2.560),
    ("SR", False): (1.008, 4.213, 3.200, 2.603),
    ("DD", False): (1.007, 1.008, 1.011, 1.005),
    ("DF", False): (1.005, 1.006, 1.007, 1.005),
    ("DR", False): (1.006, 1.006, 1.010, 1.005),
    ("C", False): (1.000, 1.000, 1.000, 1.000),
    ("SD", True): (1.018, 30.681, 69.619, 22.143),
    ("SF", True): (1.014, 4.282, 21.389, 2.661),
    ("SR", True): (1.014, 4.438, 21.697, 2.769),
    ("DD", True): (2.043, 2.016, 2.022, 2.027),
    ("DF", True): (1.039, 1.111, 1.113, 1.070),
    ("DR", True): (1.052, 1.122, 1.130, 1.082),
    ("C", True): (1.000, 1.000, 1.000, 1.000),
}


def simulated_maxima(code: str, stress: bool, params: SimParams, phase_s: float) -> tuple[float, ...]:
    """Idle and per-attack max period in ms for one test case."""
    idle = simulate_phase(canonical_config(code, "none", stress, phase_s), params, Phase.IDLE_PRE)
    out = [idle.period_ns.max() / 1e6]
    for atk in COLUMNS[1:]:
        s = simulate_phase(canonical_config(code, atk, stress, phase_s), params, Phase.ATTACK)
        out.append(s.period_ns.max() / 1e6)
    return tuple(out)


def calibration_table(params: SimParams | None = None, codes=("SF", "SD", "DF", "DD", "C"),
                      phase_s: float = 5.0) -> str:
    params = params or SimParams()
    lines = [f"{'case':10s}" + "".join(f"{c:>22s}" for c in COLUMNS),
             f"{'':10s}" + "".join(f"{'sim / target ms':>22s}" for _ in COLUMNS)]
    for stress in (False, True):
        for code in codes:
            sim = simulated_maxima(code, stress, params, phase_s)
            target = TARGETS_MS.get((code, stress), (None,) * len(COLUMNS))
            cells = [f"{s:9.3f} / " + (f"{t:7.3f}" if t is not None else "      -") for s, t in zip(sim, target)]
            lines.append(f"{code + ('+stress' if stress else ''):10s}" + "".join(f"{c:>22s}" for c in cells))
    return "\n".join(lines)
