"""Plot-ready columnar exports (CSV) with an SVG rendering next to each."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

from ..errors import AnalysisError
from ..model import CycleSeries

MODES = ("scatter", "histogram", "cpu_breakdown")
BREAKDOWN_CLASSES = ("softirq", "user", "idle", "system")


def histogram_bins(periods: np.ndarray, n_bins: int = 60) -> tuple[np.ndarray, np.ndarray]:
    """Log-spaced integer bin edges spanning the data; returns ``(edges, counts)``."""
    lo, hi = int(periods.min()), int(periods.max())
    if lo == hi:
        edges = np.array([lo, lo + 1], dtype=np.int64)
    else:
        edges = np.unique(np.round(np.geomspace(max(lo, 1), hi + 1, n_bins + 1)).astype(np.int64))
        edges[0] = min(edges[0], lo)
        edges[-1] = max(edges[-1], hi + 1)
    counts, _ = np.histogram(periods, bins=edges)
    return edges, counts


def _columns(data, mode: str) -> tuple[list[str], list[list]]:
    if mode == "scatter":
        if not isinstance(data, CycleSeries) or len(data) == 0:
            raise AnalysisError("scatter export needs a non-empty CycleSeries")
        t0 = int(data.start_time_ns[0]) - int(data.period_ns[0])
        t = (data.start_time_ns - t0) / 1e9
        return ["time_s", "period_ms"], [t.tolist(), (data.period_ns / 1e6).tolist()]
    if mode == "histogram":
        if not isinstance(data, CycleSeries) or len(data) == 0:
            raise AnalysisError("histogram export needs a non-empty CycleSeries")
        edges, counts = histogram_bins(data.period_ns)
        return ["bin_lo_ns", "bin_hi_ns", "count"], [edges[:-1].tolist(), edges[1:].tolist(), counts.tolist()]
    if mode == "cpu_breakdown":
        if not isinstance(data, dict) or not data:
            raise AnalysisError("cpu_breakdown export needs a per-core breakdown mapping")
        cols = {k: [] for k in ("core", "t_start_s") + BREAKDOWN_CLASSES}
        for core, rows in data.items():
            for r in rows:
                cols["core"].append(core)
                cols["t_start_s"].append(r["t_start_s"])
                for k in BREAKDOWN_CLASSES:
                    cols[k].append(r[k] * 100.0)
        return list(cols), list(cols.values())
    raise AnalysisError(f"unknown plot mode {mode!r}; expected one of {', '.join(MODES)}")


def _render(names, cols, mode: str, path: Path, title: str) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, ax = plt.subplots(figsize=(7, 3.5))
    if mode == "scatter":
        ax.scatter(cols[0], cols[1], s=2)
        ax.set_xlabel("time [s]")
        ax.set_ylabel("cycle time [ms]")
    elif mode == "histogram":
        lo, hi, cnt = (np.asarray(c) for c in cols)
        ax.bar(lo / 1e6, cnt, width=(hi - lo) / 1e6, align="edge")
        ax.set_xscale("log")
        ax.set_yscale("log")
        ax.set_xlabel("cycle time [ms]")
        ax.set_ylabel("cycles")
    else:
        cores = sorted(set(cols[0]))
        core0 = np.asarray(cols[0]) == cores[0]
        t = np.asarray(cols[1])[core0]
        for name, c in zip(names[2:], cols[2:]):
            ax.plot(t, np.asarray(c)[core0], label=name)
        ax.set_ylim(0, 105)
        ax.set_xlabel("time [s]")
        ax.set_ylabel(f"{cores[0]} load [%]")
        ax.legend(loc="best", fontsize="small")
    if title:
        ax.set_title(title)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)


def export_plot_data(data, mode: str, out: str | Path, svg: bool = True, title: str = "") -> dict:
    """Write ``<out>.csv`` (and ``<out>.svg``); returns the written paths.

    ``data`` is a CycleSeries for ``scatter``/``histogram`` and the mapping
    from ``report_cpu_breakdown`` for ``cpu_breakdown``.
    """
    names, cols = _columns(data, mode)
    out = Path(out)
    out.parent.mkdir(parents=True, exist_ok=True)
    csv_path = out.with_suffix(".csv")
    with csv_path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(names)
        w.writerows(zip(*cols))
    paths = {"csv": csv_path}
    if svg:
        svg_path = out.with_suffix(".svg")
        _render(names, cols, mode, svg_path, title)
        paths["svg"] = svg_path
    return paths
