"""Statistics, phase comparison, result matrices and plot exports."""

from .matrix import ATTACK_COLUMNS, IDLE, ResultMatrix, build_result_matrix
from .plots import MODES, export_plot_data, histogram_bins
from .stats import (DEFAULT_THETA, DEFAULT_TOLERANCE, CycleStats, PhaseReport, compare_phases,
                    compute_stats, nearest_rank)

__all__ = [
    "ATTACK_COLUMNS", "CycleStats", "DEFAULT_THETA", "DEFAULT_TOLERANCE", "IDLE", "MODES", "PhaseReport",
    "ResultMatrix", "build_result_matrix", "compare_phases", "compute_stats", "export_plot_data",
    "histogram_bins", "nearest_rank",
]
