import csv
import math

import numpy as np
import pytest

from oracles import naive_stats
from rtflood.analysis import (CycleStats, PhaseReport, ResultMatrix, build_result_matrix, compare_phases,
                              compute_stats, export_plot_data, histogram_bins)
from rtflood.errors import AnalysisError
from rtflood.model import CycleSeries, Phase

MS = 1_000_000


def series(periods, phase=Phase.ATTACK, cid="SF:syn_flood", **meta):
    periods = np.asarray(periods, dtype=np.int64)
    starts = np.cumsum(periods)
    meta = {"code": "SF", "attack_kind": "syn_flood", "stress": False, **meta}
    return CycleSeries.from_starts(phase, cid, 0, starts, int(starts[-1]) if len(starts) else 0, meta)


def check_against_oracle(periods, nominal=MS, theta=0.1):
    st = compute_stats(np.asarray(periods, dtype=np.int64), nominal, theta)
    ref = naive_stats(periods, nominal, theta)
    assert st.count == ref["count"]
    assert st.mean_ns == ref["mean_ns"]
    assert st.min_ns == ref["min_ns"] and st.max_ns == ref["max_ns"]
    assert st.stddev_ns == ref["stddev_ns"]
    for k in ("p50", "p99", "p99.9"):
        assert st.percentiles[k] == ref[k], k
    assert st.outlier_count_high == ref["outlier_count_high"]
    assert st.outlier_count_low == ref["outlier_count_low"]
    assert st.max_over_nominal_ratio == ref["max_over_nominal_ratio"]
    assert st.min_under_nominal_ratio == ref["min_under_nominal_ratio"]


def random_series_set(count, seed=2024, max_len=100_000):
    rng = np.random.default_rng(seed)
    for _ in range(count):
        n = int(np.exp(rng.uniform(0, math.log(max_len + 1))))
        n = min(max(n, 1), max_len)
        kind = rng.integers(3)
        if kind == 0:
            p = rng.integers(1, 60 * MS, n)
        elif kind == 1:
            # mostly nominal with sparse outliers both ways, many ties
            p = np.full(n, MS, dtype=np.int64) + rng.integers(-8_000, 8_000, n)
            idx = rng.integers(0, n, max(1, n // 100))
            p[idx] = rng.integers(1_000, 30 * MS, len(idx))
        else:
            p = rng.integers(MS - 3, MS + 3, n)
        yield p.astype(np.int64)


class TestComputeStats:
    def test_constant_series(self):
        st = compute_stats(series([MS] * 1000))
        assert st.mean_ns == st.min_ns == st.max_ns == MS
        assert st.stddev_ns == 0
        assert st.outlier_count_high == st.outlier_count_low == 0
        assert st.percentiles == {"p50": MS, "p99": MS, "p99.9": MS}

    def test_injected_single_core_outlier(self):
        p = [MS] * 9998 + [27_852_000, 100_000]
        st = compute_stats(series(p), MS, 0.1)
        assert st.max_over_nominal_ratio == pytest.approx(27.852)
        assert st.outlier_count_high == 1
        assert st.outlier_count_low == 1
        # frozen from the oracle
        assert st.mean_ns == 1002595.2
        assert st.stddev_ns == 268658.25008169765
        assert st.min_under_nominal_ratio == 10.0
        assert st.jitter_pct == pytest.approx(2685.2)

    def test_small_hand_example(self):
        st = compute_stats(np.array([5, 1, 4, 2, 3]), nominal_ns=3, theta=0.5)
        assert st.percentiles == {"p50": 3, "p99": 5, "p99.9": 5}
        assert (st.outlier_count_high, st.outlier_count_low) == (1, 1)
        assert st.mean_ns == 3.0
        assert st.stddev_ns == math.sqrt(2)

    def test_single_record(self):
        st = compute_stats(np.array([1_234_567]))
        assert st.count == 1 and st.stddev_ns == 0
        assert set(st.percentiles.values()) == {1_234_567}

    def test_ten_thousand_uniform_matches_oracle(self):
        rng = np.random.default_rng(11)
        check_against_oracle(rng.integers(500_000, 1_500_000, 10_000))

    def test_oracle_equivalence_random_lengths(self):
        for p in random_series_set(150, seed=5, max_len=20_000):
            check_against_oracle(p)

    def test_ordering_invariant(self):
        for p in random_series_set(50, seed=9, max_len=5_000):
            st = compute_stats(p)
            pc = st.percentiles
            assert st.min_ns <= pc["p50"] <= pc["p99"] <= pc["p99.9"] <= st.max_ns
            assert st.count == len(p)

    def test_empty_series_rejected(self):
        with pytest.raises(AnalysisError, match="empty"):
            compute_stats(np.array([], dtype=np.int64))

    @pytest.mark.parametrize("theta", [0.0, 1.0, -0.1, 2.0])
    def test_theta_range(self, theta):
        with pytest.raises(AnalysisError):
            compute_stats(np.array([MS]), theta=theta)

    def test_roundtrip_dict(self):
        st = compute_stats(np.array([MS, 2 * MS, MS // 2]))
        assert CycleStats.from_dict(st.to_dict()) == st


class TestComparePhases:
    def test_identical_phases(self):
        p = [MS] * 500
        rep = compare_phases(series(p, Phase.IDLE_PRE), series(p), series(p, Phase.IDLE_POST))
        assert rep.persistence
        assert rep.max_ratio_delta == 0
        assert rep.outlier_count_delta == 0

    def test_attack_outlier(self):
        clean = [MS] * 1000
        att = [MS] * 998 + [3_400_000, 1_000]
        rep = compare_phases(series(clean, Phase.IDLE_PRE), series(att), series(clean, Phase.IDLE_POST))
        assert rep.persistence
        assert rep.attack_max_ratio == pytest.approx(3.4)
        assert rep.outlier_count_delta == 2
        assert rep.attack_max_ns == 3_400_000 and rep.idle_max_ns == MS

    def test_sustained_post_disturbance(self):
        clean = [MS] * 1000
        rep = compare_phases(series(clean, Phase.IDLE_PRE), series(clean), series([2 * MS] * 1000, Phase.IDLE_POST))
        assert not rep.persistence

    def test_tolerance_boundary(self):
        pre = series([MS] * 10, Phase.IDLE_PRE)
        post_ok = series([MS] * 9 + [MS + 50_000], Phase.IDLE_POST)
        post_bad = series([MS] * 9 + [MS + 50_001], Phase.IDLE_POST)
        att = series([MS] * 10)
        assert compare_phases(pre, att, post_ok, tolerance=0.05).persistence
        assert not compare_phases(pre, att, post_bad, tolerance=0.05).persistence

    def test_mismatched_ids(self):
        with pytest.raises(AnalysisError, match="different configs"):
            compare_phases(series([MS], Phase.IDLE_PRE), series([MS], cid="other"), series([MS], Phase.IDLE_POST))

    def test_report_roundtrip(self):
        p = [MS] * 10
        rep = compare_phases(series(p, Phase.IDLE_PRE), series(p), series(p, Phase.IDLE_POST))
        assert PhaseReport.from_dict(rep.to_dict()) == rep


def make_report(code, attack, idle_max, attack_max, stress=False, complete=True):
    cid = f"{code}:{attack}" + (":stress" if stress else "")
    meta = {"code": code, "attack_kind": attack, "stress": stress}
    pre = series([MS, idle_max], Phase.IDLE_PRE, cid, **meta)
    att = series([MS, attack_max], Phase.ATTACK, cid, **meta)
    post = series([MS, MS], Phase.IDLE_POST, cid, **meta)
    rep = compare_phases(pre, att, post)
    rep.complete = complete
    return rep


class TestResultMatrix:
    def test_full_shape_and_order(self):
        runs = [make_report(c, a, MS + 8_000, MS * (30 if c == "SD" else 1))
                for a in ("syn_flood", "arp_flood", "syn_scan")
                for c in ("SF", "SR", "SD", "DF", "DR", "DD", "C")]
        m = build_result_matrix(runs)
        assert m.rows == ["SD", "SF", "SR", "DD", "DF", "DR", "C"]
        assert m.columns == ["Idle", "SYN flooding", "ARP flooding", "Nmap"]
        assert m.shape == (7, 4)
        assert m.get("SD", "Nmap") == 30 * MS
        assert m.get("C", "Idle") == MS + 8_000

    def test_idle_is_worst_over_runs(self):
        runs = [make_report("SF", "syn_flood", MS + 5, 3 * MS), make_report("SF", "arp_flood", MS + 9, 3 * MS)]
        assert build_result_matrix(runs).get("SF", "Idle") == MS + 9

    def test_degenerate(self):
        m = build_result_matrix([make_report("DD", "syn_flood", MS, MS)])
        assert m.shape == (1, 2)

    def test_errors(self):
        with pytest.raises(AnalysisError):
            build_result_matrix([])
        r = make_report("SF", "syn_flood", MS, MS)
        with pytest.raises(AnalysisError, match="duplicate"):
            build_result_matrix([r, r])
        with pytest.raises(AnalysisError, match="stress"):
            build_result_matrix([r, make_report("SF", "arp_flood", MS, MS, stress=True)])

    def test_missing_run_cell(self):
        runs = [make_report("SF", "syn_flood", MS, 3 * MS), make_report("SD", "syn_flood", MS, 3 * MS, complete=False)]
        m = build_result_matrix(runs)
        assert m.get("SD", "SYN flooding") is None
        assert "-" in m.to_text()

    def test_csv_lossless(self):
        runs = [make_report(c, "syn_flood", MS + i, (i + 1) * MS) for i, c in enumerate(("SF", "DD", "C"))]
        runs.append(make_report("SD", "syn_flood", MS, MS, complete=False))
        m = build_result_matrix(runs, "t")
        back = ResultMatrix.from_csv(m.to_csv(), "t")
        assert back == m
        assert back.to_csv() == m.to_csv()

    def test_text_rendering(self):
        m = build_result_matrix([make_report("SD", "syn_flood", 1_008_000, 27_852_000)], "Max")
        txt = m.to_text()
        assert "27.852 ms" in txt and "1.008 ms" in txt and txt.startswith("Max")

    def test_from_csv_rejects_garbage(self):
        with pytest.raises(AnalysisError):
            ResultMatrix.from_csv("a,b\n1,2\n")


class TestPlots:
    def test_histogram_constant_single_bin(self, tmp_path):
        edges, counts = histogram_bins(np.full(100, MS))
        assert np.count_nonzero(counts) == 1 and counts.sum() == 100
        paths = export_plot_data(series([MS] * 100), "histogram", tmp_path / "h")
        rows = list(csv.reader(paths["csv"].open()))
        assert rows[0] == ["bin_lo_ns", "bin_hi_ns", "count"]
        assert sum(int(r[2]) > 0 for r in rows[1:]) == 1
        assert paths["svg"].read_text().lstrip().startswith("<?xml")

    def test_histogram_counts_everything(self):
        rng = np.random.default_rng(3)
        p = rng.integers(10_000, 40 * MS, 5000)
        edges, counts = histogram_bins(p)
        assert counts.sum() == 5000
        assert edges[0] <= p.min() and edges[-1] > p.max()

    def test_scatter_columns(self, tmp_path):
        s = series([MS, 3 * MS, MS // 2, MS])
        paths = export_plot_data(s, "scatter", tmp_path / "s", svg=False)
        rows = list(csv.reader(paths["csv"].open()))
        assert rows[0] == ["time_s", "period_ms"]
        t = [float(r[0]) for r in rows[1:]]
        assert all(b > a for a, b in zip(t, t[1:]))
        assert "svg" not in paths

    def test_cpu_breakdown_mode(self, tmp_path):
        data = {"cpu0": [{"t_start_s": 0.0, "softirq": 0.95, "user": 0.0, "idle": 0.0, "system": 0.05}]}
        paths = export_plot_data(data, "cpu_breakdown", tmp_path / "c")
        rows = list(csv.reader(paths["csv"].open()))
        assert rows[0] == ["core", "t_start_s", "softirq", "user", "idle", "system"]
        assert float(rows[1][2]) == pytest.approx(95.0)

    def test_unknown_mode(self, tmp_path):
        with pytest.raises(AnalysisError, match="unknown plot mode"):
            export_plot_data(series([MS]), "pie", tmp_path / "x")
