"""Per-phase cycle statistics and pre/attack/post comparison."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from fractions import Fraction

import numpy as np

from ..errors import AnalysisError
from ..model import DEFAULT_PERIOD_NS, CycleSeries, Phase

DEFAULT_THETA = 0.10
DEFAULT_TOLERANCE = 0.05
PERCENTILES = ((50, 100), (99, 100), (999, 1000))  # as exact fractions
PCT_NAMES = ("p50", "p99", "p99.9")


@dataclass(frozen=True)
class CycleStats:
    count: int
    mean_ns: float
    min_ns: int
    max_ns: int
    stddev_ns: float
    percentiles: dict
    outlier_count_high: int
    outlier_count_low: int
    max_over_nominal_ratio: float
    # how many times shorter than nominal the shortest cycle is (nominal / min)
    min_under_nominal_ratio: float
    nominal_ns: int = DEFAULT_PERIOD_NS
    theta: float = DEFAULT_THETA

    @property
    def jitter_pct(self) -> float:
        """Worst lateness in percent of the nominal period."""
        return (self.max_over_nominal_ratio - 1.0) * 100.0

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> CycleStats:
        return cls(**d)


def nearest_rank(sorted_values, num: int, den: int) -> int:
    """Nearest-rank percentile ``num/den`` of an ascending sequence."""
    n = len(sorted_values)
    rank = max(1, -(-num * n // den))
    return int(sorted_values[rank - 1])


def compute_stats(series: CycleSeries | np.ndarray, nominal_ns: int = DEFAULT_PERIOD_NS,
                  theta: float = DEFAULT_THETA) -> CycleStats:
    """Exact statistics over ``period_ns``.

    Moments are accumulated in Python integers, so the mean and the
    population standard deviation are the correctly rounded values of the
    exact rationals.
    """
    periods = series.period_ns if isinstance(series, CycleSeries) else np.asarray(series, dtype=np.int64)
    n = len(periods)
    if n == 0:
        raise AnalysisError("cannot compute statistics of an empty series")
    if not 0.0 < theta < 1.0:
        raise AnalysisError(f"theta must lie in (0, 1), got {theta}")
    if nominal_ns <= 0:
        raise AnalysisError("nominal period must be positive")
    srt = np.sort(periods, kind="stable")
    vals = periods.tolist()
    s1 = sum(vals)
    s2 = sum(v * v for v in vals)
    var = Fraction(n * s2 - s1 * s1, n * n)
    lo, hi = int(srt[0]), int(srt[-1])
    high_thr = (1.0 + theta) * nominal_ns
    low_thr = (1.0 - theta) * nominal_ns
    return CycleStats(
        count=n,
        mean_ns=s1 / n,
        min_ns=lo,
        max_ns=hi,
        stddev_ns=math.sqrt(float(var)),
        percentiles={name: nearest_rank(srt, a, b) for name, (a, b) in zip(PCT_NAMES, PERCENTILES)},
        outlier_count_high=int(np.count_nonzero(periods > high_thr)),
        outlier_count_low=int(np.count_nonzero(periods < low_thr)),
        max_over_nominal_ratio=hi / nominal_ns,
        min_under_nominal_ratio=nominal_ns / lo if lo > 0 else math.inf,
        nominal_ns=int(nominal_ns),
        theta=float(theta),
    )


@dataclass
class PhaseReport:
    """Statistics of the three phases of one run."""

    config_id: str
    stats: dict  # Phase -> CycleStats
    persistence: bool  # post-attack idle matches pre-attack idle within tolerance
    tolerance: float
    attack_max_ratio: float
    max_ratio_delta: float
    outlier_count_delta: int
    code: str = ""
    attack: str = "none"
    stress: bool = False
    complete: bool = True
    meta: dict = field(default_factory=dict)

    @property
    def idle_max_ns(self) -> int:
        return max(self.stats[Phase.IDLE_PRE].max_ns, self.stats[Phase.IDLE_POST].max_ns)

    @property
    def attack_max_ns(self) -> int:
        return self.stats[Phase.ATTACK].max_ns

    def to_dict(self) -> dict:
        d = asdict(self)
        d["stats"] = {ph.value: st.to_dict() for ph, st in self.stats.items()}
        return d

    @classmethod
    def from_dict(cls, d: dict) -> PhaseReport:
        d = dict(d)
        d["stats"] = {Phase(k): CycleStats.from_dict(v) for k, v in d["stats"].items()}
        return cls(**d)


def compare_phases(pre: CycleSeries, attack: CycleSeries, post: CycleSeries,
                   tolerance: float = DEFAULT_TOLERANCE, nominal_ns: int | None = None,
                   theta: float = DEFAULT_THETA) -> PhaseReport:
    ids = {pre.config_id, attack.config_id, post.config_id}
    if len(ids) != 1:
        raise AnalysisError(f"phases belong to different configs: {sorted(ids)}")
    if tolerance < 0:
        raise AnalysisError("tolerance must be >= 0")
    if nominal_ns is None:
        nominal_ns = int(attack.meta.get("cycle_period_ns", DEFAULT_PERIOD_NS))
    stats = {
        Phase.IDLE_PRE: compute_stats(pre, nominal_ns, theta),
        Phase.ATTACK: compute_stats(attack, nominal_ns, theta),
        Phase.IDLE_POST: compute_stats(post, nominal_ns, theta),
    }
    s_pre, s_att, s_post = stats[Phase.IDLE_PRE], stats[Phase.ATTACK], stats[Phase.IDLE_POST]
    idle_ratio = max(s_pre.max_over_nominal_ratio, s_post.max_over_nominal_ratio)
    idle_outliers = max(s_pre.outlier_count_high + s_pre.outlier_count_low,
                        s_post.outlier_count_high + s_post.outlier_count_low)
    meta = attack.meta
    return PhaseReport(
        config_id=attack.config_id,
        stats=stats,
        persistence=abs(s_post.max_ns - s_pre.max_ns) <= tolerance * nominal_ns,
        tolerance=float(tolerance),
        attack_max_ratio=s_att.max_over_nominal_ratio,
        max_ratio_delta=s_att.max_over_nominal_ratio - idle_ratio,
        outlier_count_delta=s_att.outlier_count_high + s_att.outlier_count_low - idle_outliers,
        code=str(meta.get("code", "")),
        attack=str(meta.get("attack_kind", "none")),
        stress=bool(meta.get("stress", False)),
        complete=all(not s.meta.get("incomplete", False) for s in (pre, attack, post)),
    )
