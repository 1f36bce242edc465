"""Max-cycle-time matrices: one row per test case, Idle plus one column per attack."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field

from ..errors import AnalysisError
from ..model import TABLE_ROW_ORDER, AttackKind
from .stats import PhaseReport

IDLE = "Idle"
ATTACK_COLUMNS = (AttackKind.SYN_FLOOD, AttackKind.ARP_FLOOD, AttackKind.SYN_SCAN)


def _row_key(code: str):
    return (TABLE_ROW_ORDER.index(code), code) if code in TABLE_ROW_ORDER else (len(TABLE_ROW_ORDER), code)


@dataclass
class ResultMatrix:
    """Cells hold the maximum cycle time in ns; ``None`` marks a missing run."""

    rows: list[str]
    columns: list[str]
    cells: dict = field(default_factory=dict)  # (row, column) -> int | None
    title: str = ""

    def __eq__(self, other) -> bool:
        if not isinstance(other, ResultMatrix):
            return NotImplemented
        return (self.rows == other.rows and self.columns == other.columns
                and all(self.get(r, c) == other.get(r, c) for r in self.rows for c in self.columns))

    def get(self, row: str, column: str):
        return self.cells.get((row, column))

    @property
    def shape(self) -> tuple[int, int]:
        return len(self.rows), len(self.columns)

    def to_text(self, unit: str = "ms") -> str:
        scale = {"ms": 1e6, "us": 1e3, "ns": 1}[unit]
        head = ["Test case"] + self.columns
        body = []
        for r in self.rows:
            line = [r]
            for c in self.columns:
                v = self.get(r, c)
                line.append("-" if v is None else f"{v / scale:.3f} {unit}")
            body.append(line)
        widths = [max(len(x[i]) for x in [head] + body) for i in range(len(head))]
        fmt = lambda cells: "  ".join(s.ljust(w) if i == 0 else s.rjust(w) for i, (s, w) in enumerate(zip(cells, widths)))
        out = [self.title] if self.title else []
        out += [fmt(head), "  ".join("-" * w for w in widths)]
        out += [fmt(b) for b in body]
        return "\n".join(out) + "\n"

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["case"] + self.columns)
        for r in self.rows:
            w.writerow([r] + ["" if self.get(r, c) is None else self.get(r, c) for c in self.columns])
        return buf.getvalue()

    @classmethod
    def from_csv(cls, text: str, title: str = "") -> ResultMatrix:
        rows_in = list(csv.reader(io.StringIO(text)))
        if not rows_in or rows_in[0][0] != "case":
            raise AnalysisError("not a result-matrix CSV")
        columns = rows_in[0][1:]
        rows, cells = [], {}
        for line in rows_in[1:]:
            if not line:
                continue
            rows.append(line[0])
            for c, v in zip(columns, line[1:]):
                cells[(line[0], c)] = int(v) if v != "" else None
        return cls(rows, columns, cells, title)


def build_result_matrix(runs: list[PhaseReport], title: str = "") -> ResultMatrix:
    """One matrix from reports of one stress variant.

    The Idle cell of a row is the worst of both idle phases over all its runs.
    """
    if not runs:
        raise AnalysisError("no runs to build a matrix from")
    variants = {r.stress for r in runs}
    if len(variants) > 1:
        raise AnalysisError("runs mix stress variants; build one matrix per variant")
    seen = set()
    cells: dict = {}
    present = set()
    for r in runs:
        if not r.code:
            raise AnalysisError(f"run {r.config_id} carries no test-case code")
        kind = AttackKind(r.attack)
        if kind is AttackKind.NONE:
            raise AnalysisError(f"run {r.config_id} has no attack column")
        key = (r.code, kind)
        if key in seen:
            raise AnalysisError(f"duplicate run for case {r.code} under {kind.value}")
        seen.add(key)
        present.add(kind)
        col = kind.column
        cells[(r.code, col)] = r.attack_max_ns if r.complete else None
        if r.complete:
            prev = cells.get((r.code, IDLE))
            cells[(r.code, IDLE)] = r.idle_max_ns if prev is None else max(prev, r.idle_max_ns)
        else:
            cells.setdefault((r.code, IDLE), None)
    rows = sorted({r.code for r in runs}, key=_row_key)
    columns = [IDLE] + [k.column for k in ATTACK_COLUMNS if k in present]
    return ResultMatrix(rows, columns, cells, title)

