"""Per-epoch run records and their CSV form."""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from typing import List, NamedTuple, Optional

COLUMNS = (
    "run_id",
    "algorithm",
    "epoch",
    "oracle_calls",
    "objective",
    "objective_gap",
    "bregman_gap",
    "feasibility",
    "wall_ns",
)


class TraceRow(NamedTuple):
    epoch: int
    oracle_calls: int
    objective: float
    objective_gap: Optional[float]
    bregman_gap: Optional[float]
    feasibility: float
    wall_ns: int


@dataclass
class Trace:
    run_id: str
    algorithm: str
    rows: List[TraceRow] = field(default_factory=list)

    def append(self, row: TraceRow):
        if self.rows:
            last = self.rows[-1]
            if row.epoch <= last.epoch:
                raise ValueError("epochs must be strictly increasing")
            if row.oracle_calls <= last.oracle_calls:
                raise ValueError("oracle calls must be strictly increasing")
        self.rows.append(row)

    def column(self, name):
        return [getattr(r, name) for r in self.rows]

    @property
    def final(self) -> Optional[TraceRow]:
        return self.rows[-1] if self.rows else None

    def calls_to_reach(self, target, gap="objective_gap", feasibility=None):
        """Oracle calls at the first row with |gap| <= target, else None.

        ``feasibility`` additionally bounds the constraint violation of that row.
        """
        for row in self.rows:
            val = getattr(row, gap)
            if val is None or abs(val) > target:
                continue
            if feasibility is None or row.feasibility <= feasibility:
                return row.oracle_calls
        return None


def _fmt(v):
    if v is None:
        return ""
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _float_or_none(s):
    return None if s == "" else float(s)


def write_csv(trace: Trace, fh=None):
    """Write ``trace`` to a file object; returns the text when fh is None."""
    buf = io.StringIO() if fh is None else fh
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COLUMNS)
    for row in trace.rows:
        w.writerow([trace.run_id, trace.algorithm] + [_fmt(v) for v in row])
    return buf.getvalue() if fh is None else None


def read_csv(fh) -> Trace:
    if isinstance(fh, str):
        fh = io.StringIO(fh)
    reader = csv.reader(fh)
    header = next(reader, None)
    if header is None or tuple(header) != COLUMNS:
        raise ValueError(f"unexpected trace header: {header}")
    run_id = algorithm = None
    rows = []
    for rec in reader:
        if not rec:
            continue
        if len(rec) != len(COLUMNS):
            raise ValueError(f"malformed trace row: {rec}")
        run_id, algorithm = rec[0], rec[1]
        rows.append(
            TraceRow(
                int(rec[2]),
                int(rec[3]),
                float(rec[4]),
                _float_or_none(rec[5]),
                _float_or_none(rec[6]),
                float(rec[7]),
                int(rec[8]),
            )
        )
    trace = Trace(run_id or "", algorithm or "")
    for row in rows:
        trace.append(row)
    return trace


def save(trace: Trace, path):
    with open(path, "w", newline="") as fh:
        write_csv(trace, fh)


def load(path) -> Trace:
    with open(path, newline="") as fh:
        return read_csv(fh)
