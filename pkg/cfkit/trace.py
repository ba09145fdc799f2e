"""
Convergence trace CSV and run manifest writers.
"""

import csv
import json
import os
import tempfile
from dataclasses import asdict, dataclass, field
from typing import Any, Dict, Iterable, List, Optional

from cfkit.data import write_atomic
from cfkit.engine import IterationRecord

TRACE_COLUMNS = ("iter", "objective", "gap", "step_norm", "elapsed_ms")


@dataclass
class TraceRow:
    """A single row of a trace CSV."""
    iter: int
    objective: float
    gap: Optional[float]  # |objective - reference|, None without a reference
    step_norm: float
    elapsed_ms: Optional[float]  # None when timing is off


def _fmt(value: Optional[float]) -> str:
    return "" if value is None else repr(float(value))


class TraceWriter:
    """Writes IterationRecords as CSV rows.

    Rows go to a temporary sibling of output_path, which is renamed into
    place on close(); an interrupted run leaves no partial trace behind.
    """

    def __init__(self, output_path: str, reference_objective: Optional[float] = None, timing: bool = True):
        self.output_path = output_path
        self.reference_objective = reference_objective
        self.timing = timing
        directory = os.path.dirname(os.path.abspath(output_path))
        fd, self._tmp_path = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=".csv")
        self._file = os.fdopen(fd, "w", encoding="utf-8", newline="")
        self._writer = csv.writer(self._file, lineterminator="\n")
        self._writer.writerow(TRACE_COLUMNS)
        self.rows_written = 0

    def row_for(self, record: IterationRecord) -> TraceRow:
        gap = None
        if self.reference_objective is not None:
            gap = abs(record.objective - self.reference_objective)
        return TraceRow(
            iter=record.k,
            objective=record.objective,
            gap=gap,
            step_norm=record.step_norm,
            elapsed_ms=record.elapsed if self.timing else None,
        )

    def log_record(self, record: IterationRecord):
        row = self.row_for(record)
        self._writer.writerow([
            str(row.iter), _fmt(row.objective), _fmt(row.gap), _fmt(row.step_norm), _fmt(row.elapsed_ms),
        ])
        self.rows_written += 1

    def write_all(self, records: Iterable[IterationRecord]):
        for record in records:
            self.log_record(record)

    def close(self):
        """Flush and move the trace into place."""
        if self._file.closed:
            return
        self._file.close()
        os.replace(self._tmp_path, self.output_path)

    def abort(self):
        """Discard everything written so far."""
        if not self._file.closed:
            self._file.close()
        if os.path.exists(self._tmp_path):
            os.unlink(self._tmp_path)

    def __enter__(self):
        return self

    def __exit__(self, exc_type, exc, tb):
        if exc_type is None:
            self.close()
        else:
            self.abort()
        return False


def write_trace(path: str, records: Iterable[IterationRecord], reference_objective: Optional[float] = None,
                timing: bool = True) -> int:
    with TraceWriter(path, reference_objective, timing) as writer:
        writer.write_all(records)
        return writer.rows_written


def _parse(value: str) -> Optional[float]:
    return None if value == "" else float(value)


def read_trace(path: str) -> List[TraceRow]:
    with open(path, encoding="utf-8", newline="") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if tuple(header or ()) != TRACE_COLUMNS:
            raise ValueError(f"{path} is not a trace file (header {header})")
        return [
            TraceRow(int(it), float(obj), _parse(gap), float(sn), _parse(ms))
            for it, obj, gap, sn, ms in reader
        ]


@dataclass
class RunManifest:
    """Everything needed to interpret one trace file."""
    command: List[str]
    dataset: str
    algorithm: str
    flavor: str
    mu: float
    lipschitz: float
    theta: float
    alpha: float
    big_c: float
    tolerance: float
    iterations: int
    final_objective: float
    wall_time: float
    exit_status: int
    status: str
    trace: Optional[str] = None
    reference_objective: Optional[float] = None
    extra: Dict[str, Any] = field(default_factory=dict)


def write_manifest(manifest: RunManifest, path: str):
    text = json.dumps(asdict(manifest), indent=2, ensure_ascii=False) + "\n"
    write_atomic(path, text.encode("utf-8"))


def read_manifest(path: str) -> RunManifest:
    with open(path, encoding="utf-8") as f:
        return RunManifest(**json.load(f))
