"""Run reports: metric containers with uncertainties and method tags, and
deterministic plain-text / CSV rendering.

Reports never embed timestamps or environment state, so regenerating from
the same config and seed is byte-identical.
"""

from __future__ import annotations

import io
import csv
from dataclasses import dataclass, field

import numpy as np

from .tomography import LimitVerdict, matrix_report


@dataclass(frozen=True)
class Metric:
    """One reported quantity: value, one-sigma uncertainty, estimator tag."""

    name: str
    value: float
    err: float
    method: str

    def format_row(self, width: int) -> str:
        err = "-" if not np.isfinite(self.err) else f"{self.err:.6f}"
        return f"{self.name:<{width}} {self.value: .6f}  {err:>10}  {self.method}"


@dataclass
class RunReport:
    """Aggregated results of one protocol run."""

    protocol: str
    provenance: dict[str, str]
    metrics: list[Metric] = field(default_factory=list)
    verdicts: list[LimitVerdict] = field(default_factory=list)
    matrices: list[tuple[str, np.ndarray]] = field(default_factory=list)
    notes: list[str] = field(default_factory=list)

    def add(self, name: str, value: float, err: float, method: str) -> None:
        self.metrics.append(Metric(name, float(value), float(err), method))

    def metric(self, name: str) -> Metric:
        for m in self.metrics:
            if m.name == name:
                return m
        raise KeyError(name)

    def __contains__(self, name: str) -> bool:
        return any(m.name == name for m in self.metrics)

    def to_text(self) -> str:
        lines = [f"=== heralded-link report: {self.protocol} ==="]
        for key in sorted(self.provenance):
            lines.append(f"{key}: {self.provenance[key]}")
        lines.append("")
        if self.metrics:
            width = max(len(m.name) for m in self.metrics) + 2
            lines.append(f"{'metric':<{width}} {'value':>9}  {'stderr':>10}  method")
            for m in self.metrics:
                lines.append(m.format_row(width))
            lines.append("")
        if self.verdicts:
            lines.append("classical limits:")
            for v in self.verdicts:
                status = "PASS" if v.passed else "FAIL"
                lines.append(
                    f"  {v.metric}: {v.value:.6f} > {v.threshold:.2f}? "
                    f"{status} (margin {v.margin:+.6f})"
                )
            lines.append("")
        for title, matrix in self.matrices:
            lines.append(matrix_report(title, matrix).rstrip("\n"))
            lines.append("")
        for note in self.notes:
            lines.append(f"note: {note}")
        return "\n".join(lines).rstrip("\n") + "\n"

    def metrics_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(["metric", "value", "stderr", "method"])
        for m in self.metrics:
            writer.writerow([m.name, repr(m.value), repr(m.err), m.method])
        return buf.getvalue()


def sweep_csv(rows: list[tuple[float, str, float, float]]) -> str:
    """Series CSV with columns phase_rad, family, fraction, trials."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["phase_rad", "family", "fraction", "trials"])
    for phase, family, fraction, trials in rows:
        writer.writerow([repr(float(phase)), family, repr(float(fraction)), repr(float(trials))])
    return buf.getvalue()


def matrix_csv(matrix: np.ndarray) -> str:
    """Row-major matrix dump with real/imag columns."""
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["row", "col", "real", "imag"])
    arr = np.asarray(matrix, dtype=complex)
    for i in range(arr.shape[0]):
        for j in range(arr.shape[1]):
            writer.writerow([i, j, repr(float(arr[i, j].real)), repr(float(arr[i, j].imag))])
    return buf.getvalue()
