"""
analyzer/tables.py - report containers with deterministic CSV output.

Floats are written with 9 significant digits, '.' decimal and '\n' line
endings so reruns produce byte-identical files.
"""
import csv
import io
import math
from dataclasses import dataclass
from typing import List, Sequence, Tuple

import numpy as np

from errors import DimensionError
from utils import safe_write


def format_cell(value) -> str:
    if isinstance(value, (float, np.floating)):
        return "nan" if math.isnan(value) else f"{float(value):.9g}"
    return str(value)


def _csv_text(rows: Sequence[Sequence]) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    for row in rows:
        writer.writerow([format_cell(v) for v in row])
    return buf.getvalue()


@dataclass(frozen=True)
class ReportTable:
    header: Tuple[str, ...]
    rows: Tuple[Tuple, ...]

    def column(self, name: str) -> List:
        i = self.header.index(name)
        return [row[i] for row in self.rows]

    def to_csv(self) -> str:
        return _csv_text([self.header, *self.rows])

    def write_csv(self, path: str) -> None:
        safe_write(path, self.to_csv())

    def to_markdown(self) -> str:
        """Markdown table with dynamic column widths."""
        cells = [list(self.header)] + [[format_cell(v) for v in row] for row in self.rows]
        widths = [max(len(r[i]) for r in cells) for i in range(len(self.header))]
        widths = [w + max(3, int(w * 0.1)) for w in widths]
        lines = ["| " + " | ".join(c.ljust(w) for c, w in zip(cells[0], widths)) + " |"]
        lines.append("| " + " | ".join("-" * w for w in widths) + " |")
        for row in cells[1:]:
            lines.append("| " + " | ".join(c.ljust(w) for c, w in zip(row, widths)) + " |")
        return "\n".join(lines)


@dataclass(frozen=True, eq=False)
class SimilarityReport:
    row_labels: Tuple[str, ...]
    col_labels: Tuple[str, ...]
    values: np.ndarray
    context: str

    def __post_init__(self):
        if self.values.shape != (len(self.row_labels), len(self.col_labels)):
            raise DimensionError(
                f"matrix shape {self.values.shape} does not match {len(self.row_labels)}x{len(self.col_labels)} labels"
            )

    def to_csv(self) -> str:
        rows = [["", *self.col_labels]]
        rows += [[label, *self.values[i]] for i, label in enumerate(self.row_labels)]
        return _csv_text(rows)

    def write_csv(self, path: str) -> None:
        safe_write(path, self.to_csv())

    def off_diagonal_mean(self) -> float:
        n = self.values.shape[0]
        if n < 2:
            return float("nan")
        mask = ~np.eye(n, dtype=bool)
        return float(self.values[mask].mean())
