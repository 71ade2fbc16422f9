"""CSV tables with lossless float rendering, and SVG scatter/fit plots.

Floats are rendered with 17 significant digits so parsing the file recovers
every float64 bit-exactly; files are written with LF endings and UTF-8 so
identical runs produce identical bytes.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

from .errors import ParameterError, PlotError
from .experiments import RateFit


def render_cell(value) -> str:
    """Decimal rendering: 17 significant digits for floats, 0/1 for bools."""
    if isinstance(value, str):
        return value
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return format(float(value), ".17g")
    raise ParameterError(f"cannot render {type(value).__name__} in a CSV cell")


@dataclass(frozen=True)
class CsvTable:
    """A rectangular table of already-rendered cells."""

    header: tuple[str, ...]
    rows: tuple[tuple[str, ...], ...]

    def __post_init__(self) -> None:
        width = len(self.header)
        if any(len(row) != width for row in self.rows):
            raise ParameterError("CSV rows must match the header width")

    @classmethod
    def from_values(cls, header: Sequence[str], rows: Sequence[Sequence]) -> "CsvTable":
        return cls(
            tuple(header),
            tuple(tuple(render_cell(cell) for cell in row) for row in rows),
        )

    def emit_string(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(self.header)
        writer.writerows(self.rows)
        return buffer.getvalue()

    def emit(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="") as handle:
            handle.write(self.emit_string())

    @classmethod
    def parse_string(cls, text: str) -> "CsvTable":
        records = list(csv.reader(io.StringIO(text)))
        if not records:
            raise ParameterError("empty CSV text")
        return cls(tuple(records[0]), tuple(tuple(row) for row in records[1:]))

    @classmethod
    def parse(cls, path) -> "CsvTable":
        with open(path, "r", encoding="utf-8", newline="") as handle:
            return cls.parse_string(handle.read())

    def column(self, name: str) -> list[str]:
        try:
            i = self.header.index(name)
        except ValueError as exc:
            raise ParameterError(f"no column named {name!r}") from exc
        return [row[i] for row in self.rows]

    def floats(self, name: str) -> np.ndarray:
        try:
            return np.array([float(cell) for cell in self.column(name)])
        except ValueError as exc:
            raise ParameterError(f"column {name!r} has non-numeric cells") from exc


def emit_svg_plot(
    table: CsvTable,
    x_col: str,
    y_col: str,
    log_log: bool,
    fit: Optional[RateFit] = None,
    path="plot.svg",
    title: Optional[str] = None,
) -> str:
    """Scatter of y against x, optional power-law fit line, written as SVG.

    The scatter collection carries gid "data-points" and the fit line gid
    "fit-line" so the output is mechanically checkable.
    """
    x = table.floats(x_col)
    y = table.floats(y_col)
    keep = ~(np.isnan(x) | np.isnan(y))
    x, y = x[keep], y[keep]
    if log_log and (x.size == 0 or x.min() <= 0 or y.min() <= 0):
        raise PlotError("log-log plot requires strictly positive finite data")
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    points = ax.scatter(x, y, s=30, color="#1f77b4", zorder=3)
    points.set_gid("data-points")
    if fit is not None and x.size:
        span = (
            np.geomspace(x.min(), x.max(), 64)
            if log_log
            else np.linspace(x.min(), x.max(), 64)
        )
        curve = math.exp(fit.intercept) * span**fit.slope
        (line,) = ax.plot(
            span, curve, color="#d62728", label=f"slope {fit.slope:.3f}", zorder=2
        )
        line.set_gid("fit-line")
        ax.legend(loc="best")
    if log_log:
        ax.set_xscale("log")
        ax.set_yscale("log")
    ax.set_xlabel(x_col)
    ax.set_ylabel(y_col)
    if title:
        ax.set_title(title)
    ax.grid(True, which="both", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, format="svg")
    plt.close(fig)
    return str(path)
