"""Training-log parsing and trend verification.

Logs are comma-separated with a header line, one row per epoch, carrying the
seven tracked series (three losses, precision, recall, and the two mAP
variants). The trend checker compares windowed start/end means and the
overall direction of each series against expected endpoints; the built-in
expectations describe a healthy 100-epoch run and flag themselves as
reference endpoints, not measured ground truth.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Iterable, Sequence

from . import docio
from .errors import ParseError

SERIES_COLUMNS = (
    "box_loss",
    "objectness_loss",
    "classification_loss",
    "precision",
    "recall",
    "map50",
    "map5095",
)
REQUIRED_COLUMNS = ("epoch",) + SERIES_COLUMNS
TREND_WINDOW = 5  # epochs averaged at each end of a series

_LOSS_COLUMNS = ("box_loss", "objectness_loss", "classification_loss")
_UNIT_COLUMNS = ("precision", "recall", "map50", "map5095")


@dataclass(frozen=True)
class EpochRecord:
    epoch: int
    box_loss: float
    objectness_loss: float
    classification_loss: float
    precision: float
    recall: float
    map50: float
    map5095: float

    def __post_init__(self) -> None:
        if self.epoch < 1:
            raise ValueError(f"epoch must be >= 1, got {self.epoch}")
        for name in _LOSS_COLUMNS:
            value = getattr(self, name)
            if value < 0:
                raise ValueError(f"{name} must be non-negative, got {value}")
        for name in _UNIT_COLUMNS:
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must be in [0, 1], got {value}")

    def value(self, series: str) -> float:
        if series not in SERIES_COLUMNS:
            raise KeyError(series)
        return getattr(self, series)


def parse_training_log(text: str, *, source: str | None = None) -> list[EpochRecord]:
    """Parse a header-declared comma-separated log into ordered epoch records.

    Unknown columns are skipped with a warning; missing required columns,
    unparsable numbers, and non-increasing epochs are errors that name the
    offending line.
    """
    lines = [line for line in text.splitlines()]
    rows = [(i + 1, line.strip()) for i, line in enumerate(lines) if line.strip()]
    if not rows:
        raise ParseError("empty training log", source=source)

    header_line_no, header = rows[0]
    columns = [c.strip() for c in header.split(",")]
    missing = [c for c in REQUIRED_COLUMNS if c not in columns]
    if missing:
        raise ParseError(
            f"header missing required column(s): {', '.join(missing)}",
            location=f"line {header_line_no}",
            source=source,
        )
    unknown = [c for c in columns if c not in REQUIRED_COLUMNS]
    if unknown:
        warnings.warn(f"ignoring unknown training-log column(s): {', '.join(unknown)}")
    index = {name: columns.index(name) for name in REQUIRED_COLUMNS}

    records: list[EpochRecord] = []
    for line_no, line in rows[1:]:
        cells = [c.strip() for c in line.split(",")]
        if len(cells) != len(columns):
            raise ParseError(
                f"expected {len(columns)} fields, got {len(cells)}",
                location=f"line {line_no}",
                source=source,
            )
        values: dict[str, float] = {}
        for name in REQUIRED_COLUMNS:
            cell = cells[index[name]]
            try:
                values[name] = int(cell) if name == "epoch" else float(cell)
            except ValueError:
                raise ParseError(
                    f"unparsable {name} value {cell!r}",
                    location=f"line {line_no}",
                    source=source,
                ) from None
        try:
            record = EpochRecord(**values)  # type: ignore[arg-type]
        except ValueError as exc:
            raise ParseError(str(exc), location=f"line {line_no}", source=source) from None
        if records and record.epoch <= records[-1].epoch:
            raise ParseError(
                f"epoch {record.epoch} not greater than previous epoch {records[-1].epoch}",
                location=f"line {line_no}",
                source=source,
            )
        records.append(record)
    return records


def emit_training_log(records: Iterable[EpochRecord]) -> str:
    """Inverse of parse_training_log; values keep 6 significant digits."""
    lines = [",".join(REQUIRED_COLUMNS)]
    for record in records:
        cells = [str(record.epoch)]
        cells += [f"{record.value(name):.6g}" for name in SERIES_COLUMNS]
        lines.append(",".join(cells))
    return "\n".join(lines) + "\n"


@dataclass(frozen=True)
class TrendExpectation:
    """Expected endpoints for one series: direction plus start/end means."""

    series: str
    direction: str  # "decreasing" | "increasing"
    start: float
    end: float
    tolerance: float

    def __post_init__(self) -> None:
        if self.series not in SERIES_COLUMNS:
            raise ValueError(f"unknown series {self.series!r}")
        if self.direction not in ("decreasing", "increasing"):
            raise ValueError(f"direction must be 'decreasing' or 'increasing', got {self.direction!r}")
        if self.tolerance <= 0:
            raise ValueError("tolerance must be positive")


DEFAULT_EXPECTATIONS = (
    TrendExpectation("box_loss", "decreasing", start=0.05, end=0.02, tolerance=0.01),
    TrendExpectation("objectness_loss", "decreasing", start=0.012, end=0.002, tolerance=0.01),
    TrendExpectation("classification_loss", "decreasing", start=0.016, end=0.004, tolerance=0.01),
    TrendExpectation("precision", "increasing", start=0.2, end=0.6, tolerance=0.05),
    TrendExpectation("recall", "increasing", start=0.1, end=0.45, tolerance=0.05),
    TrendExpectation("map50", "increasing", start=0.1, end=0.3, tolerance=0.05),
    TrendExpectation("map5095", "increasing", start=0.0, end=0.23, tolerance=0.05),
)


@dataclass(frozen=True)
class TrendVerdict:
    series: str
    status: str  # "pass" | "fail" | "insufficient data"
    start_mean: float | None
    end_mean: float | None
    direction: str | None
    notes: tuple[str, ...] = ()

    @property
    def passed(self) -> bool:
        return self.status == "pass"


def _window_means(values: Sequence[float]) -> tuple[float, float, int]:
    # Shrink the window on short logs so the two ends never overlap.
    window = min(TREND_WINDOW, len(values) // 2)
    start = sum(values[:window]) / window
    end = sum(values[-window:]) / window
    return start, end, window


def check_trends(
    records: Sequence[EpochRecord],
    expectations: Sequence[TrendExpectation] = DEFAULT_EXPECTATIONS,
) -> list[TrendVerdict]:
    """Judge each expected series; short logs yield 'insufficient data'."""
    verdicts: list[TrendVerdict] = []
    for exp in expectations:
        if len(records) < 2:
            verdicts.append(
                TrendVerdict(exp.series, "insufficient data", None, None, None,
                             notes=("need at least 2 epochs",))
            )
            continue
        values = [r.value(exp.series) for r in records]
        start_mean, end_mean, window = _window_means(values)
        if end_mean < start_mean:
            direction = "decreasing"
        elif end_mean > start_mean:
            direction = "increasing"
        else:
            direction = "flat"
        notes: list[str] = [f"window={window}"]
        failures: list[str] = []
        if direction != exp.direction:
            failures.append(f"direction {direction}, expected {exp.direction}")
        if abs(start_mean - exp.start) > exp.tolerance:
            failures.append(
                f"start mean {start_mean:.4g} outside {exp.start:.4g} +/- {exp.tolerance:.4g}"
            )
        if abs(end_mean - exp.end) > exp.tolerance:
            failures.append(
                f"end mean {end_mean:.4g} outside {exp.end:.4g} +/- {exp.tolerance:.4g}"
            )
        status = "fail" if failures else "pass"
        verdicts.append(
            TrendVerdict(exp.series, status, start_mean, end_mean, direction,
                         notes=tuple(notes + failures))
        )
    return verdicts


def synthesize_log(
    epochs: int = 100,
    expectations: Sequence[TrendExpectation] = DEFAULT_EXPECTATIONS,
) -> list[EpochRecord]:
    """Linear interpolation between each expectation's endpoints; handy for demos."""
    if epochs < 2:
        raise ValueError("need at least 2 epochs")
    records = []
    targets = {exp.series: exp for exp in expectations}
    for i in range(epochs):
        t = i / (epochs - 1)
        values = {}
        for series in SERIES_COLUMNS:
            exp = targets.get(series)
            if exp is None:
                values[series] = 0.0
            else:
                values[series] = exp.start + (exp.end - exp.start) * t
        records.append(EpochRecord(epoch=i + 1, **values))
    return records


def emit_training_report(
    records: Sequence[EpochRecord],
    expectations: Sequence[TrendExpectation] = DEFAULT_EXPECTATIONS,
) -> tuple[dict, str]:
    """Plot-ready series document plus a human-readable verdict summary."""
    if not records:
        raise ValueError("no epoch records to report on")
    verdicts = check_trends(records, expectations)
    doc = {
        "schema": docio.TRAINLOG_SCHEMA,
        "epochs": [r.epoch for r in records],
        "series": {name: [r.value(name) for r in records] for name in SERIES_COLUMNS},
        "expectations": [
            {
                "series": e.series,
                "direction": e.direction,
                "start": e.start,
                "end": e.end,
                "tolerance": e.tolerance,
            }
            for e in expectations
        ],
        "expectations_source": "built-in reference endpoints for a healthy 100-epoch run",
        "verdicts": [
            {
                "series": v.series,
                "status": v.status,
                "start_mean": v.start_mean,
                "end_mean": v.end_mean,
                "direction": v.direction,
                "notes": list(v.notes),
            }
            for v in verdicts
        ],
    }
    lines = [
        f"training log: {len(records)} epoch(s), "
        f"window={min(TREND_WINDOW, max(1, len(records) // 2))}",
        "expectations are built-in reference endpoints, not measured ground truth",
    ]
    for v in verdicts:
        if v.status == "insufficient data":
            lines.append(f"  {v.series}: insufficient data")
            continue
        summary = f"  {v.series}: {v.status} (start {v.start_mean:.4g}, end {v.end_mean:.4g}, {v.direction})"
        extra = [n for n in v.notes if not n.startswith("window=")]
        if extra:
            summary += " - " + "; ".join(extra)
        lines.append(summary)
    return doc, "\n".join(lines)
