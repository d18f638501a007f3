"""CSV schemas and streaming readers/writers.

Three row formats move through the pipeline:

* calibration: one customer observed at a snapshot, with the churn outcome
  over the following month (``customer_id,tenure,churned``, plus ``cause``
  in competing-risks mode and optional covariate columns ``x1..xm``),
* scoring: one live customer with churn-model score(s) and a monthly margin,
* projections: the per-customer output written by the scorer.

Files are UTF-8 CSV with a header row that must match the declared schema
exactly (case-sensitive). LF and CRLF are both accepted. Readers are
generators: rows are validated and yielded one at a time, with the failing
row number (header = row 1) reported on error. Floats are written with six
decimal places.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Iterator

from .errors import DuplicateCustomerId, InvalidValue, MissingColumn

CAUSE_VOLUNTARY = "V"
CAUSE_INVOLUNTARY = "I"

PROJECTION_COLUMNS = ["customer_id", "alpha", "ert_months", "clv", "truncated_at"]

_FLOAT_FMT = "{:.6f}"


@dataclass(frozen=True)
class CalibrationRecord:
    """One customer at the snapshot: tenure and next-month churn outcome."""

    customer_id: str
    tenure: int
    churned: int
    cause: str | None = None
    covariates: tuple[float, ...] | None = None


@dataclass(frozen=True)
class ScoringRecord:
    """A live customer to project: current tenure, score(s), monthly margin.

    Single-risk rows carry ``churn_score``; competing-risks rows carry
    ``score_v`` and ``score_inv`` instead (their sum is a probability, so it
    must not exceed 1).
    """

    customer_id: str
    tenure: int
    margin: float
    churn_score: float | None = None
    score_v: float | None = None
    score_inv: float | None = None


@dataclass(frozen=True)
class ProjectionRow:
    """Scorer output for one customer."""

    customer_id: str
    alpha: float
    ert_months: float
    clv: float
    truncated_at: int


def _calibration_header(mode: str, covariate_count: int) -> list[str]:
    cols = ["customer_id", "tenure", "churned"]
    if mode == "competing":
        cols.append("cause")
    cols.extend(f"x{i}" for i in range(1, covariate_count + 1))
    return cols


def _scoring_header(mode: str) -> list[str]:
    if mode == "competing":
        return ["customer_id", "tenure", "score_v", "score_inv", "margin"]
    return ["customer_id", "tenure", "churn_score", "margin"]


def _check_mode(mode: str) -> None:
    if mode not in ("single", "competing"):
        raise ValueError(f"mode must be 'single' or 'competing', got {mode!r}")


def _validate_header(header: list[str] | None, required: list[str]) -> int:
    """Check the fixed columns and return the number of trailing x1..xm columns."""
    if header is None:
        raise MissingColumn(required[0])
    header = [h.strip() for h in header]
    for i, name in enumerate(required):
        if i >= len(header) or header[i] != name:
            raise MissingColumn(name)
    extra = header[len(required):]
    for i, name in enumerate(extra, start=1):
        if name != f"x{i}":
            raise InvalidValue(1, name, f"unexpected column (expected x{i})")
    return len(extra)


def _parse_tenure(value: str, row: int) -> int:
    try:
        tenure = int(value)
    except ValueError:
        raise InvalidValue(row, "tenure", f"{value!r} is not an integer") from None
    if tenure < 0:
        raise InvalidValue(row, "tenure", "must be >= 0")
    return tenure


def _parse_probability(value: str, row: int, column: str) -> float:
    try:
        p = float(value)
    except ValueError:
        raise InvalidValue(row, column, f"{value!r} is not a number") from None
    if not math.isfinite(p) or p < 0.0 or p > 1.0:
        raise InvalidValue(row, column, "must be in [0, 1]")
    return p


def _parse_float(value: str, row: int, column: str) -> float:
    try:
        x = float(value)
    except ValueError:
        raise InvalidValue(row, column, f"{value!r} is not a number") from None
    if not math.isfinite(x):
        raise InvalidValue(row, column, "must be finite")
    return x


def _cells(row: list[str], columns: list[str], lineno: int) -> list[str]:
    if len(row) < len(columns):
        raise InvalidValue(lineno, columns[len(row)], "missing field")
    if len(row) > len(columns):
        raise InvalidValue(lineno, f"field {len(columns) + 1}", "unexpected extra field")
    return row


def read_calibration(path: str | Path, mode: str = "single") -> Iterator[CalibrationRecord]:
    """Stream validated calibration records from ``path``.

    Duplicate customer ids are rejected; multiple snapshots per file are out
    of scope.
    """
    _check_mode(mode)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        base = _calibration_header(mode, 0)
        n_cov = _validate_header(header, base)
        columns = _calibration_header(mode, n_cov)
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            cells = _cells(row, columns, lineno)
            cid = cells[0]
            if not cid:
                raise InvalidValue(lineno, "customer_id", "must be non-empty")
            if cid in seen:
                raise DuplicateCustomerId(cid, lineno)
            seen.add(cid)
            tenure = _parse_tenure(cells[1], lineno)
            churned_raw = cells[2]
            if churned_raw not in ("0", "1"):
                raise InvalidValue(lineno, "churned", "must be 0 or 1")
            churned = int(churned_raw)
            cause: str | None = None
            offset = 3
            if mode == "competing":
                cause_raw = cells[3]
                offset = 4
                if churned == 1:
                    if cause_raw not in (CAUSE_VOLUNTARY, CAUSE_INVOLUNTARY):
                        raise InvalidValue(lineno, "cause", "must be V or I for churners")
                    cause = cause_raw
                elif cause_raw != "":
                    raise InvalidValue(lineno, "cause", "must be empty unless churned")
            covariates = None
            if n_cov:
                covariates = tuple(
                    _parse_float(cells[offset + i], lineno, f"x{i + 1}") for i in range(n_cov)
                )
            yield CalibrationRecord(cid, tenure, churned, cause, covariates)


def read_scoring(path: str | Path, mode: str = "single") -> Iterator[ScoringRecord]:
    """Stream validated scoring records from ``path``.

    Memory stays flat in the file length apart from the id set used for
    duplicate detection.
    """
    _check_mode(mode)
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        columns = _scoring_header(mode)
        if _validate_header(header, columns):
            raise InvalidValue(1, header[len(columns)], "unexpected column")
        seen: set[str] = set()
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            cells = _cells(row, columns, lineno)
            cid = cells[0]
            if not cid:
                raise InvalidValue(lineno, "customer_id", "must be non-empty")
            if cid in seen:
                raise DuplicateCustomerId(cid, lineno)
            seen.add(cid)
            tenure = _parse_tenure(cells[1], lineno)
            if mode == "competing":
                score_v = _parse_probability(cells[2], lineno, "score_v")
                score_inv = _parse_probability(cells[3], lineno, "score_inv")
                if score_v + score_inv > 1.0:
                    raise InvalidValue(
                        lineno, "score_v/score_inv",
                        f"sum {score_v + score_inv:g} exceeds 1",
                    )
                margin = _parse_float(cells[4], lineno, "margin")
                yield ScoringRecord(cid, tenure, margin, score_v=score_v, score_inv=score_inv)
            else:
                score = _parse_probability(cells[2], lineno, "churn_score")
                margin = _parse_float(cells[3], lineno, "margin")
                yield ScoringRecord(cid, tenure, margin, churn_score=score)


def write_projections(path: str | Path, rows: Iterable[ProjectionRow]) -> int:
    """Write projection rows; returns the number of rows written."""
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(PROJECTION_COLUMNS)
        for r in rows:
            writer.writerow([
                r.customer_id,
                _FLOAT_FMT.format(r.alpha),
                _FLOAT_FMT.format(r.ert_months),
                _FLOAT_FMT.format(r.clv),
                str(r.truncated_at),
            ])
            count += 1
    return count


def read_projections(path: str | Path) -> Iterator[ProjectionRow]:
    """Read back a projections file (used for round-trip checks and tooling)."""
    with open(path, newline="", encoding="utf-8-sig") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if _validate_header(header, PROJECTION_COLUMNS):
            raise InvalidValue(1, header[len(PROJECTION_COLUMNS)], "unexpected column")
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            cells = _cells(row, PROJECTION_COLUMNS, lineno)
            try:
                truncated = int(cells[4])
            except ValueError:
                raise InvalidValue(lineno, "truncated_at", "not an integer") from None
            yield ProjectionRow(
                customer_id=cells[0],
                alpha=_parse_float(cells[1], lineno, "alpha"),
                ert_months=_parse_float(cells[2], lineno, "ert_months"),
                clv=_parse_float(cells[3], lineno, "clv"),
                truncated_at=truncated,
            )


def write_calibration(path: str | Path, records: Iterable[CalibrationRecord],
                      mode: str = "single") -> int:
    _check_mode(mode)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        header: list[str] | None = None
        for rec in records:
            if header is None:
                n_cov = len(rec.covariates) if rec.covariates else 0
                header = _calibration_header(mode, n_cov)
                writer.writerow(header)
            row = [rec.customer_id, str(rec.tenure), str(rec.churned)]
            if mode == "competing":
                row.append(rec.cause or "")
            if rec.covariates:
                row.extend(_FLOAT_FMT.format(x) for x in rec.covariates)
            writer.writerow(row)
            count += 1
        if header is None:
            writer.writerow(_calibration_header(mode, 0))
    return count


def write_scoring(path: str | Path, records: Iterable[ScoringRecord],
                  mode: str = "single") -> int:
    _check_mode(mode)
    count = 0
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(_scoring_header(mode))
        for rec in records:
            if mode == "competing":
                writer.writerow([
                    rec.customer_id, str(rec.tenure),
                    _FLOAT_FMT.format(rec.score_v or 0.0),
                    _FLOAT_FMT.format(rec.score_inv or 0.0),
                    _FLOAT_FMT.format(rec.margin),
                ])
            else:
                writer.writerow([
                    rec.customer_id, str(rec.tenure),
                    _FLOAT_FMT.format(rec.churn_score or 0.0),
                    _FLOAT_FMT.format(rec.margin),
                ])
            count += 1
    return count
