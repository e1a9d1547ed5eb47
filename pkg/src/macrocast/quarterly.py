"""Quarterly calendar, series containers, CSV ingestion and panel alignment."""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field
from typing import BinaryIO, Iterable, Sequence

import numpy as np

from .errors import (
    CoverageError,
    DomainError,
    DuplicateError,
    EmptyError,
    GapError,
    LengthError,
    ParseError,
)

_QUARTER_RE = re.compile(r"^\s*(-?\d{1,6})[Qq]([0-9])\s*$")


@dataclass(frozen=True, order=True)
class Quarter:
    year: int
    quarter: int

    def __post_init__(self) -> None:
        if self.quarter not in (1, 2, 3, 4):
            raise ParseError(f"quarter must be in 1..4, got {self.quarter}")

    @property
    def index(self) -> int:
        """Absolute quarter count, ``year * 4 + quarter - 1``."""
        return self.year * 4 + self.quarter - 1

    @classmethod
    def from_index(cls, index: int) -> Quarter:
        year, q0 = divmod(index, 4)
        return cls(year, q0 + 1)

    def __add__(self, n: int) -> Quarter:
        if not isinstance(n, (int, np.integer)):
            return NotImplemented
        return Quarter.from_index(self.index + int(n))

    def __sub__(self, other):
        if isinstance(other, Quarter):
            return self.index - other.index
        if isinstance(other, (int, np.integer)):
            return Quarter.from_index(self.index - int(other))
        return NotImplemented

    def __str__(self) -> str:
        return f"{self.year:04d}Q{self.quarter}"


def parse_quarter(text: str) -> Quarter:
    m = _QUARTER_RE.match(text)
    if m is None:
        raise ParseError(f"malformed quarter {text!r}, expected YYYYQn")
    q = int(m.group(2))
    if not 1 <= q <= 4:
        raise ParseError(f"quarter digit out of range in {text!r}")
    return Quarter(int(m.group(1)), q)


def format_quarter(q: Quarter) -> str:
    return str(q)


def quarter_add(q: Quarter, n: int) -> Quarter:
    return q + n


def quarter_range(first: Quarter, last: Quarter) -> list[Quarter]:
    """Inclusive list of quarters; empty when ``last < first``."""
    return [Quarter.from_index(i) for i in range(first.index, last.index + 1)]


def n_quarters(first: Quarter, last: Quarter) -> int:
    return max(0, last - first + 1)


def _span(first: Quarter, last: Quarter) -> str:
    return str(first) if first == last else f"{first}–{last}"


def _frozen(values: Iterable[float]) -> np.ndarray:
    arr = np.array(values, dtype=np.float64)
    if arr.ndim != 1:
        raise LengthError("series values must be one-dimensional")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True)
class QuarterlySeries:
    """Contiguous run of quarterly observations.

    ``estimated`` lists quarters whose values were produced by gap-filling
    rather than observed.
    """

    name: str
    start: Quarter
    values: np.ndarray
    estimated: tuple[Quarter, ...] = field(default=())

    def __post_init__(self) -> None:
        vals = _frozen(self.values)
        if not np.all(np.isfinite(vals)):
            bad = int(np.flatnonzero(~np.isfinite(vals))[0])
            raise DomainError(f"series {self.name} has non-finite value at {self.start + bad}")
        object.__setattr__(self, "values", vals)
        object.__setattr__(self, "estimated", tuple(self.estimated))

    def __len__(self) -> int:
        return len(self.values)

    @property
    def end(self) -> Quarter:
        """Last quarter held (``start - 1`` for an empty series)."""
        return self.start + (len(self.values) - 1)

    def quarters(self) -> list[Quarter]:
        return quarter_range(self.start, self.end)

    def covers(self, first: Quarter, last: Quarter) -> bool:
        return self.start <= first and last <= self.end

    def value_at(self, q: Quarter) -> float:
        k = q - self.start
        if k < 0 or k >= len(self.values):
            raise CoverageError(f"series {self.name} has no value at {q}")
        return float(self.values[k])

    def window(self, first: Quarter, last: Quarter) -> QuarterlySeries:
        if not self.covers(first, last):
            raise CoverageError(f"series {self.name} does not cover {_span(first, last)}")
        lo = first - self.start
        hi = last - self.start + 1
        est = tuple(q for q in self.estimated if first <= q <= last)
        return QuarterlySeries(self.name, first, self.values[lo:hi], est)

    def truncate(self, last: Quarter) -> QuarterlySeries:
        """Drop everything after ``last`` (no-op if the series already ends earlier)."""
        if last >= self.end:
            return self
        keep = max(0, last - self.start + 1)
        est = tuple(q for q in self.estimated if q <= last)
        return QuarterlySeries(self.name, self.start, self.values[:keep], est)

    def renamed(self, name: str) -> QuarterlySeries:
        return QuarterlySeries(name, self.start, self.values, self.estimated)


def load_series_csv(source: BinaryIO | bytes, name: str) -> QuarterlySeries:
    """Read a ``quarter,value`` CSV into a series.

    Rows must be ascending and contiguous. Row numbers in error messages count
    the header as row 1.
    """
    raw = source if isinstance(source, bytes) else source.read()
    try:
        text = raw.decode("utf-8-sig")
    except UnicodeDecodeError as exc:
        raise ParseError(f"series {name}: not valid UTF-8 ({exc.reason})") from None
    reader = csv.reader(io.StringIO(text))
    header = next(reader, None)
    if header is None or [h.strip().lower() for h in header] != ["quarter", "value"]:
        raise ParseError(f"series {name}: header must be 'quarter,value', got {header!r}")

    start: Quarter | None = None
    prev: Quarter | None = None
    values: list[float] = []
    for rowno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 2:
            raise ParseError(f"series {name}: row {rowno} has {len(row)} fields, expected 2")
        q = parse_quarter(row[0])
        try:
            v = float(row[1])
        except ValueError:
            raise ParseError(f"series {name}: non-numeric value {row[1]!r} at row {rowno}") from None
        if not math.isfinite(v):
            raise ParseError(f"series {name}: non-finite value {row[1]!r} at row {rowno}")
        if prev is None:
            start = q
        elif q == prev:
            raise DuplicateError(f"series {name}: duplicate quarter {q} at row {rowno}")
        elif q < prev:
            raise ParseError(f"series {name}: quarter {q} at row {rowno} is out of order")
        elif q != prev + 1:
            raise GapError(f"series {name}: gap at {prev + 1}")
        values.append(v)
        prev = q

    if start is None:
        raise EmptyError(f"series {name}: empty series")
    return QuarterlySeries(name, start, values)


def write_series_csv(series: QuarterlySeries) -> str:
    lines = ["quarter,value"]
    lines += [f"{q},{v!r}" for q, v in zip(series.quarters(), series.values.tolist())]
    return "\n".join(lines) + "\n"


def pct_change(s: QuarterlySeries, periods: int = 1, annualise: bool = False) -> QuarterlySeries:
    """Percentage change over ``periods`` quarters.

    With ``annualise`` the one-quarter ratio is compounded over four quarters,
    ``100 * ((v[t] / v[t-1]) ** 4 - 1)``; for ``periods > 1`` the exponent is
    ``4 / periods``.
    """
    if periods < 1:
        raise LengthError(f"periods must be positive, got {periods}")
    if len(s) <= periods:
        raise LengthError(f"series {s.name} has {len(s)} values, need more than {periods}")
    v = s.values
    bad = (v <= 0) if annualise else (v[:-periods] == 0)
    if np.any(bad):
        at = s.start + int(np.flatnonzero(bad)[0])
        what = "non-positive level" if annualise else "zero base value"
        raise DomainError(f"series {s.name} has {what} at {at}")
    ratio = v[periods:] / v[:-periods]
    if annualise:
        out = 100.0 * (ratio ** (4.0 / periods) - 1.0)
    else:
        out = 100.0 * (ratio - 1.0)
    start = s.start + periods
    est = tuple(q for q in s.estimated if q >= start)
    return QuarterlySeries(s.name, start, out, est)


@dataclass(frozen=True)
class PanelDataset:
    """Named columns sharing one contiguous quarter range."""

    first: Quarter
    last: Quarter
    columns: dict[str, np.ndarray]

    def __post_init__(self) -> None:
        n = n_quarters(self.first, self.last)
        if n == 0:
            raise EmptyError("panel range is empty")
        cols = {}
        for name, vals in self.columns.items():
            arr = _frozen(vals)
            if len(arr) != n:
                raise CoverageError(f"column {name} has {len(arr)} rows, panel needs {n}")
            cols[name] = arr
        object.__setattr__(self, "columns", cols)

    @property
    def names(self) -> list[str]:
        return list(self.columns)

    def __len__(self) -> int:
        return n_quarters(self.first, self.last)

    def quarters(self) -> list[Quarter]:
        return quarter_range(self.first, self.last)

    def series(self, name: str) -> QuarterlySeries:
        if name not in self.columns:
            raise CoverageError(f"series {name} not found in panel")
        return QuarterlySeries(name, self.first, self.columns[name])

    def value(self, name: str, q: Quarter) -> float:
        k = q - self.first
        if name not in self.columns:
            raise CoverageError(f"series {name} not found in panel")
        if k < 0 or k >= len(self):
            raise CoverageError(f"panel has no row for {q} (column {name})")
        return float(self.columns[name][k])

    def replace(self, **columns: np.ndarray) -> PanelDataset:
        cols = dict(self.columns)
        cols.update(columns)
        return PanelDataset(self.first, self.last, cols)

    def to_csv(self) -> str:
        names = self.names
        lines = [",".join(["quarter", *names])]
        for k, q in enumerate(self.quarters()):
            lines.append(",".join([str(q), *(repr(float(self.columns[c][k])) for c in names)]))
        return "\n".join(lines) + "\n"


def align(series: Sequence[QuarterlySeries], range_: tuple[Quarter, Quarter]) -> PanelDataset:
    """Restrict each series to ``range_`` and stack them into a panel."""
    if not series:
        raise EmptyError("empty panel: no series given")
    first, last = range_
    if last < first:
        raise EmptyError(f"empty panel: range {first}..{last} is reversed")
    cols: dict[str, np.ndarray] = {}
    for s in series:
        if s.name in cols:
            raise DuplicateError(f"duplicate column name {s.name}")
        missing = []
        if s.start > first:
            missing.append(_span(first, min(s.start - 1, last)))
        if s.end < last:
            missing.append(_span(max(s.end + 1, first), last))
        if missing:
            raise CoverageError(f"series {s.name} missing {', '.join(missing)}")
        cols[s.name] = s.window(first, last).values
    return PanelDataset(first, last, cols)
