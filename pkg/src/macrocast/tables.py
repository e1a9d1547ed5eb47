"""Row tables rendered as CSV or JSON lines.

Floats are written with ``repr`` (shortest round-trip form) so reruns are
byte-identical and values parse back exactly.
"""

from __future__ import annotations

import csv
import io
import json
from dataclasses import dataclass
from typing import Any, Sequence

from .quarterly import Quarter


@dataclass(frozen=True)
class Table:
    header: tuple[str, ...]
    rows: tuple[tuple[Any, ...], ...]


def _cell(v: Any) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _json_value(v: Any) -> Any:
    if isinstance(v, Quarter):
        return str(v)
    if isinstance(v, (tuple, list)):
        return [_json_value(x) for x in v]
    return v


def to_csv(table: Table) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(table.header)
    for row in table.rows:
        w.writerow([_cell(v) for v in row])
    return buf.getvalue()


def to_jsonl(table: Table) -> str:
    lines = [
        json.dumps({k: _json_value(v) for k, v in zip(table.header, row)}, ensure_ascii=False)
        for row in table.rows
    ]
    return "".join(line + "\n" for line in lines)


def render(table: Table, fmt: str) -> str:
    if fmt == "csv":
        return to_csv(table)
    if fmt == "jsonl":
        return to_jsonl(table)
    raise ValueError(f"unknown report format {fmt!r}")


def table(header: Sequence[str], rows: Sequence[Sequence[Any]]) -> Table:
    return Table(tuple(header), tuple(tuple(r) for r in rows))
