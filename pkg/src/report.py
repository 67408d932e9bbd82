"""Table, JSON and CSV rendering of command reports."""

import csv
import io
import json
import sys
from fractions import Fraction
from typing import Sequence

import numpy as np

FORMATS = ("table", "json", "csv")


def emit(text: str) -> None:
    """Print to stdout; exit cleanly if downstream closed the pipe."""
    try:
        print(text, flush=True)
    except BrokenPipeError:
        sys.exit(0)


def _plain(value):
    if isinstance(value, Fraction):
        return str(value)
    if isinstance(value, complex):
        return [value.real, value.imag]
    if isinstance(value, np.ndarray):
        return _plain(value.tolist())
    if isinstance(value, np.generic):
        return _plain(value.item())
    if isinstance(value, dict):
        return {str(k): _plain(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_plain(v) for v in value]
    return value


def to_json(report) -> str:
    return json.dumps(_plain(report))


def _cell(value) -> str:
    value = _plain(value)
    if value is None:
        return "-"
    if isinstance(value, bool):
        return "yes" if value else "no"
    if isinstance(value, float):
        return f"{value:.10g}"
    if isinstance(value, (list, dict)):
        return json.dumps(value, separators=(",", ":"))
    return str(value)


def _columns(records: Sequence[dict], columns: Sequence[str] | None) -> list[str]:
    if columns is not None:
        return list(columns)
    out: list[str] = []
    for r in records:
        out.extend(k for k in r if k not in out)
    return out


def render_table(records: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    cols = _columns(records, columns)
    if not cols:
        return ""
    cells = [[_cell(r.get(c)) for c in cols] for r in records]
    widths = [max([len(c)] + [len(row[t]) for row in cells]) for t, c in enumerate(cols)]
    lines = ["  ".join(c.ljust(w) for c, w in zip(cols, widths)).rstrip()]
    lines.append("  ".join("-" * w for w in widths))
    lines.extend("  ".join(v.ljust(w) for v, w in zip(row, widths)).rstrip() for row in cells)
    return "\n".join(lines)


def render_csv(records: Sequence[dict], columns: Sequence[str] | None = None) -> str:
    cols = _columns(records, columns)
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=cols, extrasaction="ignore", lineterminator="\n")
    writer.writeheader()
    for r in records:
        writer.writerow({c: "" if r.get(c) is None else _cell(r.get(c)) for c in cols})
    return buf.getvalue().rstrip("\n")


def render(report: dict, fmt: str, rows: str | None = "rows", columns: Sequence[str] | None = None) -> str:
    """
    json: the whole report on one line. csv: the records under report[rows] (or the
    report itself as one record). table: scalar fields as "name: value" lines, then the
    records as aligned columns.
    """
    if fmt not in FORMATS:
        raise ValueError(f"Unknown format {fmt!r}; expected one of {FORMATS}")
    if fmt == "json":
        return to_json(report)
    records = report.get(rows) if rows else None
    if not isinstance(records, list):
        records = [report]
        header = {}
    else:
        header = {k: v for k, v in report.items() if k != rows}
    if fmt == "csv":
        return render_csv(records, columns)
    lines = [f"{k}: {_cell(v)}" for k, v in header.items()]
    table = render_table(records, columns)
    if lines and table:
        lines.append("")
    return "\n".join(lines + ([table] if table else []))
