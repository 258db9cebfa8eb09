from __future__ import annotations

import csv
import json
import math
from collections.abc import Mapping, Sequence
from fractions import Fraction
from typing import Final, Literal, TextIO

from rich.console import Console
from rich.table import Table

type OutputFormat = Literal["csv", "json", "table"]
type Record = Mapping[str, object]

OUTPUT_FORMATS: Final[tuple[str, ...]] = ("csv", "json", "table")

JSON_DIGITS: Final[int] = 15
CSV_DIGITS: Final[int] = 12


def _as_float(x: float | Fraction) -> float:
    """`float(x)`, saturating to ±inf for rationals beyond binary64."""
    try:
        return float(x)
    except OverflowError:
        return math.inf if x > 0 else -math.inf


def format_float(x: float | Fraction, digits: int) -> str:
    """`digits` significant digits, shortest form (`%g`)."""
    v = _as_float(x)
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return f"{v:.{digits}g}"


def round_sig(x: float | Fraction, digits: int) -> float:
    v = _as_float(x)
    if not math.isfinite(v):
        return v
    return float(f"{v:.{digits}g}")


def _cell(value: object, digits: int) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, (float, Fraction)):
        return format_float(value, digits)
    if isinstance(value, (list, tuple)):
        return ";".join(_cell(v, digits) for v in value)
    return str(value)


def _json_value(value: object) -> object:
    if isinstance(value, bool) or value is None or isinstance(value, (int, str)):
        return value
    if isinstance(value, (float, Fraction)):
        v = round_sig(value, JSON_DIGITS)
        # JSON has no infinities; out-of-range rationals survive in `*_exact`.
        return v if math.isfinite(v) else None
    if isinstance(value, (list, tuple)):
        return [_json_value(v) for v in value]
    return str(value)


def _json_record(record: Record) -> dict[str, object]:
    out: dict[str, object] = {}
    for key, value in record.items():
        out[key] = _json_value(value)
        # Rationals also travel verbatim so exact oracles can be compared.
        if isinstance(value, Fraction):
            out[f"{key}_exact"] = f"{value.numerator}/{value.denominator}"
    return out


def emit(
    records: Sequence[Record],
    columns: Sequence[str],
    fmt: OutputFormat,
    out: TextIO,
    *,
    single: bool = False,
    title: str | None = None,
) -> None:
    """
    Write `records` to `out`.

    csv: header row then one row per record, `\\n` terminated, 12 significant digits.
    json: one object (`single`) or a list, 15 significant digits, sorted keys.
    table: a rich table with 12 significant digits.
    """
    if fmt == "csv":
        writer = csv.writer(out, lineterminator="\n")
        writer.writerow(columns)
        for rec in records:
            writer.writerow([_cell(rec.get(c), CSV_DIGITS) for c in columns])
        return

    if fmt == "json":
        payload: object = [_json_record(r) for r in records]
        if single:
            if len(records) != 1:
                raise ValueError(f"single-object JSON needs exactly one record, got {len(records)}")
            payload = _json_record(records[0])
        out.write(json.dumps(payload, indent=2, sort_keys=True))
        out.write("\n")
        return

    if fmt == "table":
        table = Table(title=title)
        for c in columns:
            table.add_column(c, justify="right")
        for rec in records:
            table.add_row(*[_cell(rec.get(c), CSV_DIGITS) for c in columns])
        Console(file=out, soft_wrap=True).print(table)
        return

    raise ValueError(f"Invalid output format: {fmt!r} (expected one of: {', '.join(OUTPUT_FORMATS)})")


__all__ = [
    "CSV_DIGITS",
    "JSON_DIGITS",
    "OUTPUT_FORMATS",
    "OutputFormat",
    "emit",
    "format_float",
    "round_sig",
]
