"""CSV emission and parsing with byte-exact round trips.

Floats are written with 17 significant digits, integers as integers and
missing values as empty fields, with ``\\n`` line endings.
"""

from __future__ import annotations

import csv
import io
import math

from .errors import InvalidInputError

SCHEMAS = {
    "truth": ("step", "x", "y", "dx", "dy", "b"),
    "filter": ("step", "est_x", "est_y", "truth_x", "truth_y", "err_x", "err_y"),
    "particles": ("step", "particle", "x", "y", "dx", "dy", "phase"),
    "table1": ("step", "sd_x", "sd_y", "accepted"),
    "table2": ("step", "mean_x", "sd_x", "mean_y", "sd_y", "runs", "particles"),
    "table3": ("ratio", "mean_D", "se_D", "runs", "failures"),
    "fig1": ("series", "step", "x", "y"),
    "sigma": ("sigma", "ratio", "crossings"),
}


def format_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return str(int(v))
    if isinstance(v, int) or (hasattr(v, "dtype") and v.dtype.kind in "iu"):
        return str(int(v))
    if isinstance(v, str):
        return v
    v = float(v)
    if math.isnan(v):
        return ""
    return "%.17g" % v


def parse_value(text: str):
    if text == "":
        return None
    try:
        value = int(text)
        # "-0" is a float that happened to print without a point
        if str(value) == text:
            return value
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def dumps(header, rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        if len(row) != len(header):
            raise ValueError(f"row has {len(row)} fields, header has {len(header)}")
        w.writerow([format_value(v) for v in row])
    return buf.getvalue()


def loads(text: str):
    """``(header, rows)`` with values parsed back to int, float, str or None."""
    reader = csv.reader(io.StringIO(text))
    header = tuple(next(reader))
    return header, [[parse_value(v) for v in row] for row in reader]


def write(path, header, rows) -> str:
    text = dumps(header, rows)
    if path is None or path == "-":
        import sys

        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)
    return text


def read(path):
    with open(path, newline="") as fh:
        return loads(fh.read())


def read_table(path, schema: str):
    header, rows = read(path)
    expected = SCHEMAS[schema]
    if header != expected:
        raise InvalidInputError(f"{path}: expected columns {','.join(expected)}, got {','.join(header)}")
    return [dict(zip(header, row)) for row in rows]
