"""CSV reading and writing for time series, spectra and sweep tables.

Files carry a header row. Numbers are written with 16 significant digits
and every file is written to a temporary name first, then renamed, so a
failed run never leaves a half-written table behind.
"""

import csv
import os
import tempfile

import numpy as np

from .core import TimeSeries
from .errors import DataFileError, InvalidInputError

FLOAT_FORMAT = "{:.16g}"
UNIFORMITY_TOL = 1e-6
TIME_NAMES = ("t", "time")
VALUE_NAMES = ("y", "value", "x")


def format_number(value):
    if isinstance(value, (bool, np.bool_)):
        return str(bool(value))
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return FLOAT_FORMAT.format(float(value))
    return str(value)


def atomic_write_text(path, text):
    """Write ``text`` to ``path`` through a temporary file in the same directory."""
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(prefix=".tmp-", dir=directory)
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_table(path, header, rows):
    """Write ``rows`` (iterables matching ``header``) as CSV."""
    lines = [",".join(header)]
    for row in rows:
        row = list(row)
        if len(row) != len(header):
            raise InvalidInputError(f"row has {len(row)} fields, header has {len(header)}")
        lines.append(",".join(format_number(v) for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def write_columns(path, columns):
    """Write a dict of equal-length arrays as CSV columns, in dict order."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    if len({a.size for a in arrays}) > 1:
        raise InvalidInputError("columns differ in length")
    write_table(path, names, zip(*arrays))


def read_table(path):
    """Read a numeric CSV with a header row; returns ``{name: float array}``.

    Raises :class:`DataFileError` with the line number of the first bad row.
    """
    try:
        fh = open(path, newline="")
    except OSError as exc:
        raise DataFileError(f"cannot open file ({exc.strerror})", path) from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise DataFileError("file is empty", path, 1) from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise DataFileError(f"unreadable header ({exc})", path, 1) from exc
        header = [h.strip() for h in header]
        if not header or any(h == "" for h in header):
            raise DataFileError("header has empty column names", path, 1)
        if len(set(header)) != len(header):
            raise DataFileError("header has duplicate column names", path, 1)
        try:
            float(header[0])
        except ValueError:
            pass
        else:
            raise DataFileError("a header row is required, found numbers", path, 1)
        rows = []
        try:
            for row in reader:
                line = reader.line_num
                if not row or all(c.strip() == "" for c in row):
                    continue
                if len(row) != len(header):
                    raise DataFileError(
                        f"expected {len(header)} fields, found {len(row)}", path, line
                    )
                try:
                    rows.append([float(c) for c in row])
                except ValueError:
                    raise DataFileError(f"non-numeric field in {row!r}", path, line) from None
        except (csv.Error, UnicodeDecodeError) as exc:
            raise DataFileError(f"malformed row ({exc})", path, reader.line_num) from exc
    if not rows:
        raise DataFileError("no data rows after the header", path, 2)
    data = np.array(rows, dtype=float).T
    return {name: data[i] for i, name in enumerate(header)}


def _pick(columns, wanted, candidates, exclude, path):
    if wanted is not None:
        if wanted not in columns:
            raise DataFileError(f"no column named {wanted!r} (have {', '.join(columns)})", path)
        return wanted
    for name in candidates:
        if name in columns and name not in exclude:
            return name
    rest = [c for c in columns if c not in exclude]
    if not rest:
        raise DataFileError("no value column left", path)
    return rest[0]


def series_from_columns(columns, dt=None, time_col=None, value_col=None, path=None):
    """Build a :class:`TimeSeries` from parsed columns.

    With ``dt`` the value column is ``value_col`` or the only/first column;
    without it a time column (``time_col``, or one named ``t``/``time``)
    must be present and uniformly spaced to ``UNIFORMITY_TOL`` relative.
    """
    if dt is not None:
        if not dt > 0:
            raise InvalidInputError(f"dt must be positive, got {dt}")
        exclude = () if time_col is None else (time_col,)
        name = _pick(columns, value_col, VALUE_NAMES, exclude, path)
        if len(columns) > 1 and value_col is None and name not in VALUE_NAMES:
            raise DataFileError(
                "several columns and no value column chosen; pass --value-col", path
            )
        return TimeSeries(columns[name], dt)

    if time_col is None:
        time_col = next((n for n in TIME_NAMES if n in columns), None)
        if time_col is None:
            raise DataFileError("no time column found; pass --dt or --time-col", path)
    elif time_col not in columns:
        raise DataFileError(f"no column named {time_col!r}", path)
    name = _pick(columns, value_col, VALUE_NAMES, (time_col,), path)
    t = columns[time_col]
    if t.size < 2:
        raise DataFileError("need at least two samples to infer dt", path)
    steps = np.diff(t)
    step = float(np.mean(steps))
    if not step > 0:
        raise DataFileError("time column must increase", path)
    spread = float(np.max(np.abs(steps - step))) / step
    if spread > UNIFORMITY_TOL:
        # report the first step that departs from the typical (median) one
        typical = float(np.median(steps))
        off = np.abs(steps - typical) > UNIFORMITY_TOL * abs(typical)
        bad = int(np.argmax(off)) if off.any() else int(np.argmax(np.abs(steps - step)))
        # +2: header line, and the step ending at sample bad+1
        raise DataFileError(
            f"time column is not uniformly sampled (relative spread {spread:.3g})",
            path, bad + 3,
        )
    return TimeSeries(columns[name], step)


def read_series(path, dt=None, time_col=None, value_col=None):
    """Read a CSV file into a :class:`TimeSeries`; returns ``(series, columns)``."""
    columns = read_table(path)
    try:
        series = series_from_columns(columns, dt, time_col, value_col, path)
    except InvalidInputError as exc:
        raise DataFileError(str(exc), path) from exc
    return series, columns
