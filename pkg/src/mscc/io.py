"""File formats: matrices, patch groupings, subject tables, result tables.

Binary matrix layout (little-endian)::

    b"MTDLMAT1" | uint64 rows | uint64 cols | rows*cols float64, column-major

CSV matrices hold one sample per row, i.e. the transpose of the in-memory
``(p, n)`` layout; a non-numeric first row is treated as a header.
"""
from __future__ import annotations

import csv
import json
import math
import struct
from pathlib import Path

import numpy as np

from .encode import PatchGrouping, SubjectFeatureTable

MAGIC = b"MTDLMAT1"
_HEADER = struct.Struct("<8sQQ")


class FormatError(ValueError):
    pass


def fmt(x):
    """Shortest text that parses back to the same float."""
    return repr(float(x))


def save_matrix(path, X, fmt_=None):
    """Write ``X`` (p, n) as binary, or as CSV when the suffix is ``.csv``."""
    path = Path(path)
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("matrix must be 2-D")
    kind = fmt_ or ("csv" if path.suffix.lower() == ".csv" else "binary")
    if kind == "csv":
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            for col in X.T:
                w.writerow([fmt(v) for v in col])
    elif kind == "binary":
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(MAGIC, X.shape[0], X.shape[1]))
            fh.write(X.astype("<f8").ravel(order="F").tobytes())
    else:
        raise ValueError(f"unknown matrix format {kind!r}")


def _is_number(s):
    try:
        float(s)
    except ValueError:
        return False
    return True


def load_matrix(path):
    """Read a matrix written by :func:`save_matrix` (format sniffed from content)."""
    raw = Path(path).read_bytes()
    if not raw.strip():
        raise FormatError(f"{path}: empty file")
    if raw.startswith(MAGIC):
        if len(raw) < _HEADER.size:
            raise FormatError(f"{path}: truncated header")
        _, rows, cols = _HEADER.unpack_from(raw)
        body = raw[_HEADER.size:]
        if len(body) != rows * cols * 8:
            raise FormatError(f"{path}: expected {rows * cols} values, found {len(body) // 8}")
        flat = np.frombuffer(body, dtype="<f8").astype(np.float64)
        return flat.reshape((rows, cols), order="F")
    rows = [r for r in csv.reader(raw.decode().splitlines()) if r]
    if rows and not all(_is_number(v) for v in rows[0]):
        rows = rows[1:]
    if not rows:
        raise FormatError(f"{path}: no data rows")
    width = len(rows[0])
    if any(len(r) != width for r in rows):
        raise FormatError(f"{path}: ragged rows")
    try:
        data = np.array([[float(v) for v in r] for r in rows])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return np.asfortranarray(data.T)


def save_grouping(path, grouping):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(["subject"])
        w.writerows([s] for s in grouping.subject_of)


def load_grouping(path):
    """One subject identifier per patch, in column order, under a ``subject`` header."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows or rows[0][0].strip().lower() != "subject":
        raise FormatError(f"{path}: grouping files start with a 'subject' header")
    return PatchGrouping.from_labels([r[0].strip() for r in rows[1:]])


def save_table(path, subjects, values, columns, index_name="subject"):
    values = np.asarray(values, dtype=np.float64)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow([index_name, *columns])
        for s, row in zip(subjects, values):
            w.writerow([s, *(fmt(v) for v in row)])


def load_table(path):
    """Read ``subject,<col>...`` CSV; returns (subjects, values, column names)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if len(rows) < 2:
        raise FormatError(f"{path}: needs a header and at least one row")
    header, body = rows[0], rows[1:]
    try:
        values = np.array([[float(v) for v in r[1:]] for r in body])
    except ValueError as exc:
        raise FormatError(f"{path}: {exc}") from None
    return [r[0] for r in body], values.reshape(len(body), len(header) - 1), header[1:]


def save_features(path, table):
    save_table(path, table.subjects, table.features,
               [f"f{j}" for j in range(table.features.shape[1])])


def load_features(path):
    subjects, values, _ = load_table(path)
    return SubjectFeatureTable(subjects, values)


RESULT_COLUMNS = ("metric", "task", "mean", "std")


def write_results(path, rows):
    """Rows of ``(metric, task, mean, std)``."""
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(RESULT_COLUMNS)
        for metric, task, mean, std in rows:
            w.writerow([metric, task, fmt(mean), fmt(std)])


def read_results(path):
    with open(path, newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != RESULT_COLUMNS:
            raise FormatError(f"{path}: expected columns {','.join(RESULT_COLUMNS)}")
        return [(r["metric"], r["task"], float(r["mean"]), float(r["std"])) for r in reader]


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.generic):
        return obj.item()
    if isinstance(obj, float) and not math.isfinite(obj):
        return str(obj)
    return obj


def write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(_jsonable(obj), fh, indent=2, sort_keys=True)
        fh.write("\n")


def read_json(path):
    with open(path) as fh:
        return json.load(fh)
