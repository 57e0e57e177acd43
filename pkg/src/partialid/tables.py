"""CSV ingestion and output for column-oriented datasets."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np

__all__ = ['DataError', 'read_table', 'write_table', 'numeric_matrix', 'binary_column']

MISSING = frozenset({'', 'na', 'nan', 'null', 'none'})


class DataError(ValueError):
    """Malformed input data: missing values, bad types or shapes."""


def read_table(path) -> dict:
    """Read a headed CSV into ordered columns.

    Columns whose every entry parses as a float become float arrays; the rest
    stay as string arrays. Missing values are an error.
    """
    path = Path(path)
    with open(path, newline='') as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f'{path}: empty file') from None
        rows = list(reader)
    if len(set(header)) != len(header):
        raise DataError(f'{path}: duplicate column names')
    cols = {h: [] for h in header}
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise DataError(f'{path}: line {i} has {len(row)} fields, expected {len(header)}')
        for h, v in zip(header, row):
            if v.strip().lower() in MISSING:
                raise DataError(f'{path}: missing value in column {h!r} at line {i}')
            cols[h].append(v)
    out = {}
    for h, vals in cols.items():
        try:
            out[h] = np.array([float(v) for v in vals])
        except ValueError:
            out[h] = np.array(vals)
    return out


def write_table(path, columns: dict):
    """Write equal-length columns as a headed CSV; floats use ``repr``."""
    names = list(columns)
    arrays = [np.asarray(columns[n]) for n in names]
    n = {len(a) for a in arrays}
    if len(n) > 1:
        raise ValueError('columns differ in length')

    def fmt(v):
        if isinstance(v, (float, np.floating)):
            return repr(float(v))
        if isinstance(v, np.integer):
            return int(v)
        return v

    with open(path, 'w', newline='') as f:
        w = csv.writer(f)
        w.writerow(names)
        for row in zip(*arrays):
            w.writerow([fmt(v) for v in row])


def numeric_matrix(table: dict, names) -> np.ndarray:
    """Stack named numeric columns into an (n, p) float matrix."""
    cols = []
    for n in names:
        if n not in table:
            raise DataError(f'column {n!r} not found')
        a = table[n]
        if a.dtype.kind not in 'fiu':
            raise DataError(f'column {n!r} is not numeric')
        cols.append(a.astype(float))
    return np.column_stack(cols)


def binary_column(table: dict, name: str) -> np.ndarray:
    if name not in table:
        raise DataError(f'response column {name!r} not found')
    a = table[name]
    if a.dtype.kind not in 'fiu' or not np.all((a == 0) | (a == 1)):
        raise DataError(f'column {name!r} must be binary 0/1')
    return a.astype(np.int64)
