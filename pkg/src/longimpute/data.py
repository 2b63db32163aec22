"""Sparse longitudinal data: containers, projections, ingestion and splitting."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .basis import TimeGrid, snap_to_grid
from .errors import ConfigurationError, DataError, DimensionError, RangeError

__all__ = [
    "ObservationRecord",
    "SparseMatrix",
    "SplitAssignment",
    "discretize",
    "project",
    "project_complement",
    "split",
    "read_long_csv",
    "write_long_csv",
    "write_wide_csv",
    "records_from_matrix",
]

LONG_HEADER = ("subject_id", "variable", "time", "value")


@dataclass(frozen=True)
class ObservationRecord:
    subject_id: str
    variable: str
    time: float
    value: float

    def __post_init__(self):
        if not np.isfinite(self.time):
            raise DataError(f"non-finite time in record {self}")
        if not np.isfinite(self.value):
            raise DataError(f"non-finite value in record {self}")


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class SparseMatrix:
    """An ``N x T`` matrix observed only on the index set Omega.

    Entries are held in coordinate form, sorted by (row, col), with no
    duplicate cells. ``grid`` may be ``None`` for stacked multi-block layouts.
    """

    n_rows: int
    n_cols: int
    rows: np.ndarray
    cols: np.ndarray
    values: np.ndarray
    grid: TimeGrid | None = None
    _indptr: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        rows = np.asarray(self.rows, dtype=np.intp).ravel()
        cols = np.asarray(self.cols, dtype=np.intp).ravel()
        vals = np.asarray(self.values, dtype=float).ravel()
        if not (rows.size == cols.size == vals.size):
            raise DimensionError("rows, cols and values must have equal length")
        if self.grid is not None and self.grid.T != self.n_cols:
            raise DimensionError(f"grid has T={self.grid.T} but matrix has {self.n_cols} columns")
        if rows.size:
            if rows.min() < 0 or rows.max() >= self.n_rows or cols.min() < 0 or cols.max() >= self.n_cols:
                raise DimensionError("entry index outside matrix shape")
            if not np.all(np.isfinite(vals)):
                raise DataError("observed values must be finite")
        order = np.lexsort((cols, rows))
        rows, cols, vals = rows[order], cols[order], vals[order]
        if rows.size > 1:
            dup = (np.diff(rows) == 0) & (np.diff(cols) == 0)
            if dup.any():
                i = np.flatnonzero(dup)[0]
                raise DataError(f"duplicate cell ({rows[i]}, {cols[i]})")
        object.__setattr__(self, "n_rows", int(self.n_rows))
        object.__setattr__(self, "n_cols", int(self.n_cols))
        object.__setattr__(self, "rows", _readonly(rows, np.intp))
        object.__setattr__(self, "cols", _readonly(cols, np.intp))
        object.__setattr__(self, "values", _readonly(vals, float))
        indptr = np.zeros(self.n_rows + 1, dtype=np.intp)
        np.cumsum(np.bincount(rows, minlength=self.n_rows), out=indptr[1:])
        object.__setattr__(self, "_indptr", _readonly(indptr, np.intp))

    @classmethod
    def from_dense(cls, dense, mask=None, grid: TimeGrid | None = None) -> "SparseMatrix":
        """Observed wherever ``mask`` is true (default: wherever ``dense`` is not NaN)."""
        dense = np.asarray(dense, dtype=float)
        if mask is None:
            mask = ~np.isnan(dense)
        r, c = np.nonzero(mask)
        return cls(dense.shape[0], dense.shape[1], r, c, dense[r, c], grid)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def nnz(self) -> int:
        return int(self.values.size)

    @property
    def indptr(self) -> np.ndarray:
        return self._indptr

    @property
    def entries(self) -> dict[tuple[int, int], float]:
        return {(int(i), int(j)): float(v) for i, j, v in zip(self.rows, self.cols, self.values)}

    def mask(self) -> np.ndarray:
        m = np.zeros(self.shape, dtype=bool)
        m[self.rows, self.cols] = True
        return m

    def to_dense(self, fill: float = np.nan) -> np.ndarray:
        out = np.full(self.shape, fill, dtype=float)
        out[self.rows, self.cols] = self.values
        return out

    def row_counts(self) -> np.ndarray:
        return np.diff(self._indptr)

    def subset(self, index) -> "SparseMatrix":
        """Keep the entries selected by a boolean mask or integer index array."""
        index = np.asarray(index)
        return SparseMatrix(
            self.n_rows, self.n_cols, self.rows[index], self.cols[index], self.values[index], self.grid
        )

    def with_values(self, values) -> "SparseMatrix":
        return SparseMatrix(self.n_rows, self.n_cols, self.rows, self.cols, values, self.grid)

    def merge(self, other: "SparseMatrix") -> "SparseMatrix":
        """Union of entries; ``other`` wins on shared cells and may add rows."""
        if other.n_cols != self.n_cols:
            raise DimensionError("cannot merge matrices with different column counts")
        n_rows = max(self.n_rows, other.n_rows)
        key_self = self.rows * self.n_cols + self.cols
        key_other = other.rows * self.n_cols + other.cols
        keep = ~np.isin(key_self, key_other)
        return SparseMatrix(
            n_rows,
            self.n_cols,
            np.r_[self.rows[keep], other.rows],
            np.r_[self.cols[keep], other.cols],
            np.r_[self.values[keep], other.values],
            self.grid,
        )

    def append_rows(self, other: "SparseMatrix") -> "SparseMatrix":
        if other.n_cols != self.n_cols:
            raise DimensionError("cannot append rows with a different column count")
        return SparseMatrix(
            self.n_rows + other.n_rows,
            self.n_cols,
            np.r_[self.rows, other.rows + self.n_rows],
            np.r_[self.cols, other.cols],
            np.r_[self.values, other.values],
            self.grid,
        )


def project(Y: SparseMatrix, dense) -> np.ndarray:
    """Keep ``dense`` on the observed cells of ``Y`` and zero it elsewhere."""
    dense = np.asarray(dense, dtype=float)
    if dense.shape != Y.shape:
        raise DimensionError(f"shape {dense.shape} does not match {Y.shape}")
    out = np.zeros_like(dense)
    out[Y.rows, Y.cols] = dense[Y.rows, Y.cols]
    return out


def project_complement(Y: SparseMatrix, dense) -> np.ndarray:
    dense = np.asarray(dense, dtype=float)
    return dense - project(Y, dense)


def discretize(
    records: Sequence[ObservationRecord], grid: TimeGrid
) -> tuple[dict[str, SparseMatrix], list[str]]:
    """Snap records onto ``grid`` and build one matrix per variable.

    Subjects get row indices in order of first appearance across all records,
    so matrices for different variables share rows. Several records of one
    subject landing in the same cell are averaged.
    """
    if len(records) == 0:
        raise DataError("no records to discretize")
    subjects: dict[str, int] = {}
    for rec in records:
        subjects.setdefault(rec.subject_id, len(subjects))
    times = np.array([r.time for r in records], dtype=float)
    try:
        cols = snap_to_grid(times, grid)
    except RangeError:
        bad = next(r for r in records if not grid.t_min <= r.time <= grid.t_max)
        raise RangeError(
            f"record {bad.subject_id},{bad.variable},{bad.time},{bad.value} "
            f"outside grid range [{grid.t_min}, {grid.t_max}]"
        ) from None
    rows = np.array([subjects[r.subject_id] for r in records], dtype=np.intp)
    vals = np.array([r.value for r in records], dtype=float)
    variables: dict[str, list[int]] = {}
    for k, rec in enumerate(records):
        variables.setdefault(rec.variable, []).append(k)

    N = len(subjects)
    out = {}
    for var, idx in variables.items():
        idx = np.asarray(idx)
        key = rows[idx] * grid.T + cols[idx]
        uniq, inv = np.unique(key, return_inverse=True)
        sums = np.bincount(inv, weights=vals[idx])
        counts = np.bincount(inv)
        out[var] = SparseMatrix(N, grid.T, uniq // grid.T, uniq % grid.T, sums / counts, grid)
    return out, list(subjects)


def records_from_matrix(
    Y: SparseMatrix, subject_ids: Sequence[str], variable: str
) -> list[ObservationRecord]:
    if Y.grid is None:
        raise DataError("matrix has no time grid")
    pts = Y.grid.points
    return [
        ObservationRecord(subject_ids[i], variable, float(pts[j]), float(v))
        for i, j, v in zip(Y.rows, Y.cols, Y.values)
    ]


@dataclass(frozen=True)
class SplitAssignment:
    """Partition of the observed entries (positions into ``Y.values``)."""

    train: np.ndarray
    validation: np.ndarray
    test: np.ndarray

    def pairs(self, Y: SparseMatrix, part: str) -> set[tuple[int, int]]:
        idx = getattr(self, part)
        return {(int(Y.rows[k]), int(Y.cols[k])) for k in idx}

    def matrix(self, Y: SparseMatrix, *parts: str) -> SparseMatrix:
        idx = np.concatenate([getattr(self, p) for p in parts]) if parts else np.array([], np.intp)
        return Y.subset(np.sort(idx).astype(np.intp))


def _largest_remainder(n: int, fractions: Sequence[float]) -> list[int]:
    raw = np.asarray(fractions, dtype=float) * n
    base = np.floor(raw).astype(int)
    short = n - int(base.sum())
    # stable order: biggest remainder first, earlier part on ties
    order = sorted(range(len(raw)), key=lambda i: (-(raw[i] - base[i]), i))
    for i in order[:short]:
        base[i] += 1
    return [int(b) for b in base]


def split(
    Y: SparseMatrix,
    fractions: Sequence[float] = (0.81, 0.09, 0.10),
    rng_seed: int = 0,
    min_visits: int = 1,
) -> SplitAssignment:
    """Random train/validation/test partition of the observed entries.

    Test entries are drawn only from rows with at least ``min_visits``
    observations; ``min_visits=1`` lifts that restriction.
    """
    fr = [float(f) for f in fractions]
    if len(fr) != 3 or any(f < 0 for f in fr) or not np.isclose(sum(fr), 1.0, atol=1e-9):
        raise ConfigurationError(f"fractions must be three non-negative numbers summing to 1, got {fractions}")
    n = Y.nnz
    n_train, n_val, n_test = _largest_remainder(n, fr)
    rng = np.random.default_rng(rng_seed)

    eligible = np.flatnonzero(Y.row_counts()[Y.rows] >= max(int(min_visits), 1))
    if n_test > 0 and eligible.size == 0:
        raise ConfigurationError(f"no subject has at least {min_visits} observations to draw test entries from")
    if n_test > eligible.size:
        raise ConfigurationError(
            f"test set needs {n_test} entries but only {eligible.size} come from subjects "
            f"with at least {min_visits} observations"
        )
    test = np.sort(rng.choice(eligible, size=n_test, replace=False)) if n_test else np.array([], np.intp)
    rest = np.setdiff1d(np.arange(n), test)
    perm = rng.permutation(rest)
    validation = np.sort(perm[:n_val])
    train = np.sort(perm[n_val:])
    return SplitAssignment(train.astype(np.intp), validation.astype(np.intp), test.astype(np.intp))


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def read_long_csv(path_or_buffer) -> list[ObservationRecord]:
    """Parse ``subject_id,variable,time,value`` rows; errors carry line numbers."""
    if isinstance(path_or_buffer, (str, Path)):
        with open(path_or_buffer, newline="", encoding="utf-8") as fh:
            return _parse_long(fh)
    return _parse_long(path_or_buffer)


def _parse_long(fh) -> list[ObservationRecord]:
    reader = csv.reader(fh)
    try:
        header = next(reader)
    except StopIteration:
        raise DataError("line 1: empty file, expected header " + ",".join(LONG_HEADER)) from None
    header = [h.strip() for h in header]
    if tuple(header) != LONG_HEADER:
        raise DataError(f"line 1: expected header {','.join(LONG_HEADER)}, got {','.join(header)}")
    out = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 4:
            raise DataError(f"line {line}: expected 4 fields, got {len(row)}")
        sid, var, t, v = (c.strip() for c in row)
        try:
            rec = ObservationRecord(sid, var, float(t), float(v))
        except ValueError as exc:
            raise DataError(f"line {line}: {exc}") from None
        out.append(rec)
    return out


def write_long_csv(path, records: Iterable[ObservationRecord]) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(LONG_HEADER)
        for r in records:
            w.writerow([r.subject_id, r.variable, repr(float(r.time)), repr(float(r.value))])


def write_wide_csv(path, curves, subject_ids: Sequence[str], grid_points) -> None:
    """One row per subject, one column per grid point."""
    curves = np.asarray(curves, dtype=float)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["subject_id"] + [repr(float(t)) for t in grid_points])
        for sid, row in zip(subject_ids, curves):
            w.writerow([sid] + [repr(float(x)) for x in row])


def read_wide_csv(path) -> tuple[list[str], np.ndarray, np.ndarray]:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        times = np.array([float(h) for h in header[1:]])
        ids, rows = [], []
        for row in reader:
            if not row:
                continue
            ids.append(row[0])
            rows.append([float(x) for x in row[1:]])
    return ids, np.array(rows, dtype=float).reshape(len(ids), len(times)), times


def dump_long_csv(records: Iterable[ObservationRecord]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(LONG_HEADER)
    for r in records:
        w.writerow([r.subject_id, r.variable, repr(float(r.time)), repr(float(r.value))])
    return buf.getvalue()
