"""Sparse nonnegative constraint matrices and MatrixMarket ingestion.

The matrix is kept in two synchronized layouts: row-major (for constraint
loads ``Ax``) and column-major (for per-coordinate gradient sums and
``A^T y``). Within a row or column, entries keep the order they were given
in, and every segment reduction goes through ``np.add.reduceat`` so that
results are deterministic and identical no matter which layout slice a
caller sums over.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    DimensionMismatch,
    DuplicateEntry,
    EmptyRowOrColumn,
    MatrixMarketFormatError,
    NegativeEntry,
)

MM_HEADER = "%%MatrixMarket matrix coordinate real general"


@dataclass(frozen=True, eq=False)
class SparseNonnegMatrix:
    """An m x n sparse matrix with strictly positive stored entries.

    ``ent_*`` hold the entries in their original insertion order;
    ``row_*``/``col_*`` are stable-sorted views (original order preserved
    within each row/column). Instances are immutable and safe to share.
    """

    m: int
    n: int
    ent_row: np.ndarray
    ent_col: np.ndarray
    ent_val: np.ndarray
    row_ptr: np.ndarray = field(repr=False)
    row_col: np.ndarray = field(repr=False)
    row_val: np.ndarray = field(repr=False)
    col_ptr: np.ndarray = field(repr=False)
    col_row: np.ndarray = field(repr=False)
    col_val: np.ndarray = field(repr=False)
    col_colidx: np.ndarray = field(repr=False)

    @property
    def nnz(self) -> int:
        return int(self.ent_val.size)

    @property
    def min_entry(self) -> float:
        return float(self.ent_val.min())

    @property
    def max_entry(self) -> float:
        return float(self.ent_val.max())

    def entries(self):
        """Yield (row, col, value) in original insertion order (0-based)."""
        for i, j, v in zip(self.ent_row, self.ent_col, self.ent_val):
            yield int(i), int(j), float(v)

    def to_dense(self) -> np.ndarray:
        dense = np.zeros((self.m, self.n))
        dense[self.ent_row, self.ent_col] = self.ent_val
        return dense

    def column(self, j: int) -> tuple[np.ndarray, np.ndarray]:
        """Incident rows and values of column ``j``, in column order."""
        lo, hi = self.col_ptr[j], self.col_ptr[j + 1]
        return self.col_row[lo:hi].copy(), self.col_val[lo:hi].copy()


def build_matrix(entries, m: int, n: int, drop_zeros: bool = False) -> SparseNonnegMatrix:
    """Build a validated matrix from (row, col, value) triples, 0-based.

    Rejects negative values, duplicate coordinates, out-of-range indices and
    empty rows/columns. Zero values are rejected unless ``drop_zeros``.
    """
    if m < 1 or n < 1:
        raise DimensionMismatch(f"matrix dimensions must be positive, got {m}x{n}")
    rows, cols, vals = [], [], []
    for i, j, v in entries:
        if not (0 <= i < m and 0 <= j < n):
            raise DimensionMismatch(f"entry ({i}, {j}) outside {m}x{n}")
        v = float(v)
        if v < 0.0 or not np.isfinite(v):
            raise NegativeEntry(f"entry ({i}, {j}) has invalid value {v}")
        if v == 0.0:
            if drop_zeros:
                continue
            raise NegativeEntry(f"entry ({i}, {j}) is zero; zeros are never stored")
        rows.append(i)
        cols.append(j)
        vals.append(v)
    if not vals:
        raise EmptyRowOrColumn("matrix has no positive entries")

    ent_row = np.asarray(rows, dtype=np.int64)
    ent_col = np.asarray(cols, dtype=np.int64)
    ent_val = np.asarray(vals, dtype=np.float64)

    keys = ent_row * np.int64(n) + ent_col
    if np.unique(keys).size != keys.size:
        raise DuplicateEntry("duplicate (row, col) coordinates")

    row_counts = np.bincount(ent_row, minlength=m)
    col_counts = np.bincount(ent_col, minlength=n)
    if (row_counts == 0).any():
        empty = int(np.flatnonzero(row_counts == 0)[0])
        raise EmptyRowOrColumn(f"row {empty} has no entries")
    if (col_counts == 0).any():
        empty = int(np.flatnonzero(col_counts == 0)[0])
        raise EmptyRowOrColumn(f"column {empty} has no entries")

    # stable sorts keep insertion order inside each row/column
    rorder = np.argsort(ent_row, kind="stable")
    corder = np.argsort(ent_col, kind="stable")
    row_ptr = np.zeros(m + 1, dtype=np.int64)
    np.cumsum(row_counts, out=row_ptr[1:])
    col_ptr = np.zeros(n + 1, dtype=np.int64)
    np.cumsum(col_counts, out=col_ptr[1:])

    return SparseNonnegMatrix(
        m=m,
        n=n,
        ent_row=ent_row,
        ent_col=ent_col,
        ent_val=ent_val,
        row_ptr=row_ptr,
        row_col=ent_col[rorder],
        row_val=ent_val[rorder],
        col_ptr=col_ptr,
        col_row=ent_row[corder],
        col_val=ent_val[corder],
        col_colidx=ent_col[corder],
    )


def from_dense(dense) -> SparseNonnegMatrix:
    dense = np.asarray(dense, dtype=np.float64)
    if dense.ndim != 2:
        raise DimensionMismatch("expected a 2-d array")
    m, n = dense.shape
    ij = np.argwhere(dense != 0.0)
    entries = [(int(i), int(j), float(dense[i, j])) for i, j in ij]
    return build_matrix(entries, m, n)


def constraint_loads(matrix: SparseNonnegMatrix, x: np.ndarray) -> np.ndarray:
    """Exact sparse product ``Ax``, rows summed in stored entry order."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (matrix.n,):
        raise DimensionMismatch(f"expected vector of length {matrix.n}, got {x.shape}")
    terms = matrix.row_val * x[matrix.row_col]
    return np.add.reduceat(terms, matrix.row_ptr[:-1])


def column_loads(matrix: SparseNonnegMatrix, y: np.ndarray) -> np.ndarray:
    """Exact sparse product ``A^T y``, columns summed in stored entry order."""
    y = np.asarray(y, dtype=np.float64)
    if y.shape != (matrix.m,):
        raise DimensionMismatch(f"expected vector of length {matrix.m}, got {y.shape}")
    terms = matrix.col_val * y[matrix.col_row]
    return np.add.reduceat(terms, matrix.col_ptr[:-1])


def read_matrix_market(path) -> tuple[list[tuple[int, int, float]], int, int]:
    """Parse a MatrixMarket coordinate file into 0-based raw entries.

    Only the ``coordinate real general`` flavor is accepted. Explicit zeros
    and duplicate coordinates are rejected. Returns (entries, m, n); values
    are returned unvalidated so the caller's standardization can report
    negative entries through its own contract.
    """
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().rstrip("\n").rstrip("\r")
        if header.strip().lower() != MM_HEADER.lower():
            raise MatrixMarketFormatError(
                f"unsupported MatrixMarket header {header!r}; expected {MM_HEADER!r}"
            )
        size_line = None
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            size_line = stripped
            break
        if size_line is None:
            raise MatrixMarketFormatError("missing size line")
        parts = size_line.split()
        if len(parts) != 3:
            raise MatrixMarketFormatError(f"malformed size line {size_line!r}")
        try:
            m, n, nnz = int(parts[0]), int(parts[1]), int(parts[2])
        except ValueError as exc:
            raise MatrixMarketFormatError(f"malformed size line {size_line!r}") from exc

        entries: list[tuple[int, int, float]] = []
        seen: set[tuple[int, int]] = set()
        for line in fh:
            stripped = line.strip()
            if not stripped or stripped.startswith("%"):
                continue
            parts = stripped.split()
            if len(parts) != 3:
                raise MatrixMarketFormatError(f"malformed entry line {stripped!r}")
            try:
                i, j, v = int(parts[0]), int(parts[1]), float(parts[2])
            except ValueError as exc:
                raise MatrixMarketFormatError(f"malformed entry line {stripped!r}") from exc
            if not (1 <= i <= m and 1 <= j <= n):
                raise MatrixMarketFormatError(f"entry ({i}, {j}) outside declared {m}x{n}")
            if v == 0.0:
                raise MatrixMarketFormatError(f"explicit zero at ({i}, {j})")
            if (i, j) in seen:
                raise DuplicateEntry(f"duplicate entry at ({i}, {j})")
            seen.add((i, j))
            entries.append((i - 1, j - 1, v))
        if len(entries) != nnz:
            raise MatrixMarketFormatError(
                f"size line declares {nnz} entries, file has {len(entries)}"
            )
    return entries, m, n


def write_matrix_market(path, matrix: SparseNonnegMatrix) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(MM_HEADER + "\n")
        fh.write(f"{matrix.m} {matrix.n} {matrix.nnz}\n")
        for i, j, v in matrix.entries():
            fh.write(f"{i + 1} {j + 1} {v!r}\n")
