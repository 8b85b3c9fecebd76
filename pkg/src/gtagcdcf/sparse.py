"""Sparse coordinate matrices and the small dense helpers used by the factor model.

Latent factor matrices are plain ``float64`` numpy arrays of shape
``(d, n)``; column ``j`` is the latent vector of entity ``j``.
"""

from __future__ import annotations

from typing import Iterable, Iterator

import numpy as np
import scipy.sparse as sp


class SparseMatrix:
    """Immutable coordinate-format matrix of observed nonnegative entries.

    Entries are kept sorted by ``(row, col)`` so rows can be iterated through
    ``indptr`` without a second index. A stored entry plays the role of the
    indicator ``I_ij = 1``; absent entries are unobserved, not zero.

    Parameters
    ----------
    rows, cols : array-like of int
        Coordinates of the observed entries.
    values : array-like of float
        Observed values, all ``>= 0``.
    shape : tuple of int
        ``(n_rows, n_cols)``.
    """

    __slots__ = ("rows", "cols", "values", "shape", "_indptr")

    def __init__(self, rows, cols, values, shape: tuple[int, int]):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        values = np.asarray(values, dtype=np.float64).ravel()
        n_rows, n_cols = (int(s) for s in shape)
        if n_rows < 0 or n_cols < 0:
            raise ValueError(f"invalid shape {shape}")
        if not (len(rows) == len(cols) == len(values)):
            raise ValueError("rows, cols and values must have equal length")
        if len(rows):
            if rows.min() < 0 or rows.max() >= n_rows:
                raise IndexError("row index out of range")
            if cols.min() < 0 or cols.max() >= n_cols:
                raise IndexError("column index out of range")
            if not np.all(np.isfinite(values)):
                raise ValueError("values must be finite")
            if values.min() < 0:
                raise ValueError("values must be nonnegative")

        order = np.lexsort((cols, rows))
        rows, cols, values = rows[order], cols[order], values[order]
        if len(rows) > 1:
            dup = (rows[1:] == rows[:-1]) & (cols[1:] == cols[:-1])
            if dup.any():
                k = int(np.flatnonzero(dup)[0])
                raise ValueError(f"duplicate entry at ({rows[k]}, {cols[k]})")

        for arr in (rows, cols, values):
            arr.flags.writeable = False
        self.rows = rows
        self.cols = cols
        self.values = values
        self.shape = (n_rows, n_cols)
        self._indptr = None

    @classmethod
    def from_triplets(cls, triplets: Iterable[tuple[int, int, float]], shape) -> "SparseMatrix":
        triplets = list(triplets)
        if not triplets:
            return cls.empty(shape)
        r, c, v = zip(*triplets)
        return cls(r, c, v, shape)

    @classmethod
    def empty(cls, shape) -> "SparseMatrix":
        return cls(np.empty(0, np.int64), np.empty(0, np.int64), np.empty(0), shape)

    @classmethod
    def from_scipy(cls, m) -> "SparseMatrix":
        coo = sp.coo_matrix(m)
        coo.sum_duplicates()
        return cls(coo.row, coo.col, coo.data, coo.shape)

    @property
    def n_rows(self) -> int:
        return self.shape[0]

    @property
    def n_cols(self) -> int:
        return self.shape[1]

    @property
    def nnz(self) -> int:
        """Number of stored entries (``|A|``)."""
        return len(self.values)

    @property
    def indptr(self) -> np.ndarray:
        if self._indptr is None:
            ptr = np.zeros(self.n_rows + 1, dtype=np.int64)
            np.cumsum(np.bincount(self.rows, minlength=self.n_rows), out=ptr[1:])
            ptr.flags.writeable = False
            self._indptr = ptr
        return self._indptr

    def row(self, i: int) -> tuple[np.ndarray, np.ndarray]:
        """Column indices and values stored in row ``i``."""
        lo, hi = self.indptr[i], self.indptr[i + 1]
        return self.cols[lo:hi], self.values[lo:hi]

    def entries(self) -> Iterator[tuple[int, int, float]]:
        for r, c, v in zip(self.rows.tolist(), self.cols.tolist(), self.values.tolist()):
            yield r, c, v

    def max(self) -> float:
        return float(self.values.max()) if self.nnz else 0.0

    def with_values(self, values) -> "SparseMatrix":
        return SparseMatrix(self.rows, self.cols, values, self.shape)

    def select(self, mask) -> "SparseMatrix":
        """Keep the entries where ``mask`` is true, same shape."""
        mask = np.asarray(mask, dtype=bool)
        return SparseMatrix(self.rows[mask], self.cols[mask], self.values[mask], self.shape)

    def transpose(self) -> "SparseMatrix":
        return SparseMatrix(self.cols, self.rows, self.values, (self.n_cols, self.n_rows))

    def to_scipy(self) -> sp.csr_matrix:
        return sp.csr_matrix((self.values, (self.rows, self.cols)), shape=self.shape)

    def toarray(self) -> np.ndarray:
        out = np.zeros(self.shape)
        out[self.rows, self.cols] = self.values
        return out

    def __eq__(self, other) -> bool:
        if not isinstance(other, SparseMatrix):
            return NotImplemented
        return (
            self.shape == other.shape
            and np.array_equal(self.rows, other.rows)
            and np.array_equal(self.cols, other.cols)
            and np.array_equal(self.values, other.values)
        )

    __hash__ = None

    def __repr__(self) -> str:
        return f"SparseMatrix(shape={self.shape}, nnz={self.nnz})"


def normalize_by_max(m: SparseMatrix) -> tuple[SparseMatrix, float]:
    """Divide every stored value by the largest one.

    Returns the rescaled matrix and the divisor, which is needed to map
    predictions back to the original scale.
    """
    top = m.max()
    if m.nnz == 0 or top <= 0:
        raise ValueError("nothing to normalize")
    return m.with_values(m.values / top), top


def frobenius_norm_sq(m) -> float:
    m = np.asarray(m, dtype=np.float64)
    return float(np.sum(m * m))


def inner_product(a, b) -> float:
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError(f"dimension mismatch: {a.shape} vs {b.shape}")
    return float(a @ b)


def block_diag(blocks: list[SparseMatrix]) -> SparseMatrix:
    """Place matrices along the diagonal of a larger sparse matrix."""
    r_off = c_off = 0
    rows, cols, vals = [], [], []
    for b in blocks:
        rows.append(b.rows + r_off)
        cols.append(b.cols + c_off)
        vals.append(b.values)
        r_off += b.n_rows
        c_off += b.n_cols
    if not blocks:
        return SparseMatrix.empty((0, 0))
    return SparseMatrix(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (r_off, c_off))


def vstack(blocks: list[SparseMatrix]) -> SparseMatrix:
    """Stack matrices with equal column counts on top of each other."""
    if not blocks:
        return SparseMatrix.empty((0, 0))
    n_cols = blocks[0].n_cols
    if any(b.n_cols != n_cols for b in blocks):
        raise ValueError("column counts differ")
    r_off = 0
    rows, cols, vals = [], [], []
    for b in blocks:
        rows.append(b.rows + r_off)
        cols.append(b.cols)
        vals.append(b.values)
        r_off += b.n_rows
    return SparseMatrix(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (r_off, n_cols))
