import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings
from hypothesis import strategies as st

from gtagcdcf.sparse import (
    SparseMatrix,
    block_diag,
    frobenius_norm_sq,
    inner_product,
    normalize_by_max,
    vstack,
)


def test_entries_sorted_by_row_then_col():
    m = SparseMatrix([1, 0, 1], [0, 2, 1], [3.0, 1.0, 2.0], (2, 3))
    assert list(m.entries()) == [(0, 2, 1.0), (1, 0, 3.0), (1, 1, 2.0)]
    assert m.indptr.tolist() == [0, 1, 3]


@pytest.mark.parametrize("rows,cols,vals,exc", [
    ([0, 0], [1, 1], [1.0, 2.0], ValueError),
    ([0], [0], [-1.0], ValueError),
    ([0], [0], [np.nan], ValueError),
    ([2], [0], [1.0], IndexError),
    ([0], [5], [1.0], IndexError),
    ([0, 1], [0], [1.0], ValueError),
])
def test_rejects_bad_input(rows, cols, vals, exc):
    with pytest.raises(exc):
        SparseMatrix(rows, cols, vals, (2, 3))


def test_immutable():
    m = SparseMatrix([0], [0], [1.0], (1, 1))
    with pytest.raises(ValueError):
        m.values[0] = 3.0


def test_normalize_by_max():
    m = SparseMatrix.from_triplets([(0, 0, 5.0), (1, 2, 2.5)], (2, 3))
    n, top = normalize_by_max(m)
    assert top == 5.0
    assert list(n.entries()) == [(0, 0, 1.0), (1, 2, 0.5)]


def test_normalize_identity_case():
    m = SparseMatrix.from_triplets([(0, 0, 1.0)], (1, 1))
    n, top = normalize_by_max(m)
    assert n == m and top == 1.0


def test_normalize_half_star_scale():
    vals = np.arange(1, 11) / 2.0
    m = SparseMatrix(np.arange(10), np.zeros(10), vals, (10, 1))
    n, top = normalize_by_max(m)
    assert top == 5.0
    np.testing.assert_allclose(n.values, np.arange(1, 11) / 10.0)


@pytest.mark.parametrize("m", [SparseMatrix.empty((2, 2)), SparseMatrix([0], [0], [0.0], (1, 1))])
def test_normalize_nothing(m):
    with pytest.raises(ValueError, match="nothing to normalize"):
        normalize_by_max(m)


@pytest.mark.parametrize("x,expected", [
    (np.zeros((2, 2)), 0.0),
    (np.diag([1.0, 1.0, 0.0]), 2.0),
    (np.array([[1.0, 2.0], [3.0, 4.0]]), 30.0),
])
def test_frobenius_norm_sq(x, expected):
    assert frobenius_norm_sq(x) == expected


@pytest.mark.parametrize("a,b,expected", [
    ([1, 0, 0], [0, 1, 0], 0.0),
    ([1, 2], [3, 4], 11.0),
    ([0.5, 0.5], [0.5, 0.5], 0.5),
])
def test_inner_product(a, b, expected):
    assert inner_product(a, b) == expected


def test_inner_product_mismatch():
    with pytest.raises(ValueError):
        inner_product([1, 2], [1, 2, 3])


def test_block_diag_offsets():
    a = SparseMatrix.from_triplets([(0, 0, 1.0), (1, 1, 2.0)], (2, 2))
    b = SparseMatrix.from_triplets([(0, 0, 3.0), (2, 0, 4.0)], (3, 1))
    out = block_diag([a, b])
    assert out.shape == (5, 3)
    assert list(out.entries()) == [(0, 0, 1.0), (1, 1, 2.0), (2, 2, 3.0), (4, 2, 4.0)]


def test_vstack_requires_equal_columns():
    with pytest.raises(ValueError):
        vstack([SparseMatrix.empty((1, 2)), SparseMatrix.empty((1, 3))])


matrices = st.integers(1, 6).flatmap(lambda m: st.integers(1, 6).flatmap(
    lambda n: st.lists(st.tuples(st.integers(0, m - 1), st.integers(0, n - 1),
                                 st.floats(0, 10, allow_nan=False)),
                       unique_by=lambda t: t[:2], max_size=m * n).map(
        lambda trip: SparseMatrix.from_triplets(trip, (m, n)))))


@given(matrices)
@settings(max_examples=60, deadline=None)
def test_scipy_round_trip_and_dense_agree(m):
    assert SparseMatrix.from_scipy(m.to_scipy()) == m
    dense = np.zeros(m.shape)
    for i, j, v in m.entries():
        dense[i, j] = v
    np.testing.assert_array_equal(m.toarray(), dense)
    np.testing.assert_array_equal(m.transpose().toarray(), dense.T)


@given(st.lists(matrices, min_size=1, max_size=3))
@settings(max_examples=40, deadline=None)
def test_block_diag_matches_scipy(blocks):
    ref = sp.block_diag([b.to_scipy() for b in blocks]).toarray()
    np.testing.assert_array_equal(block_diag(blocks).toarray(), ref)
