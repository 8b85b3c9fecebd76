import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from gtagcdcf.evaluation import wilcoxon_signed_rank
from gtagcdcf.evaluation.wilcoxon import signed_rank_null

from oracles import signed_rank_enumeration


def test_identical_samples_error():
    with pytest.raises(ValueError, match="nonzero differences"):
        wilcoxon_signed_rank([1, 2, 3, 4, 5], [1, 2, 3, 4, 5])


def test_too_few_pairs():
    with pytest.raises(ValueError):
        wilcoxon_signed_rank([1, 2, 3, 4], [0, 0, 0, 0])


def test_constant_shift_n10():
    a = np.arange(10.0)
    res = wilcoxon_signed_rank(a, a + 0.5)
    assert res.exact and res.statistic == 0
    assert res.pvalue == pytest.approx(2 / 1024, abs=1e-15)


def test_six_pair_example():
    a = [125, 115, 130, 140, 140, 115]
    b = [110, 122, 125, 120, 140, 124]
    res = wilcoxon_signed_rank(a, b)
    p, w = signed_rank_enumeration(a, b)
    assert res.statistic == w and res.pvalue == pytest.approx(p, abs=1e-15)


@pytest.mark.parametrize("n", range(5, 13))
def test_exact_matches_enumeration(n):
    rng = np.random.default_rng(n)
    for _ in range(3):
        a = rng.integers(0, 6, n).astype(float)  # ties and zeros happen
        b = rng.integers(0, 6, n).astype(float)
        if np.count_nonzero(a - b) < 5:
            continue
        p, w = signed_rank_enumeration(a, b)
        res = wilcoxon_signed_rank(a, b)
        assert res.statistic == w and res.pvalue == pytest.approx(p, abs=1e-12)


def test_exact_matches_scipy_without_ties():
    rng = np.random.default_rng(3)
    a, b = rng.normal(size=15), rng.normal(size=15)
    ref = stats.wilcoxon(a, b, method="exact")
    assert wilcoxon_signed_rank(a, b).pvalue == pytest.approx(ref.pvalue, rel=1e-10)


def test_normal_approximation_matches_scipy():
    rng = np.random.default_rng(5)
    a, b = rng.normal(size=40), rng.normal(0.3, 1, size=40)
    res = wilcoxon_signed_rank(a, b)
    ref = stats.wilcoxon(a, b, method="approx", correction=False)
    assert not res.exact and res.n == 40
    assert res.pvalue == pytest.approx(ref.pvalue, rel=1e-10)


def test_null_distribution_sums_to_one():
    support, prob = signed_rank_null([1, 2, 2.5, 2.5, 5])
    assert prob.sum() == pytest.approx(1.0)
    assert support[-1] == 13.0


@given(st.lists(st.tuples(st.integers(-5, 5), st.integers(-5, 5)), min_size=5, max_size=11))
@settings(max_examples=60, deadline=None)
def test_symmetric_and_bounded(pairs):
    a, b = np.array(pairs, dtype=float).T
    if np.count_nonzero(a - b) < 5:
        return
    p1, p2 = wilcoxon_signed_rank(a, b).pvalue, wilcoxon_signed_rank(b, a).pvalue
    assert 0 < p1 <= 1 and p1 == pytest.approx(p2)
