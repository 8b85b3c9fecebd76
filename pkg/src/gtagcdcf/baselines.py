"""Single-domain comparison methods: user-based neighbourhood CF and PMF."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_domains, check_pairs, check_ratings
from .estimators import GTagCDCF
from .model import Hyperparams
from .trainer import TrainConfig


def pmf_config(d: int = 10, reg: float = 0.01, **kwargs) -> TrainConfig:
    """Training settings that reduce the joint model to regularized single-matrix MF.

    With one domain and both tag weights at zero only the preference term and
    the penalty remain; the tag factors receive nothing but weight decay.
    """
    return TrainConfig(hyperparams=Hyperparams(alpha=0.0, beta=0.0, reg=reg), d=d, **kwargs)


class PMF(GTagCDCF):
    """Probabilistic matrix factorization of a single domain.

    Shares the optimizer of :class:`GTagCDCF`, trained on one domain with the
    tag terms switched off.
    """

    alpha = 0.0
    beta = 0.0

    def __init__(self, n_factors=10, reg=0.01, link="logistic", predict_through_link=None,
                 epsilon=1e-4, max_iter=500, min_iter=20, max_halvings=40, init_scale=0.01, random_state=0):
        self.n_factors = n_factors
        self.reg = reg
        self.link = link
        self.predict_through_link = predict_through_link
        self.epsilon = epsilon
        self.max_iter = max_iter
        self.min_iter = min_iter
        self.max_halvings = max_halvings
        self.init_scale = init_scale
        self.random_state = random_state

    def _train_config(self) -> TrainConfig:
        return pmf_config(
            d=self.n_factors,
            reg=self.reg,
            epsilon=self.epsilon,
            max_iterations=self.max_iter,
            min_iterations=min(self.min_iter, self.max_iter),
            max_halvings=self.max_halvings,
            init_scale=self.init_scale,
            seed=0 if self.random_state is None else int(self.random_state),
            link=self.link,
        )

    def fit(self, domain, init=None, **train_kw):
        domains = check_domains(domain)
        if len(domains) != 1:
            raise ValueError("PMF is a single-domain model")
        return super().fit(domains, init=init, **train_kw)


class UserKNN(BaseEstimator):
    """User-based collaborative filtering with Pearson similarity.

    A prediction starts from the user's mean and adds the similarity-weighted
    deviations of the ``n_neighbors`` most similar users who rated the item.
    Similarity is the Pearson correlation over co-rated items (0 below
    ``min_overlap`` co-rated items or with zero variance), and a neighbour's
    deviation is taken from its mean over those same co-rated items.
    Similarity rows are computed on demand and cached per user.

    Parameters
    ----------
    n_neighbors : int, default=50
    min_overlap : int, default=2
    """

    def __init__(self, n_neighbors=50, min_overlap=2):
        self.n_neighbors = n_neighbors
        self.min_overlap = min_overlap

    def fit(self, R, y=None):
        R = check_ratings(R)
        if R.nnz == 0:
            raise ValueError("no ratings to fit")
        self.ratings_ = R.to_scipy()
        self.by_item_ = self.ratings_.tocsc()
        counts = np.diff(self.ratings_.indptr)
        sums = np.asarray(self.ratings_.sum(axis=1)).ravel()
        self.global_mean_ = float(R.values.mean())
        self.user_mean_ = np.where(counts > 0, sums / np.maximum(counts, 1), self.global_mean_)
        self.user_count_ = counts
        self.value_range_ = (float(R.values.min()), float(R.values.max()))
        self._cache = {}
        return self

    def similarities(self, user: int) -> tuple[np.ndarray, np.ndarray]:
        """Pearson similarity of ``user`` to every user, and each user's co-rated mean."""
        check_is_fitted(self, "ratings_")
        hit = self._cache.get(user)
        if hit is not None:
            return hit
        R = self.ratings_
        lo, hi = R.indptr[user], R.indptr[user + 1]
        cols, x = R.indices[lo:hi], R.data[lo:hi]
        B = R[:, cols]
        mask = B.copy()
        mask.data[:] = 1.0
        n = np.asarray(mask.sum(axis=1)).ravel()
        sx = mask @ x
        sxx = mask @ (x * x)
        sy = np.asarray(B.sum(axis=1)).ravel()
        syy = np.asarray(B.multiply(B).sum(axis=1)).ravel()
        sxy = B @ x
        num = n * sxy - sx * sy
        var_x = n * sxx - sx * sx
        var_y = n * syy - sy * sy
        den = np.sqrt(np.clip(var_x, 0, None) * np.clip(var_y, 0, None))
        ok = (n >= self.min_overlap) & (den > 1e-12 * np.maximum(n * n, 1))
        sim = np.zeros(R.shape[0])
        sim[ok] = np.clip(num[ok] / den[ok], -1.0, 1.0)
        sim[user] = 0.0
        co_mean = np.divide(sy, n, out=np.zeros_like(sy), where=n > 0)
        self._cache[user] = (sim, co_mean)
        return sim, co_mean

    def predict_one(self, user: int, item: int) -> float:
        check_is_fitted(self, "ratings_")
        lo_v, hi_v = self.value_range_
        col = self.by_item_
        lo, hi = col.indptr[item], col.indptr[item + 1]
        if hi == lo:
            return float(np.clip(self.global_mean_, lo_v, hi_v))
        if self.user_count_[user] == 0:
            return float(np.clip(self.global_mean_, lo_v, hi_v))
        raters, vals = col.indices[lo:hi], col.data[lo:hi]
        keep = raters != user
        raters, vals = raters[keep], vals[keep]
        sim, co_mean = self.similarities(user)
        s = sim[raters]
        nz = s != 0
        raters, vals, s = raters[nz], vals[nz], s[nz]
        base = self.user_mean_[user]
        if s.size == 0:
            return float(np.clip(base, lo_v, hi_v))
        top = np.lexsort((raters, -s))[: self.n_neighbors]
        s, vals, raters = s[top], vals[top], raters[top]
        pred = base + np.sum(s * (vals - co_mean[raters])) / np.sum(np.abs(s))
        return float(np.clip(pred, lo_v, hi_v))

    def predict(self, X, domain: int = 0) -> np.ndarray:
        check_is_fitted(self, "ratings_")
        users, items = check_pairs(X, *self.ratings_.shape)
        return np.array([self.predict_one(u, i) for u, i in zip(users.tolist(), items.tolist())])
