"""scikit-learn style front end for the tag-linked factorization model."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from ._validation import check_domains, check_pairs
from .model import FactorModel, Hyperparams, objective, predict_scores
from .trainer import TrainConfig, train


class GTagCDCF(BaseEstimator):
    """Cross-domain recommender that links domains through shared tag factors.

    Parameters
    ----------
    n_factors : int, default=10
        Latent dimensionality shared by users, items and tags.
    alpha, beta : float, default=0.1
        Weights of the user-tag and item-tag reconstruction terms.
    reg : float, default=0.01
        Squared Frobenius penalty on all factor matrices.
    link : {"logistic", "identity"}, default="logistic"
        Function applied to inner products during training.
    predict_through_link : bool or None, default=None
        Apply ``link`` to inner products at prediction time. ``None`` does so
        for the logistic link, since its factors are fitted so that
        ``g(U.V)``, not ``U.V``, matches the normalized preferences.
    epsilon : float, default=1e-4
        Stop once a sweep lowers the objective by at most this fraction.
    max_iter, max_halvings : int
        Sweep budget and per-step line-search budget.
    min_iter : int, default=20
        Sweeps run before the stop test applies. Small initial factors start
        near a saddle where the first sweeps make little relative progress.
    init_scale : float, default=0.01
        Factors start i.i.d. uniform on ``(0, init_scale]``.
    random_state : int, default=0
        Seed of the initialization.

    Attributes
    ----------
    model_ : FactorModel
    trace_ : TrainTrace
    n_iter_ : int
    converged_ : bool
    """

    def __init__(self, n_factors=10, alpha=0.1, beta=0.1, reg=0.01, link="logistic",
                 predict_through_link=None, epsilon=1e-4, max_iter=500, min_iter=20, max_halvings=40,
                 init_scale=0.01, random_state=0):
        self.n_factors = n_factors
        self.alpha = alpha
        self.beta = beta
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
        return TrainConfig(
            hyperparams=Hyperparams(self.alpha, self.beta, self.reg),
            d=self.n_factors,
            epsilon=self.epsilon,
            max_iterations=self.max_iter,
            min_iterations=min(self.min_iter, self.max_iter),
            max_halvings=self.max_halvings,
            init_scale=self.init_scale,
            seed=0 if self.random_state is None else int(self.random_state),
            link=self.link,
        )

    def fit(self, domains, init: FactorModel | None = None, **train_kw):
        """Fit on a list of :class:`DomainDataset` sharing one tag vocabulary."""
        domains = check_domains(domains)
        self.model_, self.trace_ = train(domains, self._train_config(), init=init, **train_kw)
        self.n_iter_ = self.trace_.n_iter
        self.converged_ = self.trace_.converged
        self.n_domains_ = len(domains)
        self.max_preference_ = np.array([d.max_preference for d in domains])
        return self

    def _through_link(self) -> bool:
        if self.predict_through_link is None:
            return self.link == "logistic"
        return bool(self.predict_through_link)

    def predict(self, X, domain: int = 0) -> np.ndarray:
        """Normalized-scale scores in ``[0, 1]`` for ``(user, item)`` index pairs."""
        check_is_fitted(self, "model_")
        m = self.model_
        users, items = check_pairs(X, m.U[domain].shape[1], m.V[domain].shape[1])
        return predict_scores(m, domain, users, items, self._through_link())

    def predict_rating(self, X, domain: int = 0) -> np.ndarray:
        """Predictions on the domain's original preference scale."""
        return self.predict(X, domain) * self.max_preference_[domain]

    def objective(self, domains) -> float:
        check_is_fitted(self, "model_")
        h = Hyperparams(self.alpha, self.beta, self.reg)
        return objective(self.model_, check_domains(domains), h)
