"""Input checks shared by the estimators."""

from __future__ import annotations

import numpy as np

from .ingest import DomainDataset
from .sparse import SparseMatrix


def check_domains(domains, min_domains: int = 1) -> list[DomainDataset]:
    if isinstance(domains, DomainDataset):
        domains = [domains]
    domains = list(domains)
    if len(domains) < min_domains:
        raise ValueError(f"expected at least {min_domains} domain(s), got {len(domains)}")
    for d in domains:
        if not isinstance(d, DomainDataset):
            raise TypeError(f"expected DomainDataset, got {type(d).__name__}")
    L = domains[0].n_tags
    if any(d.n_tags != L for d in domains):
        raise ValueError("domains do not share one tag vocabulary")
    return domains


def check_pairs(X, n_users: int, n_items: int) -> tuple[np.ndarray, np.ndarray]:
    """Validate an ``(n, 2)`` array of ``(user, item)`` index pairs."""
    X = np.asarray(X)
    if X.ndim != 2 or X.shape[1] != 2:
        raise ValueError(f"expected an (n, 2) array of (user, item) pairs, got shape {X.shape}")
    if X.size and not np.issubdtype(X.dtype, np.integer):
        if not np.all(np.equal(np.mod(X, 1), 0)):
            raise ValueError("user and item indices must be integers")
    X = X.astype(np.int64)
    users, items = X[:, 0], X[:, 1]
    if users.size:
        if users.min() < 0 or users.max() >= n_users:
            raise IndexError("user index out of range")
        if items.min() < 0 or items.max() >= n_items:
            raise IndexError("item index out of range")
    return users, items


def check_ratings(R) -> SparseMatrix:
    if isinstance(R, DomainDataset):
        return R.R
    if isinstance(R, SparseMatrix):
        return R
    raise TypeError(f"expected SparseMatrix or DomainDataset, got {type(R).__name__}")
