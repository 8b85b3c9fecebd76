"""Synthetic multi-domain data with known latent structure.

Users, items and tags live in one low-dimensional space shared by all
domains. Ratings follow the logistic of user-item affinity on a 5-star
half-step scale. Each user tags some of the items they rated, picking tags
close to the user and the item. With ``noise_tags=True`` tags are drawn
uniformly, which makes them useless for prediction.
"""

from __future__ import annotations

import numpy as np

from .ingest import DomainDataset, RawInteraction, RawTagAssignment, TagVocabulary, build_domain


def _unit_rows(rng, n, r):
    x = rng.standard_normal((n, r))
    return x / np.linalg.norm(x, axis=1, keepdims=True)


def make_raw_domains(n_users=(200, 200), n_items=(150, 150), prefs_per_user=(40, 5), n_tags=30,
                     rank=3, scale=3.0, tags_per_user=10, tag_temperature=4.0,
                     noise_tags=False, implicit=(), seed=0):
    """Raw interactions and tag assignments for several domains.

    ``prefs_per_user`` is the exact number of preferences of every user in
    each domain. Domains listed in ``implicit`` produce play counts instead
    of ratings. Returns ``([(interactions, assignments, kind), ...], vocab)``.
    """
    rng = np.random.default_rng(seed)
    tag_vecs = _unit_rows(rng, n_tags, rank)
    tag_names = [f"tag{l:03d}" for l in range(n_tags)]
    out = []
    for k in range(len(n_users)):
        users = _unit_rows(rng, n_users[k], rank)
        items = _unit_rows(rng, n_items[k], rank)
        inter, assign = [], []
        for i in range(n_users[k]):
            js = rng.choice(n_items[k], size=min(prefs_per_user[k], n_items[k]), replace=False)
            p = 1.0 / (1.0 + np.exp(-scale * (items[js] @ users[i])))
            for j, pij in zip(js, p):
                if k in implicit:
                    value = float(rng.poisson(1 + 200 * pij ** 3))
                else:
                    value = float(np.clip(np.round(10 * pij) / 2, 0.5, 5.0))
                inter.append(RawInteraction(f"u{i}", f"i{j}", value))
            for j in rng.choice(js, size=tags_per_user):
                if noise_tags:
                    l = int(rng.integers(n_tags))
                else:
                    logits = tag_temperature * (tag_vecs @ (users[i] + items[j]))
                    probs = np.exp(logits - logits.max())
                    l = int(rng.choice(n_tags, p=probs / probs.sum()))
                assign.append(RawTagAssignment(f"u{i}", f"i{j}", tag_names[l]))
        out.append((inter, assign, "implicit" if k in implicit else "explicit"))
    return out, TagVocabulary(tuple(tag_names))


def make_domains(seed=0, **kwargs) -> list[DomainDataset]:
    """Built :class:`DomainDataset` objects, see :func:`make_raw_domains`."""
    raw, vocab = make_raw_domains(seed=seed, **kwargs)
    return [build_domain(f"domain{k}", inter, assign, vocab, kind)
            for k, (inter, assign, kind) in enumerate(raw)]
