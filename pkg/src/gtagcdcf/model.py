"""The tag-linked collective factorization objective, its gradients and prediction.

Every domain ``k`` owns user factors ``U[k]`` (``d x M_k``) and item factors
``V[k]`` (``d x N_k``); a single tag factor matrix ``T`` (``d x L``) is shared
by all domains. The loss fits ``g(U_i . V_j)`` to observed preferences,
``g(U_i . T_l)`` to user-tag frequencies (weight ``alpha``) and
``g(V_j . T_l)`` to item-tag frequencies (weight ``beta``), plus a squared
Frobenius penalty ``reg`` on all factors.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
import scipy.sparse as sp
from scipy.special import expit

from .ingest import DomainDataset
from .sparse import SparseMatrix, block_diag, frobenius_norm_sq, vstack

MAGIC = b"GTAGCDCF/1\n"
LINKS = ("logistic", "identity")


class DivergenceError(ArithmeticError):
    """The objective became non-finite."""


@dataclass(frozen=True)
class Link:
    """Squashing function applied to inner products during training."""

    kind: str = "logistic"

    def __post_init__(self):
        if self.kind not in LINKS:
            raise ValueError(f"unknown link {self.kind!r}; expected one of {LINKS}")

    def __call__(self, x):
        if self.kind == "logistic":
            return expit(x)
        return np.asarray(x, dtype=np.float64)

    def derivative(self, x, gx=None):
        if self.kind == "logistic":
            gx = expit(x) if gx is None else gx
            return gx * (1.0 - gx)
        return np.ones_like(np.asarray(x, dtype=np.float64))


@dataclass(frozen=True)
class Hyperparams:
    alpha: float = 0.1
    beta: float = 0.1
    reg: float = 0.01

    def __post_init__(self):
        for name in ("alpha", "beta", "reg"):
            v = getattr(self, name)
            if not (np.isfinite(v) and v >= 0):
                raise ValueError(f"{name} must be a nonnegative number, got {v!r}")


@dataclass
class FactorModel:
    U: list[np.ndarray]
    V: list[np.ndarray]
    T: np.ndarray
    link: str = "logistic"

    def __post_init__(self):
        self.U = [np.asarray(u, dtype=np.float64) for u in self.U]
        self.V = [np.asarray(v, dtype=np.float64) for v in self.V]
        self.T = np.asarray(self.T, dtype=np.float64)
        Link(self.link)
        if len(self.U) != len(self.V) or not self.U:
            raise ValueError("need one U and one V per domain")
        d = self.T.shape[0]
        for m in (*self.U, *self.V):
            if m.ndim != 2 or m.shape[0] != d:
                raise ValueError("all factor matrices must share the latent dimensionality")

    @property
    def d(self) -> int:
        return self.T.shape[0]

    @property
    def n_domains(self) -> int:
        return len(self.U)

    @property
    def n_tags(self) -> int:
        return self.T.shape[1]

    def copy(self) -> "FactorModel":
        return FactorModel([u.copy() for u in self.U], [v.copy() for v in self.V],
                           self.T.copy(), self.link)

    def check_domains(self, domains: Sequence[DomainDataset]):
        if len(domains) != self.n_domains:
            raise ValueError(f"model has {self.n_domains} domains, data has {len(domains)}")
        for k, dom in enumerate(domains):
            if self.U[k].shape[1] != dom.n_users or self.V[k].shape[1] != dom.n_items:
                raise ValueError(f"domain {k}: factor shapes do not match the data")
            if dom.n_tags != self.n_tags:
                raise ValueError(f"domain {k}: has {dom.n_tags} tags, model has {self.n_tags}")


def _pair_residuals(A, B, m: SparseMatrix, link: Link):
    """Per-entry ``g(a.b) - value`` and ``g'(a.b)`` for the stored entries of ``m``."""
    x = np.einsum("ij,ij->j", A[:, m.rows], B[:, m.cols])
    gx = link(x)
    return gx - m.values, link.derivative(x, gx)


def _sq_loss(A, B, m: SparseMatrix, link: Link) -> float:
    if m.nnz == 0:
        return 0.0
    r, _ = _pair_residuals(A, B, m, link)
    return float(r @ r)


def domain_losses(model: FactorModel, domains: Sequence[DomainDataset]) -> list[tuple[float, float, float]]:
    """Unweighted squared-error sums ``(preference, user-tag, item-tag)`` per domain."""
    link = Link(model.link)
    out = []
    for U, V, dom in zip(model.U, model.V, domains):
        out.append((_sq_loss(U, V, dom.R, link),
                    _sq_loss(U, model.T, dom.F_U, link),
                    _sq_loss(V, model.T, dom.F_V, link)))
    return out


def objective(model: FactorModel, domains: Sequence[DomainDataset], h: Hyperparams) -> float:
    """Value of the regularized joint loss.

    Terms are accumulated in a fixed order (domain, then matrix, then stored
    entry order) so the result is reproducible bit for bit.
    """
    model.check_domains(domains)
    total = 0.0
    with np.errstate(over="ignore", invalid="ignore"):
        for r_loss, fu_loss, fv_loss in domain_losses(model, domains):
            total += 0.5 * r_loss + 0.5 * h.alpha * fu_loss + 0.5 * h.beta * fv_loss
        norms = sum(frobenius_norm_sq(U) + frobenius_norm_sq(V) for U, V in zip(model.U, model.V))
        total += 0.5 * h.reg * (norms + frobenius_norm_sq(model.T))
    if not np.isfinite(total):
        raise DivergenceError("objective is not finite")
    return total


def _weighted_matrix(w, m: SparseMatrix):
    return sp.csr_matrix((w, m.cols, m.indptr), shape=m.shape)


def _pair_gradients(A, B, m: SparseMatrix, link: Link, weight: float = 1.0):
    """Gradients of ``weight/2 * sum (value - g(a.b))^2`` w.r.t. ``A`` and ``B``."""
    if m.nnz == 0 or weight == 0:
        return np.zeros_like(A), np.zeros_like(B)
    r, dg = _pair_residuals(A, B, m, link)
    E = _weighted_matrix(weight * r * dg, m)
    gA = np.asarray(E @ B.T).T
    gB = np.asarray(E.T @ A.T).T
    return gA, gB


def domain_gradients(model: FactorModel, domains: Sequence[DomainDataset], h: Hyperparams, k: int):
    """Gradients with respect to ``U[k]``, ``V[k]`` and the tag factors ``T``.

    The tag gradient collects the user-tag and item-tag residuals of every
    domain, not only domain ``k``.
    """
    gU, gV = _uv_gradients(model, domains, h, k)
    return gU, gV, tag_gradient(model, domains, h)


def tag_gradient(model: FactorModel, domains: Sequence[DomainDataset], h: Hyperparams) -> np.ndarray:
    link = Link(model.link)
    gT = np.zeros_like(model.T)
    for U, V, dom in zip(model.U, model.V, domains):
        gT += _pair_gradients(U, model.T, dom.F_U, link, h.alpha)[1]
        gT += _pair_gradients(V, model.T, dom.F_V, link, h.beta)[1]
    return gT + h.reg * model.T


def gradients(model: FactorModel, domains: Sequence[DomainDataset], h: Hyperparams):
    """All partial derivatives: ``(grad_U per domain, grad_V per domain, grad_T)``."""
    model.check_domains(domains)
    gUs, gVs = [], []
    for k in range(model.n_domains):
        gU, gV = _uv_gradients(model, domains, h, k)
        gUs.append(gU)
        gVs.append(gV)
    return gUs, gVs, tag_gradient(model, domains, h)


def _uv_gradients(model, domains, h, k):
    link = Link(model.link)
    U, V, T = model.U[k], model.V[k], model.T
    dom = domains[k]
    gU, gV = _pair_gradients(U, V, dom.R, link)
    gU += _pair_gradients(U, T, dom.F_U, link, h.alpha)[0] + h.reg * U
    gV += _pair_gradients(V, T, dom.F_V, link, h.beta)[0] + h.reg * V
    return gU, gV


def predict_scores(model: FactorModel, k: int, users, items, through_link: bool = False) -> np.ndarray:
    """Normalized-scale predictions for aligned arrays of user and item indices.

    By default the raw inner product ``U_i . V_j`` is used; ``through_link``
    applies the training link first. Results are clamped to ``[0, 1]``.
    """
    users = np.asarray(users, dtype=np.int64)
    items = np.asarray(items, dtype=np.int64)
    U, V = model.U[k], model.V[k]
    if users.size and (users.min() < 0 or users.max() >= U.shape[1]):
        raise IndexError("user index out of range")
    if items.size and (items.min() < 0 or items.max() >= V.shape[1]):
        raise IndexError("item index out of range")
    x = np.einsum("ij,ij->j", U[:, users], V[:, items])
    if through_link:
        x = Link(model.link)(x)
    return np.clip(x, 0.0, 1.0)


def predict(model: FactorModel, k: int, user: int, item: int, through_link: bool = False) -> float:
    return float(predict_scores(model, k, [user], [item], through_link)[0])


def predict_rating(model: FactorModel, domain: DomainDataset, k: int, user: int, item: int,
                   through_link: bool = False) -> float:
    """Prediction mapped back to the domain's original rating scale."""
    if domain.feedback_kind != "explicit":
        raise ValueError(f"{domain.name}: ratings are only defined for explicit feedback")
    return predict(model, k, user, item, through_link) * domain.max_preference


def assemble_compact(domains: Sequence[DomainDataset]):
    """Block-diagonal preference matrix and row-stacked tag matrices of all domains."""
    if not domains:
        raise ValueError("need at least one domain")
    return (block_diag([d.R for d in domains]),
            vstack([d.F_U for d in domains]),
            vstack([d.F_V for d in domains]))


def stack_factors(model: FactorModel) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    return np.hstack(model.U), np.hstack(model.V), model.T


def compact_objective(U, V, T, R: SparseMatrix, F_U: SparseMatrix, F_V: SparseMatrix,
                      h: Hyperparams, link: str = "logistic") -> float:
    """Loss over assembled matrices and stacked factors, treated as one domain."""
    g = Link(link)
    total = 0.5 * _sq_loss(U, V, R, g)
    total += 0.5 * h.alpha * _sq_loss(U, T, F_U, g)
    total += 0.5 * h.beta * _sq_loss(V, T, F_V, g)
    total += 0.5 * h.reg * (frobenius_norm_sq(U) + frobenius_norm_sq(V) + frobenius_norm_sq(T))
    return total


def save_model(model: FactorModel, path) -> None:
    header = {
        "d": model.d,
        "K": model.n_domains,
        "link": model.link,
        "M": [u.shape[1] for u in model.U],
        "N": [v.shape[1] for v in model.V],
        "L": model.n_tags,
        "dtype": "<f8",
        "order": "row-major",
        "blocks": ["U"] * model.n_domains + ["V"] * model.n_domains + ["T"],
    }
    with open(path, "wb") as fh:
        fh.write(MAGIC)
        fh.write(json.dumps(header, sort_keys=True).encode() + b"\n")
        for m in (*model.U, *model.V, model.T):
            fh.write(np.ascontiguousarray(m, dtype="<f8").tobytes())


def load_model(path) -> FactorModel:
    data = Path(path).read_bytes()
    if not data.startswith(MAGIC):
        raise ValueError(f"{path}: not a model checkpoint")
    nl = data.index(b"\n", len(MAGIC))
    header = json.loads(data[len(MAGIC):nl])
    payload = memoryview(data)[nl + 1:]
    d, off = header["d"], 0

    def take(n):
        nonlocal off
        size = d * n * 8
        if off + size > len(payload):
            raise ValueError(f"{path}: truncated checkpoint")
        m = np.frombuffer(payload[off:off + size], dtype="<f8").reshape(d, n).copy()
        off += size
        return m

    U = [take(m) for m in header["M"]]
    V = [take(n) for n in header["N"]]
    T = take(header["L"])
    if off != len(payload):
        raise ValueError(f"{path}: trailing bytes in checkpoint")
    return FactorModel(U, V, T, header["link"])
