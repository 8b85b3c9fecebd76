"""Full-batch alternating gradient descent with step halving."""

from __future__ import annotations

import csv
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from .ingest import DomainDataset
from .model import DivergenceError, FactorModel, Hyperparams, Link, domain_gradients, objective, save_model

_log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    """Training settings.

    ``epsilon`` bounds the relative objective decrease of a full sweep over
    the domains; training stops once a sweep improves by no more than that.
    The test is skipped before ``min_iterations`` sweeps: factors started
    near the origin sit close to a saddle point, where the first sweeps
    decrease the objective only slightly before the descent picks up.
    """

    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    d: int = 10
    epsilon: float = 1e-4
    max_iterations: int = 500
    min_iterations: int = 1
    max_halvings: int = 40
    init_scale: float = 0.01
    seed: int = 0
    link: str = "logistic"

    def __post_init__(self):
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if not 1 <= self.min_iterations <= self.max_iterations:
            raise ValueError("min_iterations must lie in [1, max_iterations]")
        if self.max_halvings < 1:
            raise ValueError("max_halvings must be at least 1")
        if not self.init_scale > 0:
            raise ValueError("init_scale must be positive")
        if self.d < 1:
            raise ValueError("d must be at least 1")
        Link(self.link)


@dataclass(frozen=True)
class IterationRecord:
    t: int
    objective: float
    etas: tuple[float, ...]
    halvings: tuple[int, ...]

    @property
    def eta(self) -> float:
        """Smallest step accepted in the sweep, 0 if no domain moved."""
        accepted = [e for e in self.etas if e > 0]
        return min(accepted) if accepted else 0.0


@dataclass
class TrainTrace:
    initial_objective: float
    records: list[IterationRecord] = field(default_factory=list)
    converged: bool = False

    @property
    def objectives(self) -> np.ndarray:
        return np.array([self.initial_objective] + [r.objective for r in self.records])

    @property
    def n_iter(self) -> int:
        return len(self.records)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["t", "objective", "eta", "halvings"])
            for r in self.records:
                w.writerow([r.t, repr(r.objective), repr(r.eta), sum(r.halvings)])


def init_model(domains: Sequence[DomainDataset], config: TrainConfig) -> FactorModel:
    """Random factors, i.i.d. uniform on ``(0, init_scale]``.

    Draw order is U, V for each domain in turn, then T, so a domain's slice
    does not depend on domains that come after it.
    """
    rng = np.random.default_rng(config.seed)
    d, s = config.d, config.init_scale

    def draw(n):
        return s * (1.0 - rng.random((d, n)))

    U, V = [], []
    for dom in domains:
        U.append(draw(dom.n_users))
        V.append(draw(dom.n_items))
    T = draw(domains[0].n_tags)
    return FactorModel(U, V, T, config.link)


def _check_domains(domains):
    if not domains:
        raise ValueError("need at least one domain")
    L = domains[0].n_tags
    if any(d.n_tags != L for d in domains):
        raise ValueError("domains do not share one tag vocabulary")


def train(domains: Sequence[DomainDataset], config: TrainConfig, init: FactorModel | None = None,
          checkpoint_every: int = 0, checkpoint_dir=None) -> tuple[FactorModel, TrainTrace]:
    """Fit the factors of all domains jointly.

    Each sweep visits the domains in order. For domain ``k`` the gradients
    with respect to ``U[k]``, ``V[k]`` and ``T`` are taken at the current
    point, the step starts at 1 and is halved until the joint update lowers
    the objective, and the update is applied at once. After the sweep the
    relative decrease ``1 - G_new / G_old`` is compared with ``epsilon``.

    If a domain's line search runs out of halvings, that domain is left
    unchanged and training stops after the current sweep.
    """
    _check_domains(domains)
    h = config.hyperparams
    model = init.copy() if init is not None else init_model(domains, config)
    model.check_domains(domains)
    if model.link != config.link:
        model = FactorModel(model.U, model.V, model.T, config.link)

    G = objective(model, domains, h)
    trace = TrainTrace(initial_objective=G)
    for t in range(1, config.max_iterations + 1):
        G_start = G
        etas, halvings = [], []
        stalled = False
        for k in range(model.n_domains):
            gU, gV, gT = domain_gradients(model, domains, h, k)
            eta, n_half = 1.0, 0
            while True:
                cand = FactorModel(list(model.U), list(model.V), model.T - eta * gT, model.link)
                cand.U[k] = model.U[k] - eta * gU
                cand.V[k] = model.V[k] - eta * gV
                try:
                    G_cand = objective(cand, domains, h)
                except DivergenceError:
                    G_cand = np.inf
                if G_cand < G:
                    break
                if n_half == config.max_halvings:
                    cand = None
                    break
                eta /= 2
                n_half += 1
            halvings.append(n_half)
            if cand is None:
                etas.append(0.0)
                stalled = True
                continue
            etas.append(eta)
            model, G = cand, G_cand

        if not np.isfinite(G):
            raise DivergenceError(f"objective diverged at iteration {t}")
        trace.records.append(IterationRecord(t, G, tuple(etas), tuple(halvings)))
        f = 1.0 - G / G_start if G_start > 0 else 0.0
        _log.debug("iter %d: G=%.10g f=%.3g etas=%s", t, G, f, etas)
        if checkpoint_every and checkpoint_dir is not None and t % checkpoint_every == 0:
            save_model(model, Path(checkpoint_dir) / f"model-{t:05d}.gtc")
        if stalled or (f <= config.epsilon and t >= config.min_iterations):
            trace.converged = True
            break
    return model, trace
