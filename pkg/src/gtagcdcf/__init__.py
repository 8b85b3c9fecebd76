"""Cross-domain collaborative filtering through shared tag factors."""

__version__ = "0.1.0"

from .baselines import PMF, UserKNN, pmf_config
from .estimators import GTagCDCF
from .ingest import DomainDataset, TagVocabulary, build_domain, build_tag_vocabulary
from .model import DivergenceError, FactorModel, Hyperparams, load_model, objective, save_model
from .sparse import SparseMatrix
from .trainer import TrainConfig, TrainTrace, train

__all__ = [
    "DivergenceError",
    "DomainDataset",
    "FactorModel",
    "GTagCDCF",
    "Hyperparams",
    "PMF",
    "SparseMatrix",
    "TagVocabulary",
    "TrainConfig",
    "TrainTrace",
    "UserKNN",
    "build_domain",
    "build_tag_vocabulary",
    "load_model",
    "objective",
    "pmf_config",
    "save_model",
    "train",
]
