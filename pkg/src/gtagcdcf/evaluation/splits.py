"""User-profile-length and cross-validation splits of a preference matrix.

Splits are stored as one role / fold label per stored entry of ``R`` (in the
matrix's sorted entry order), which keeps them cheap to apply and easy to
write out line by line.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from ..ingest import DomainDataset
from ..sparse import SparseMatrix

# entry roles in a UPL split
TRAIN, VAL_PROFILE, VAL_HOLDOUT, TEST_PROFILE, TEST_HOLDOUT, EXCLUDED = range(6)
ROLE_NAMES = ("train", "val_profile", "val_holdout", "test_profile", "test_holdout", "excluded")
USER_SETS = ("train", "validation", "test", "excluded")


@dataclass(frozen=True)
class UplSplit:
    upl: int
    fold: int
    seed: int
    user_set: np.ndarray
    """Per user: 0 train, 1 validation, 2 test, 3 excluded (too few preferences)."""
    roles: np.ndarray
    """Per stored entry of ``R``: one of the role constants."""

    def users(self, which: str) -> np.ndarray:
        return np.flatnonzero(self.user_set == USER_SETS.index(which))

    def training_mask(self, target: str = "test") -> np.ndarray:
        profile = TEST_PROFILE if target == "test" else VAL_PROFILE
        return (self.roles == TRAIN) | (self.roles == profile)

    def holdout_mask(self, target: str = "test") -> np.ndarray:
        return self.roles == (TEST_HOLDOUT if target == "test" else VAL_HOLDOUT)

    def training_matrix(self, R: SparseMatrix, target: str = "test") -> SparseMatrix:
        return R.select(self.training_mask(target))

    def holdout(self, R: SparseMatrix, target: str = "test") -> SparseMatrix:
        return R.select(self.holdout_mask(target))


def _user_partition(n_users, rng, fractions=(0.6, 0.2)):
    n_train = int(round(fractions[0] * n_users))
    n_val = int(round(fractions[1] * n_users))
    if n_train == 0 or n_val == 0 or n_users - n_train - n_val <= 0:
        raise ValueError(f"{n_users} users are too few for a 60/20/20 user split")
    perm = rng.permutation(n_users)
    user_set = np.zeros(n_users, dtype=np.int8)
    user_set[perm[n_train:n_train + n_val]] = 1
    user_set[perm[n_train + n_val:]] = 2
    return user_set


def make_upl_split(R: SparseMatrix, upl: int, seed: int, fold: int = 0,
                   min_preferences: int = 20) -> UplSplit:
    """Split users 60/20/20 and keep ``upl`` observed preferences per evaluated user.

    The user partition depends on ``seed`` only; the profile sample also
    depends on ``fold``, so repeated folds resample the observed profiles of
    the same validation and test users. Validation and test users with fewer
    than ``min_preferences`` preferences are excluded, and their entries
    are used neither for training nor for evaluation.
    """
    if not 0 < upl < min_preferences:
        raise ValueError(f"upl must be in [1, {min_preferences - 1}], got {upl}")
    user_set = _user_partition(R.n_rows, np.random.default_rng(seed))
    counts = np.diff(R.indptr)
    user_set[(user_set > 0) & (counts < min_preferences)] = 3
    if not np.any(user_set == 2):
        raise ValueError("no test user has enough preferences")

    rng = np.random.default_rng([seed, fold])
    roles = np.full(R.nnz, TRAIN, dtype=np.int8)
    ptr = R.indptr
    for u in range(R.n_rows):
        lo, hi = ptr[u], ptr[u + 1]
        s = user_set[u]
        if s == 0 or hi == lo:
            continue
        if s == 3:
            roles[lo:hi] = EXCLUDED
            continue
        profile, holdout = (VAL_PROFILE, VAL_HOLDOUT) if s == 1 else (TEST_PROFILE, TEST_HOLDOUT)
        roles[lo:hi] = holdout
        roles[lo + rng.choice(hi - lo, size=upl, replace=False)] = profile
    return UplSplit(upl, fold, seed, user_set, roles)


@dataclass(frozen=True)
class CvSplit:
    seed: int
    folds: np.ndarray
    """Per stored entry of ``R``: fold number in ``0..n_folds-1``."""
    tuning_fold: int
    n_folds: int = 5

    @property
    def evaluation_folds(self) -> list[int]:
        return [f for f in range(self.n_folds) if f != self.tuning_fold]

    def training_matrix(self, R: SparseMatrix, fold: int) -> SparseMatrix:
        return R.select(self.folds != fold)

    def holdout(self, R: SparseMatrix, fold: int) -> SparseMatrix:
        return R.select(self.folds == fold)


def make_cv_split(R: SparseMatrix, seed: int, n_folds: int = 5) -> CvSplit:
    """Random partition of the preference entries into equal-size folds."""
    if R.nnz == 0:
        raise ValueError("no preferences to split")
    rng = np.random.default_rng(seed)
    folds = np.empty(R.nnz, dtype=np.int8)
    folds[rng.permutation(R.nnz)] = np.arange(R.nnz) % n_folds
    return CvSplit(seed, folds, int(rng.integers(n_folds)), n_folds)


def write_upl_manifest(split: UplSplit, dataset: DomainDataset, path) -> None:
    """Line-oriented record of a split; :func:`read_upl_manifest` restores it."""
    R = dataset.R
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# upl-split domain={dataset.name} upl={split.upl} fold={split.fold} seed={split.seed}\n")
        for u, s in enumerate(split.user_set):
            fh.write(f"user\t{dataset.user_ids[u]}\t{USER_SETS[s]}\n")
        for (r, c, _), role in zip(R.entries(), split.roles):
            fh.write(f"entry\t{dataset.user_ids[r]}\t{dataset.item_ids[c]}\t{ROLE_NAMES[role]}\n")


def _header_fields(line):
    return dict(kv.split("=", 1) for kv in line.split()[2:])


def read_upl_manifest(path, dataset: DomainDataset) -> UplSplit:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = _header_fields(lines[0])
    uix = {u: i for i, u in enumerate(dataset.user_ids)}
    iix = {i: n for n, i in enumerate(dataset.item_ids)}
    user_set = np.zeros(dataset.n_users, dtype=np.int8)
    role_of = {}
    for line in lines[1:]:
        parts = line.split("\t")
        if parts[0] == "user":
            user_set[uix[parts[1]]] = USER_SETS.index(parts[2])
        elif parts[0] == "entry":
            role_of[(uix[parts[1]], iix[parts[2]])] = ROLE_NAMES.index(parts[3])
    R = dataset.R
    roles = np.array([role_of[(r, c)] for r, c in zip(R.rows.tolist(), R.cols.tolist())], dtype=np.int8)
    return UplSplit(int(head["upl"]), int(head["fold"]), int(head["seed"]), user_set, roles)


def write_cv_manifest(split: CvSplit, dataset: DomainDataset, path) -> None:
    R = dataset.R
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(f"# cv-split domain={dataset.name} seed={split.seed} "
                 f"tuning={split.tuning_fold} folds={split.n_folds}\n")
        for (r, c, _), f in zip(R.entries(), split.folds):
            fh.write(f"entry\t{dataset.user_ids[r]}\t{dataset.item_ids[c]}\t{int(f)}\n")


def read_cv_manifest(path, dataset: DomainDataset) -> CvSplit:
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    head = _header_fields(lines[0])
    uix = {u: i for i, u in enumerate(dataset.user_ids)}
    iix = {i: n for n, i in enumerate(dataset.item_ids)}
    fold_of = {}
    for line in lines[1:]:
        _, u, i, f = line.split("\t")
        fold_of[(uix[u], iix[i])] = int(f)
    R = dataset.R
    folds = np.array([fold_of[(r, c)] for r, c in zip(R.rows.tolist(), R.cols.tolist())], dtype=np.int8)
    return CvSplit(int(head["seed"]), folds, int(head["tuning"]), int(head["folds"]))
