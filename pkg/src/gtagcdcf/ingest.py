"""Reading rating / tag dumps and building per-domain matrices."""

from __future__ import annotations

import dataclasses
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Literal, NamedTuple, Sequence

import numpy as np

from .sparse import SparseMatrix, normalize_by_max

_log = logging.getLogger(__name__)

FeedbackKind = Literal["explicit", "implicit"]

_SEPARATORS = {"tsv": "\t", "ml10m": "::", "hetrec": "\t"}


class IngestError(ValueError):
    pass


class RawInteraction(NamedTuple):
    user_id: str
    item_id: str
    value: float


class RawTagAssignment(NamedTuple):
    user_id: str
    item_id: str
    tag: str


def normalize_tag(tag: str) -> str:
    """Tags are matched across domains after trimming and lowercasing only."""
    return tag.strip().lower()


def _id_key(x: str):
    # numeric ids sort numerically, everything else lexically after them
    try:
        return (0, int(x), "")
    except ValueError:
        return (1, 0, x)


def _iter_records(path, sep, encoding):
    path = Path(path)
    try:
        text = path.read_text(encoding=encoding)
    except OSError as exc:
        raise IngestError(f"cannot read {path}: {exc}") from exc
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.rstrip("\r\n")
        if not line.strip() or line.lstrip().startswith("#"):
            continue
        yield lineno, line.split(sep)


def _check_format(fmt):
    if fmt not in _SEPARATORS:
        raise IngestError(f"unknown format {fmt!r}; expected one of {sorted(_SEPARATORS)}")
    return _SEPARATORS[fmt]


def _report(path, bad, strict):
    if not bad:
        return
    listing = ", ".join(f"{n}: {why}" for n, why in bad[:10])
    more = f" (+{len(bad) - 10} more)" if len(bad) > 10 else ""
    msg = f"{path}: {len(bad)} malformed line(s): {listing}{more}"
    if strict:
        raise IngestError(msg)
    _log.warning(msg)


def parse_interactions(path, format: str = "tsv", *, strict: bool = False,
                       encoding: str = "utf-8") -> list[RawInteraction]:
    """Parse a ``user<sep>item<sep>value`` file.

    Columns past the third are ignored, so HetRec dumps with timestamps load
    unchanged. A first line whose value column is not numeric is taken as a
    header. Malformed lines are logged with their line numbers, or raise
    :class:`IngestError` when ``strict`` is set.
    """
    sep = _check_format(format)
    out: list[RawInteraction] = []
    bad: list[tuple[int, str]] = []
    first = True
    for lineno, parts in _iter_records(path, sep, encoding):
        if len(parts) < 3:
            bad.append((lineno, "expected 3 fields"))
            first = False
            continue
        user, item, raw = parts[0].strip(), parts[1].strip(), parts[2].strip()
        try:
            value = float(raw)
        except ValueError:
            if first:
                first = False
                continue
            bad.append((lineno, f"non-numeric value {raw!r}"))
            continue
        first = False
        if not np.isfinite(value) or value < 0:
            bad.append((lineno, f"negative or non-finite value {raw!r}"))
            continue
        if not user or not item:
            bad.append((lineno, "empty id"))
            continue
        out.append(RawInteraction(user, item, value))
    _report(path, bad, strict)
    return out


def parse_tag_assignments(path, format: str = "tsv", *, tag_names=None, strict: bool = False,
                          encoding: str = "utf-8") -> list[RawTagAssignment]:
    """Parse a ``user<sep>item<sep>tag`` file.

    For HetRec dumps the third column is a tag id; pass the accompanying
    ``tags.dat`` as ``tag_names`` to resolve it. A first line whose user field
    contains ``"user"`` is treated as a header.
    """
    sep = _check_format(format)
    names = _read_tag_names(tag_names, encoding) if tag_names is not None else None
    out: list[RawTagAssignment] = []
    bad: list[tuple[int, str]] = []
    first = True
    for lineno, parts in _iter_records(path, sep, encoding):
        if first and "user" in parts[0].lower():
            first = False
            continue
        first = False
        if len(parts) < 3:
            bad.append((lineno, "expected 3 fields"))
            continue
        user, item, tag = parts[0].strip(), parts[1].strip(), parts[2]
        if names is not None:
            key = tag.strip()
            if key not in names:
                bad.append((lineno, f"unknown tag id {key!r}"))
                continue
            tag = names[key]
        tag = normalize_tag(tag)
        if not user or not item or not tag:
            bad.append((lineno, "empty field"))
            continue
        out.append(RawTagAssignment(user, item, tag))
    _report(path, bad, strict)
    return out


def _read_tag_names(path, encoding) -> dict[str, str]:
    names = {}
    for _, parts in _iter_records(path, "\t", encoding):
        if len(parts) < 2:
            continue
        names[parts[0].strip()] = parts[1]
    return names


@dataclass(frozen=True)
class TagVocabulary:
    """Tags shared by every domain of an experiment, densely indexed."""

    tags: tuple[str, ...]
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if len(set(self.tags)) != len(self.tags):
            raise ValueError("duplicate tags in vocabulary")
        object.__setattr__(self, "index", {t: i for i, t in enumerate(self.tags)})

    def __len__(self) -> int:
        return len(self.tags)

    def __contains__(self, tag) -> bool:
        return tag in self.index


def build_tag_vocabulary(assignments: Sequence[Iterable[RawTagAssignment]]) -> TagVocabulary:
    """Intersect the normalized tag sets of all domains, sorted lexically."""
    if not assignments:
        raise IngestError("at least one domain is required")
    common = None
    for k, dom in enumerate(assignments):
        tags = {normalize_tag(a.tag) for a in dom} - {""}
        if not tags:
            raise IngestError(f"domain {k} has no tag assignments")
        common = tags if common is None else common & tags
    if not common:
        raise IngestError("no common tags; cross-domain linking impossible")
    return TagVocabulary(tuple(sorted(common)))


@dataclass(frozen=True)
class DomainDataset:
    """One recommender domain, with every matrix scaled into (0, 1].

    ``R`` is users x items, ``F_U`` users x tags, ``F_V`` items x tags.
    ``max_preference`` maps normalized preferences back to the source scale.
    """

    name: str
    R: SparseMatrix
    F_U: SparseMatrix
    F_V: SparseMatrix
    user_ids: tuple[str, ...]
    item_ids: tuple[str, ...]
    max_preference: float
    feedback_kind: FeedbackKind = "explicit"

    def __post_init__(self):
        m, n = len(self.user_ids), len(self.item_ids)
        if self.R.shape != (m, n):
            raise ValueError(f"R has shape {self.R.shape}, expected {(m, n)}")
        if self.F_U.n_rows != m or self.F_V.n_rows != n:
            raise ValueError("tag matrices do not match user/item counts")
        if self.F_U.n_cols != self.F_V.n_cols:
            raise ValueError("F_U and F_V disagree on the number of tags")
        if self.feedback_kind not in ("explicit", "implicit"):
            raise ValueError(f"unknown feedback kind {self.feedback_kind!r}")
        if not self.max_preference > 0:
            raise ValueError("max_preference must be positive")

    @property
    def n_users(self) -> int:
        return len(self.user_ids)

    @property
    def n_items(self) -> int:
        return len(self.item_ids)

    @property
    def n_tags(self) -> int:
        return self.F_U.n_cols

    def with_preferences(self, R: SparseMatrix) -> "DomainDataset":
        """Same domain with a different (e.g. training-only) preference matrix."""
        return dataclasses.replace(self, R=R)

    def stats(self) -> dict:
        cells = self.n_users * self.n_items
        return {
            "users": self.n_users,
            "items": self.n_items,
            "preferences": self.R.nnz,
            "sparseness": 1.0 - self.R.nnz / cells if cells else 1.0,
            "common_tags": self.n_tags,
            "user_tag_relations": self.F_U.nnz,
            "item_tag_relations": self.F_V.nnz,
        }


def _count_matrix(counter: Counter, n_rows, n_cols) -> SparseMatrix:
    if not counter:
        return SparseMatrix.empty((n_rows, n_cols))
    keys = sorted(counter)
    rows = [k[0] for k in keys]
    cols = [k[1] for k in keys]
    vals = [counter[k] for k in keys]
    m = SparseMatrix(rows, cols, vals, (n_rows, n_cols))
    return normalize_by_max(m)[0]


def build_domain(name: str, interactions: Iterable[RawInteraction],
                 assignments: Iterable[RawTagAssignment], vocab: TagVocabulary,
                 feedback_kind: FeedbackKind = "explicit") -> DomainDataset:
    """Build the normalized preference and tag-frequency matrices of a domain.

    Repeated ``(user, item)`` interactions keep the last value. Zero values
    carry no observation and are dropped. Users and items that only occur in
    tag assignments over ``vocab`` are registered without preferences.
    """
    if not len(vocab):
        raise IngestError("empty tag vocabulary")
    prefs: dict[tuple[str, str], float] = {}
    for it in interactions:
        prefs[(it.user_id, it.item_id)] = float(it.value)
    zeros = [k for k, v in prefs.items() if v == 0]
    for k in zeros:
        del prefs[k]
    if zeros:
        _log.info("%s: dropped %d zero-valued interactions", name, len(zeros))

    tagged = [(a.user_id, a.item_id, vocab.index[t]) for a in assignments
              if (t := normalize_tag(a.tag)) in vocab.index]

    users = {u for u, _ in prefs} | {u for u, _, _ in tagged}
    items = {i for _, i in prefs} | {i for _, i, _ in tagged}
    user_ids = tuple(sorted(users, key=_id_key))
    item_ids = tuple(sorted(items, key=_id_key))
    uix = {u: n for n, u in enumerate(user_ids)}
    iix = {i: n for n, i in enumerate(item_ids)}

    if not prefs:
        raise IngestError(f"{name}: no preferences")
    keys = list(prefs)
    R = SparseMatrix([uix[u] for u, _ in keys], [iix[i] for _, i in keys],
                     [prefs[k] for k in keys], (len(user_ids), len(item_ids)))
    R, top = normalize_by_max(R)

    L = len(vocab)
    fu = Counter((uix[u], t) for u, _, t in tagged)
    fv = Counter((iix[i], t) for _, i, t in tagged)
    return DomainDataset(
        name=name,
        R=R,
        F_U=_count_matrix(fu, len(user_ids), L),
        F_V=_count_matrix(fv, len(item_ids), L),
        user_ids=user_ids,
        item_ids=item_ids,
        max_preference=top,
        feedback_kind=feedback_kind,
    )


def restrict_to_first(interactions, assignments, n_users=None, n_items=None):
    """Keep only the first ``n_users`` users and ``n_items`` items by identifier.

    This mirrors building a reproducible subset of a large dump by id order
    rather than by random sampling.
    """
    interactions = list(interactions)
    assignments = list(assignments)
    keep_u = keep_i = None
    if n_users is not None:
        keep_u = set(sorted({x.user_id for x in interactions}, key=_id_key)[:n_users])
    if n_items is not None:
        keep_i = set(sorted({x.item_id for x in interactions}, key=_id_key)[:n_items])

    def ok(x):
        return (keep_u is None or x.user_id in keep_u) and (keep_i is None or x.item_id in keep_i)

    return [x for x in interactions if ok(x)], [x for x in assignments if ok(x)]
