"""Declarative experiment runs: ingestion, splitting, training and evaluation.

A run is described by one YAML file. All randomness derives from a single
root seed through named substreams, and every artifact written by a run is
listed in ``manifest.json`` inside the output directory.
"""

from __future__ import annotations

import concurrent.futures
import csv
import itertools
import json
import logging
import platform
import time
import zlib
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any

import numpy as np
import yaml

from . import __version__
from .baselines import PMF, UserKNN
from .estimators import GTagCDCF
from .evaluation.metrics import grouped_map, mae
from .evaluation.splits import (
    make_cv_split,
    make_upl_split,
    write_cv_manifest,
    write_upl_manifest,
)
from .evaluation.wilcoxon import wilcoxon_signed_rank
from .ingest import (
    DomainDataset,
    build_domain,
    build_tag_vocabulary,
    parse_interactions,
    parse_tag_assignments,
    restrict_to_first,
)
from .model import save_model
from .synthetic import make_raw_domains

_log = logging.getLogger(__name__)

METHODS = ("gtagcdcf", "pmf", "ubcf")
METRIC_OF_FEEDBACK = {"explicit": "mae", "implicit": "map"}
SWEEPABLE = {"alpha": "alpha", "beta": "beta", "lambda": "reg", "d": "n_factors"}

DEFAULT_PARAMS = {
    "d": 10,
    "alpha": 0.1,
    "beta": 0.1,
    "lambda": 0.01,
    "epsilon": 1e-4,
    "max_iterations": 500,
    "min_iterations": 20,
    "max_halvings": 40,
    "init_scale": 0.01,
    "link": "logistic",
    "predict_through_link": None,
    "neighbors": 50,
}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class DomainSpec:
    name: str
    feedback: str = "explicit"
    metric: str | None = None
    interactions: str | None = None
    tags: str | None = None
    format: str = "tsv"
    tag_format: str | None = None
    tag_names: str | None = None
    encoding: str = "utf-8"
    first_users: int | None = None
    first_items: int | None = None

    @property
    def metric_name(self) -> str:
        return self.metric or METRIC_OF_FEEDBACK[self.feedback]


@dataclass(frozen=True)
class ExperimentConfig:
    domains: tuple[DomainSpec, ...]
    method: str = "gtagcdcf"
    protocol: str = "upl"
    upl: tuple[int, ...] = (5, 10, 15)
    folds: int = 10
    min_preferences: int = 20
    relevance_coefficient: float = 0.7
    params: dict = field(default_factory=dict)
    seed: int = 0
    output: str = "runs/experiment"
    synthetic: dict | None = None
    parallel_folds: bool = False
    checkpoint_every: int = 0
    base_dir: str = "."

    def __post_init__(self):
        if not self.domains:
            raise ConfigError("at least one domain is required")
        if self.method not in METHODS:
            raise ConfigError(f"unknown method {self.method!r}; expected one of {METHODS}")
        if self.protocol not in ("upl", "cv"):
            raise ConfigError(f"unknown protocol {self.protocol!r}")
        names = [d.name for d in self.domains]
        if len(set(names)) != len(names):
            raise ConfigError("domain names must be unique")
        for d in self.domains:
            if d.feedback not in METRIC_OF_FEEDBACK:
                raise ConfigError(f"{d.name}: feedback must be 'explicit' or 'implicit'")
            if d.metric_name != METRIC_OF_FEEDBACK[d.feedback]:
                raise ConfigError(
                    f"{d.name}: metric {d.metric_name!r} does not match {d.feedback} feedback "
                    f"(use {METRIC_OF_FEEDBACK[d.feedback]!r})")
            if self.synthetic is None and (d.interactions is None or d.tags is None):
                raise ConfigError(f"{d.name}: interactions and tags files are required")
        if self.synthetic is not None:
            n = len(self.synthetic.get("n_users", (200, 200)))
            if n != len(self.domains):
                raise ConfigError(f"synthetic data has {n} domains, config lists {len(self.domains)}")
        if self.folds < 1:
            raise ConfigError("folds must be at least 1")
        if any(not 0 < u < self.min_preferences for u in self.upl):
            raise ConfigError(f"upl values must lie in [1, {self.min_preferences - 1}]")
        unknown = set(self.params) - set(DEFAULT_PARAMS)
        if unknown:
            raise ConfigError(f"unknown hyperparameters: {sorted(unknown)}")

    def grid(self) -> list[dict]:
        """Expand list-valued hyperparameters into the run matrix."""
        merged = {**DEFAULT_PARAMS, **self.params}
        keys = sorted(merged)
        axes = [v if isinstance(v, list) else [v] for v in (merged[k] for k in keys)]
        for k, ax in zip(keys, axes):
            if not ax:
                raise ConfigError(f"empty value list for {k}")
        return [dict(zip(keys, combo)) for combo in itertools.product(*axes)]

    def resolve(self, path: str) -> Path:
        p = Path(path)
        return p if p.is_absolute() else Path(self.base_dir) / p


def load_config(path, **overrides) -> ExperimentConfig:
    """Read a YAML experiment file; ``overrides`` replace top-level fields."""
    path = Path(path)
    try:
        raw = yaml.safe_load(path.read_text(encoding="utf-8")) or {}
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a mapping")
    proto = raw.get("protocol", {}) or {}
    if isinstance(proto, str):
        proto = {"kind": proto}
    try:
        domains = tuple(DomainSpec(**d) for d in raw.get("domains", []))
    except TypeError as exc:
        raise ConfigError(f"bad domain entry: {exc}") from exc
    upl = proto.get("upl", [5, 10, 15])
    kw = dict(
        domains=domains,
        method=raw.get("method", "gtagcdcf"),
        protocol=proto.get("kind", "upl"),
        upl=tuple(upl if isinstance(upl, list) else [upl]),
        folds=int(proto.get("folds", 10 if proto.get("kind", "upl") == "upl" else 5)),
        min_preferences=int(proto.get("min_preferences", 20)),
        relevance_coefficient=float(proto.get("relevance_coefficient", 0.7)),
        params=dict(raw.get("hyperparameters", {}) or {}),
        seed=int(raw.get("seed", 0)),
        output=str(raw.get("output", "runs/experiment")),
        synthetic=raw.get("synthetic"),
        parallel_folds=bool(raw.get("parallel_folds", False)),
        checkpoint_every=int(raw.get("checkpoint_every", 0)),
        base_dir=str(path.parent),
    )
    kw.update({k: v for k, v in overrides.items() if v is not None})
    if "upl" in overrides and overrides["upl"] is not None:
        kw["upl"] = tuple(overrides["upl"])
    return ExperimentConfig(**kw)


def substream(root: int, name: str, *ids: int) -> int:
    """Seed of a named random substream, stable across Python processes."""
    ss = np.random.SeedSequence([root, zlib.crc32(name.encode()), *ids])
    return int(ss.generate_state(1, dtype=np.uint32)[0])


def load_domains(config: ExperimentConfig) -> list[DomainDataset]:
    if config.synthetic is not None:
        kw = dict(config.synthetic)
        kw.setdefault("seed", substream(config.seed, "synthetic"))
        kw["implicit"] = tuple(k for k, d in enumerate(config.domains) if d.feedback == "implicit")
        raw, _ = make_raw_domains(**kw)
    else:
        raw = []
        for d in config.domains:
            inter = parse_interactions(config.resolve(d.interactions), d.format, encoding=d.encoding)
            tag_path = config.resolve(d.tags)
            names = config.resolve(d.tag_names) if d.tag_names else None
            assign = parse_tag_assignments(tag_path, d.tag_format or d.format, tag_names=names,
                                           encoding=d.encoding)
            if d.first_users is not None or d.first_items is not None:
                inter, assign = restrict_to_first(inter, assign, d.first_users, d.first_items)
            raw.append((inter, assign, d.feedback))
    vocab = build_tag_vocabulary([a for _, a, _ in raw])
    return [build_domain(spec.name, inter, assign, vocab, spec.feedback)
            for spec, (inter, assign, _) in zip(config.domains, raw)]


def dataset_statistics(domains: list[DomainDataset]) -> list[dict]:
    return [{"domain": d.name, **d.stats()} for d in domains]


def format_statistics(stats: list[dict]) -> str:
    rows = [
        ("#users", "users", "{}"),
        ("#items", "items", "{}"),
        ("#preferences", "preferences", "{}"),
        ("sparseness", "sparseness", "{:.2%}"),
        ("#common tags", "common_tags", "{}"),
        ("#user-tag relations", "user_tag_relations", "{}"),
        ("#item-tag relations", "item_tag_relations", "{}"),
    ]
    width = max(12, *(len(s["domain"]) for s in stats))
    lines = [" " * 22 + "".join(f"{s['domain']:>{width + 2}}" for s in stats)]
    for label, key, fmt in rows:
        lines.append(f"{label:<22}" + "".join(f"{fmt.format(s[key]):>{width + 2}}" for s in stats))
    return "\n".join(lines)


def _estimator(method: str, params: dict, seed: int):
    common = dict(
        n_factors=int(params["d"]),
        reg=float(params["lambda"]),
        link=params["link"],
        predict_through_link=params["predict_through_link"],
        epsilon=float(params["epsilon"]),
        max_iter=int(params["max_iterations"]),
        max_halvings=int(params["max_halvings"]),
        min_iter=int(params["min_iterations"]),
        init_scale=float(params["init_scale"]),
        random_state=seed,
    )
    if method == "gtagcdcf":
        return GTagCDCF(alpha=float(params["alpha"]), beta=float(params["beta"]), **common)
    if method == "pmf":
        return PMF(**common)
    return UserKNN(n_neighbors=int(params["neighbors"]))


def fit_predict(method: str, params: dict, train_domains: list[DomainDataset], queries: list,
                seed: int, fit_dir: Path | None = None,
                checkpoint_every: int = 0) -> tuple[list[np.ndarray], list[str]]:
    """Fit ``method`` and score ``queries[k]`` (an ``(n, 2)`` pair array) in each domain.

    Returns normalized-scale scores per domain and the artifact files
    written to ``fit_dir``.
    """
    written = []
    if method == "gtagcdcf":
        est = _estimator(method, params, seed)
        kw = {}
        if fit_dir is not None and checkpoint_every:
            ckdir = fit_dir / "checkpoints"
            ckdir.mkdir(parents=True, exist_ok=True)
            kw = dict(checkpoint_every=checkpoint_every, checkpoint_dir=ckdir)
        est.fit(train_domains, **kw)
        if fit_dir is not None:
            written += _save_fit(est, fit_dir, "")
            if kw:
                written += sorted(str(p) for p in kw["checkpoint_dir"].iterdir())
        return [est.predict(q, k) for k, q in enumerate(queries)], written
    out = []
    for dom, q in zip(train_domains, queries):
        if method == "pmf":
            est = _estimator(method, params, seed).fit(dom)
            if fit_dir is not None:
                written += _save_fit(est, fit_dir, f"-{dom.name}")
        else:
            est = _estimator(method, params, seed).fit(dom.R)
        out.append(est.predict(q))
    return out, written


def _save_fit(est, fit_dir: Path, suffix: str) -> list[str]:
    fit_dir.mkdir(parents=True, exist_ok=True)
    trace_path = fit_dir / f"trace{suffix}.csv"
    model_path = fit_dir / f"model{suffix}.gtc"
    est.trace_.to_csv(trace_path)
    save_model(est.model_, model_path)
    return [str(trace_path), str(model_path)]


def score_domain(dom: DomainDataset, holdout, scores: np.ndarray, coefficient: float) -> tuple[str, float, int]:
    if dom.feedback_kind == "explicit":
        truth = holdout.values * dom.max_preference
        return "mae", mae(scores * dom.max_preference, truth), holdout.nnz
    res = grouped_map(holdout.rows, holdout.cols, scores, holdout.values, coefficient)
    return "map", res.value, res.n_users


def _fold_job(args):
    config, domains, params, upl, fold, target, out_dir = args
    return _run_fold(config, domains, params, upl, fold, target, out_dir)


def _run_fold(config: ExperimentConfig, domains, params, upl, fold, target, out_dir):
    """Train on one fold of every domain and score its holdout.

    Artifacts go to a subdirectory of ``out_dir`` owned by this fold.
    """
    name = f"upl{upl}-fold{fold}" if config.protocol == "upl" else f"cv-fold{fold}"
    fold_dir = out_dir / "folds" / name if out_dir is not None else None
    train_doms, holdouts, written = [], [], []
    for k, dom in enumerate(domains):
        split_seed = substream(config.seed, "split", k)
        if config.protocol == "upl":
            split = make_upl_split(dom.R, upl, split_seed, fold, config.min_preferences)
            train_doms.append(dom.with_preferences(split.training_matrix(dom.R, target)))
            holdouts.append(split.holdout(dom.R, target))
        else:
            split = make_cv_split(dom.R, split_seed)
            test_fold = split.tuning_fold if target == "validation" else split.evaluation_folds[fold]
            train_doms.append(dom.with_preferences(split.training_matrix(dom.R, test_fold)))
            holdouts.append(split.holdout(dom.R, test_fold))
        if fold_dir is not None:
            p = fold_dir / "splits" / f"{dom.name}.txt"
            p.parent.mkdir(parents=True, exist_ok=True)
            (write_upl_manifest if config.protocol == "upl" else write_cv_manifest)(split, dom, p)
            written.append(str(p))
    queries = [np.c_[h.rows, h.cols] for h in holdouts]
    scores, fit_files = fit_predict(config.method, params, train_doms, queries,
                                    substream(config.seed, "init", fold), fold_dir,
                                    config.checkpoint_every)
    written += fit_files
    rows = []
    for dom, hold, s in zip(domains, holdouts, scores):
        metric, value, n = score_domain(dom, hold, s, config.relevance_coefficient)
        rows.append({"domain": dom.name, "upl": upl, "fold": fold, "metric": metric,
                     "value": value, "n": n})
    return rows, written


def evaluate(config: ExperimentConfig, domains: list[DomainDataset], params: dict,
             target: str = "test", out_dir: Path | None = None, upls=None, folds=None) -> tuple[list[dict], list[str]]:
    """Run the configured protocol for one hyperparameter combination."""
    if config.protocol == "upl":
        upls = list(upls or config.upl)
        n_folds = folds or config.folds
    else:
        upls = [None]
        n_folds = 1 if target == "validation" else (folds or 4)
        if n_folds > 4:
            raise ConfigError("the cross-validation protocol has 4 evaluation folds")
    jobs = [(config, domains, params, u, f, target, out_dir) for u in upls for f in range(n_folds)]
    if config.parallel_folds and len(jobs) > 1:
        with concurrent.futures.ProcessPoolExecutor() as pool:
            results = list(pool.map(_fold_job, jobs))
    else:
        results = [_fold_job(j) for j in jobs]
    rows = [r for rs, _ in results for r in rs]
    written = sorted({w for _, ws in results for w in ws})
    rows.sort(key=lambda r: (r["domain"], r["upl"] or 0, r["fold"]))
    return rows, written


def build_report(config: ExperimentConfig, runs: list[tuple[dict, list[dict]]]) -> dict:
    """EvalReport: metric rows per run plus per-condition fold vectors for pairing."""
    out = []
    for params, rows in runs:
        paired: dict = {}
        for r in rows:
            cond = f"upl={r['upl']}" if r["upl"] is not None else "cv"
            paired.setdefault(r["domain"], {}).setdefault(cond, []).append(r["value"])
        out.append({"params": params, "results": rows, "paired": paired})
    return {
        "format": "gtagcdcf-report/1",
        "method": config.method,
        "protocol": config.protocol,
        "seed": config.seed,
        "runs": out,
    }


def summarize(rows: list[dict]) -> list[dict]:
    groups: dict = {}
    for r in rows:
        groups.setdefault((r["domain"], r["upl"], r["metric"]), []).append(r["value"])
    return [{"domain": d, "upl": u, "metric": m, "mean": float(np.mean(v)),
             "std": float(np.std(v)), "folds": len(v)} for (d, u, m), v in groups.items()]


def format_summary(rows: list[dict]) -> str:
    lines = [f"{'domain':<16}{'condition':<12}{'metric':<8}{'mean±std':>18}{'folds':>7}"]
    for s in summarize(rows):
        cond = f"UPL={s['upl']}" if s["upl"] is not None else "CV"
        lines.append(f"{s['domain']:<16}{cond:<12}{s['metric'].upper():<8}"
                     f"{s['mean']:>11.3f}±{s['std']:.3f}{s['folds']:>7}")
    return "\n".join(lines)


def write_json(path: Path, obj) -> str:
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return str(path)


def finish_run(out: Path, written: list[str], started: float, command: str) -> None:
    meta = {
        "command": command,
        "started": time.strftime("%Y-%m-%dT%H:%M:%S", time.localtime(started)),
        "elapsed_seconds": round(time.time() - started, 3),
        "version": __version__,
        "python": platform.python_version(),
        "numpy": np.__version__,
    }
    write_json(out / "run_metadata.json", meta)
    files = sorted({str(Path(w).resolve().relative_to(out.resolve())) for w in written})
    write_json(out / "manifest.json", {"files": files, "metadata": "run_metadata.json"})


def run_experiment(config: ExperimentConfig, out: Path | None = None, echo=print) -> dict:
    """End to end: ingest, split, train and evaluate every grid point, write artifacts."""
    started = time.time()
    out = Path(out or config.output)
    out.mkdir(parents=True, exist_ok=True)
    domains = load_domains(config)
    stats = dataset_statistics(domains)
    written = [write_json(out / "dataset_stats.json", stats)]
    echo(format_statistics(stats))
    runs = []
    for gi, params in enumerate(config.grid()):
        sub = out if len(config.grid()) == 1 else out / f"grid{gi:03d}"
        rows, files = evaluate(config, domains, params, "test", sub)
        written += files
        runs.append((params, rows))
        if len(config.grid()) > 1:
            echo(f"\n# grid point {gi}: " + ", ".join(f"{k}={params[k]}" for k in sorted(params)))
        echo(format_summary(rows))
    report = build_report(config, runs)
    written.append(write_json(out / "report.json", report))
    finish_run(out, written, started, "run")
    return report


def sweep(config: ExperimentConfig, parameter: str, values: list, domains=None,
          out_path: Path | None = None, upl: int = 5) -> list[dict]:
    """Validation-set evaluation for each value of one hyperparameter.

    Other hyperparameters keep their configured (first grid) values. Rows
    are ``{param_value, domain, metric, value}`` with ``value`` averaged over
    folds; the per-fold values are kept under ``fold_values``.
    """
    if parameter not in SWEEPABLE:
        raise ConfigError(f"cannot sweep {parameter!r}; choose from {sorted(SWEEPABLE)}")
    if not values:
        raise ConfigError("empty value list")
    domains = domains if domains is not None else load_domains(config)
    base = config.grid()[0]
    table = []
    for v in values:
        params = {**base, parameter: v}
        rows, _ = evaluate(config, domains, params, "validation", None,
                           upls=[upl] if config.protocol == "upl" else None)
        for s in summarize(rows):
            vals = [r["value"] for r in rows if r["domain"] == s["domain"]]
            table.append({"param_value": v, "domain": s["domain"], "metric": s["metric"],
                          "value": s["mean"], "std": s["std"], "fold_values": vals})
    if out_path is not None:
        with open(out_path, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["param_value", "domain", "metric", "value"])
            for r in table:
                w.writerow([r["param_value"], r["domain"], r["metric"], repr(r["value"])])
    return table


def compare_reports(a: dict, b: dict, run_a: int = 0, run_b: int = 0) -> list[dict]:
    """Paired Wilcoxon test on the fold vectors two reports share."""
    pa, pb = a["runs"][run_a]["paired"], b["runs"][run_b]["paired"]
    out = []
    for dom in sorted(set(pa) & set(pb)):
        for cond in sorted(set(pa[dom]) & set(pb[dom])):
            x, y = pa[dom][cond], pb[dom][cond]
            entry = {"domain": dom, "condition": cond, "mean_a": float(np.mean(x)),
                     "mean_b": float(np.mean(y)), "n": len(x)}
            try:
                res = wilcoxon_signed_rank(x, y)
                entry.update(statistic=res.statistic, pvalue=res.pvalue, exact=res.exact)
            except ValueError as exc:
                entry.update(statistic=None, pvalue=None, note=str(exc))
            out.append(entry)
    return out


def with_overrides(config: ExperimentConfig, **kw) -> ExperimentConfig:
    return replace(config, **{k: v for k, v in kw.items() if v is not None})


def train_full(config: ExperimentConfig, out: Path | None = None, echo=print) -> dict[str, Any]:
    """Fit the configured method on all preferences and save model(s) and trace(s)."""
    started = time.time()
    out = Path(out or config.output)
    out.mkdir(parents=True, exist_ok=True)
    domains = load_domains(config)
    params = config.grid()[0]
    if config.method == "ubcf":
        raise ConfigError("ubcf is memory based; there is no model to train")
    _, written = fit_predict(config.method, params, domains, [np.zeros((0, 2), int)] * len(domains),
                             substream(config.seed, "init", 0), out, config.checkpoint_every)
    echo("wrote " + ", ".join(Path(w).name for w in written))
    finish_run(out, written, started, "train")
    return {"files": written}
