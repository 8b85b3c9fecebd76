"""Command line entry point: ``gtagcdcf <verb> --config run.yaml ...``."""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from pathlib import Path

from .experiment import (
    SWEEPABLE,
    ConfigError,
    build_report,
    compare_reports,
    dataset_statistics,
    evaluate,
    finish_run,
    format_statistics,
    format_summary,
    load_config,
    load_domains,
    run_experiment,
    sweep,
    train_full,
    write_json,
)
from .ingest import IngestError
from .model import DivergenceError


def _parse_values(text: str) -> list:
    out = []
    for tok in text.split(","):
        tok = tok.strip()
        try:
            out.append(int(tok))
        except ValueError:
            out.append(float(tok))
    return out


def _parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", required=True, help="experiment YAML file")
    common.add_argument("--seed", type=int, help="root seed (overrides the config)")
    common.add_argument("--out", help="output directory (overrides the config)")
    common.add_argument("--folds", type=int, help="number of folds to run")
    common.add_argument("--upl", type=int, action="append",
                        help="user profile length; repeat for several")
    common.add_argument("--parallel-folds", action="store_true", help="run folds in worker processes")
    common.add_argument("-v", "--verbose", action="store_true")

    p = argparse.ArgumentParser(prog="gtagcdcf", description=__doc__)
    sub = p.add_subparsers(dest="verb", required=True)
    sub.add_parser("ingest-check", parents=[common], help="load the domains and print statistics")
    sub.add_parser("train", parents=[common], help="fit on all preferences and save the model")
    sub.add_parser("evaluate", parents=[common],
                   help="run the evaluation protocol for the first hyperparameter setting")
    s = sub.add_parser("sweep", parents=[common], help="validation sweep of one hyperparameter")
    s.add_argument("--param", required=True, choices=sorted(SWEEPABLE))
    s.add_argument("--values", required=True, help="comma separated values")
    sub.add_parser("run", parents=[common], help="statistics plus evaluation of every grid point")
    c = sub.add_parser("compare", help="paired Wilcoxon test between two reports")
    c.add_argument("report_a")
    c.add_argument("report_b")
    return p


def _config(args):
    return load_config(
        args.config,
        seed=args.seed,
        output=args.out,
        folds=args.folds,
        upl=args.upl,
        parallel_folds=True if args.parallel_folds else None,
    )


def _ingest_check(cfg, args):
    stats = dataset_statistics(load_domains(cfg))
    print(format_statistics(stats))
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_json(out / "dataset_stats.json", stats)


def _evaluate(cfg, args):
    started = time.time()
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    domains = load_domains(cfg)
    params = cfg.grid()[0]
    rows, written = evaluate(cfg, domains, params, "test", out)
    written.append(write_json(out / "report.json", build_report(cfg, [(params, rows)])))
    finish_run(out, written, started, "evaluate")
    print(format_summary(rows))


def _sweep(cfg, args):
    out = Path(cfg.output)
    out.mkdir(parents=True, exist_ok=True)
    started = time.time()
    path = out / f"sweep-{args.param}.csv"
    table = sweep(cfg, args.param, _parse_values(args.values), out_path=path,
                  upl=(args.upl or cfg.upl)[0])
    finish_run(out, [str(path)], started, "sweep")
    for r in table:
        print(f"{args.param}={r['param_value']:<10} {r['domain']:<16} {r['metric'].upper()} "
              f"{r['value']:.4f}±{r['std']:.4f}")


def _compare(args):
    a = json.loads(Path(args.report_a).read_text())
    b = json.loads(Path(args.report_b).read_text())
    for r in compare_reports(a, b):
        p = "n/a" if r["pvalue"] is None else f"{r['pvalue']:.4g}"
        print(f"{r['domain']:<16} {r['condition']:<8} {r['mean_a']:.4f} vs {r['mean_b']:.4f}  "
              f"n={r['n']}  p={p}")


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.verb == "compare":
            _compare(args)
            return 0
        cfg = _config(args)
        if args.verb == "ingest-check":
            _ingest_check(cfg, args)
        elif args.verb == "train":
            train_full(cfg)
        elif args.verb == "evaluate":
            _evaluate(cfg, args)
        elif args.verb == "sweep":
            _sweep(cfg, args)
        elif args.verb == "run":
            run_experiment(cfg)
    except (ConfigError, IngestError, DivergenceError, OSError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
