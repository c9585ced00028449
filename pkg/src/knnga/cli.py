"""Command line entry point.

Exit codes: 0 success, 2 configuration/usage error, 3 data error.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import data_model
from .data_model import Dataset, parse_arff
from .errors import ConfigError, DataError, StageError
from .evaluation import cross_validate, evaluate_full_training
from .experiment import load_spec, output_dir, run_experiment, write_report
from .genetic_search import Chromosome, GaConfig, format_ranking, format_run, parse_prune_policy
from .knn_core import KnnConfig

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3


def _load_data(path: str, class_attribute: str | None, schema_path: str | None) -> Dataset:
    p = Path(path)
    if not p.is_file():
        raise DataError(f"data file not found: {p}")
    schema = None
    if schema_path is not None:
        sp = Path(schema_path)
        if not sp.is_file():
            raise ConfigError(f"schema file not found: {sp}")
        schema = parse_arff(sp.read_text(encoding="utf-8"), class_attribute).schema
    elif p.suffix.lower() == ".csv":
        raise ConfigError("CSV data needs --schema (an ARFF header declaring the attributes)")
    return data_model.load(p, class_attribute, schema)


def _knn(args, k: int | None = None) -> KnnConfig:
    return KnnConfig(k=k if k is not None else args.k, weighting=args.weighting,
                     missing_policy=args.missing, normalization=args.normalization)


def cmd_run(args) -> int:
    spec = load_spec(args.spec)
    report = run_experiment(spec, workers=args.workers)
    formats = [f.strip() for f in args.format.split(",")]
    for p in write_report(report, output_dir(spec, args.out), formats):
        print(p)
    return EXIT_OK


def cmd_eval(args) -> int:
    d = _load_data(args.data, args.class_attribute, args.schema)
    mask = Chromosome.parse(args.mask) if args.mask else Chromosome.ones(d.n_features)
    cfg = _knn(args)
    if args.full_training:
        res = evaluate_full_training(d, mask, cfg)
    else:
        res = cross_validate(d, mask, cfg, args.folds, args.seed)
    print(f"dataset={d.name} protocol={res.protocol} k={cfg.k} mask={mask} "
          f"correct={res.correct} instances={res.n_evaluated} accuracy={res.accuracy:.6f}")
    if res.fold_accuracies:
        print("fold_accuracies=" + ",".join(f"{a:.6f}" for a in res.fold_accuracies))
    return EXIT_OK


def cmd_rank(args) -> int:
    from .experiment import select_features

    d = _load_data(args.data, args.class_attribute, args.schema)
    ga = GaConfig(seed=args.seed, population_size=args.population, max_generations=args.generations)
    run, ranking, pruned, fitness = select_features(d, ga, _knn(args), parse_prune_policy(args.policy),
                                                    args.fitness_folds, args.seed, args.workers)
    names = [d.schema[c].name for c in d.feature_indices]
    print(format_run(run))
    print()
    print(format_ranking(ranking, names))
    print()
    print(f"selected mask: {pruned.mask}")
    print(f"fitness: {fitness(pruned.mask):.6f} with GA, {fitness(Chromosome.ones(d.n_features)):.6f} without GA")
    return EXIT_OK


def cmd_synth(args) -> int:
    text = data_model.to_arff(data_model.synth_heart_ap(args.n, args.seed))
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
        print(args.out)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def cmd_validate(args) -> int:
    d = _load_data(args.file, args.class_attribute, args.schema)
    if len(d) == 0:
        raise DataError(f"{args.file}: no data rows")
    missing = sum(v is None for row in d.rows for v in row)
    print(f"ok: {d.name}: {len(d)} instances, {len(d.schema)} attributes, "
          f"class {d.class_spec.name!r} with {d.n_classes} categories, {missing} missing cells")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="knnga", description="KNN classification with genetic attribute selection")
    p.add_argument("-v", "--verbose", action="store_true", help="log GA progress to stderr")
    sub = p.add_subparsers(dest="command", required=True)

    def data_opts(sp, positional=False):
        if positional:
            sp.add_argument("file")
        else:
            sp.add_argument("--data", required=True, help="ARFF or CSV file")
        sp.add_argument("--class", dest="class_attribute", help="class attribute name (default: last)")
        sp.add_argument("--schema", help="ARFF header typing a CSV file")

    def knn_opts(sp):
        sp.add_argument("--k", type=int, default=1)
        sp.add_argument("--weighting", default="majority", choices=["majority", "inverse-distance"])
        sp.add_argument("--missing", default="mean-impute", choices=["mean-impute", "max-penalty"])
        sp.add_argument("--normalization", default="minmax", choices=["minmax", "zscore", "none"])

    sp = sub.add_parser("run", help="run an experiment spec and write reports")
    sp.add_argument("--spec", required=True)
    sp.add_argument("--out", help="output directory (overrides spec and KNNGA_OUTPUT_DIR)")
    sp.add_argument("--format", default="markdown,csv")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_run)

    sp = sub.add_parser("eval", help="evaluate KNN on one mask")
    data_opts(sp)
    knn_opts(sp)
    sp.add_argument("--folds", type=int, default=5)
    sp.add_argument("--full-training", action="store_true", help="test on the training set itself")
    sp.add_argument("--mask", help="attribute mask such as 1011 (default: all)")
    sp.add_argument("--seed", type=int, default=1)
    sp.set_defaults(func=cmd_eval)

    sp = sub.add_parser("rank", help="run the genetic search and rank attributes")
    data_opts(sp)
    knn_opts(sp)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--population", type=int, default=20)
    sp.add_argument("--generations", type=int, default=20)
    sp.add_argument("--fitness-folds", type=int, default=5)
    sp.add_argument("--policy", default="best-chromosome")
    sp.add_argument("--workers", type=int, default=1)
    sp.set_defaults(func=cmd_rank)

    sp = sub.add_parser("synth", help="write a synthetic heart-AP ARFF file")
    sp.add_argument("--n", type=int, default=40)
    sp.add_argument("--seed", type=int, default=1)
    sp.add_argument("--out")
    sp.set_defaults(func=cmd_synth)

    sp = sub.add_parser("validate", help="parse a data file and check its invariants")
    data_opts(sp, positional=True)
    sp.set_defaults(func=cmd_validate)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, stream=sys.stderr,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA if isinstance(exc.cause, (DataError, OSError)) else EXIT_CONFIG
    except DataError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ConfigError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
