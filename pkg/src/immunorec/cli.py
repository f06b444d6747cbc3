"""Command-line entry point.

Commands: ``gen`` (synthetic dataset), ``ingest-check`` (validate a ratings
file), ``affinity`` (pair diagnostics), ``recommend`` (full pipeline for one
user), ``eval accuracy|ties|compare`` (experiment harness).

Contracts: every stochastic command requires an explicit ``--seed``; human
tables go to stdout while machine formats are written only via ``-o``; each
output file gets a JSON sidecar (or embeds) the complete effective
configuration; exit codes are 0 success, 1 usage/config error, 2 data error,
3 runtime error. ``IMMUNOREC_LOG`` (error|warn|info|debug) sets verbosity.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import asdict
from pathlib import Path

import numpy as np

from .affinity import (
    AffinityKind,
    AffinityMeasure,
    kendalls_tau,
    pearson_baseline,
    weighted_kappa,
)
from .datastore import (
    FileFormat,
    IngestConfig,
    SyntheticConfig,
    generate_synthetic,
    load_ratings,
    partition,
    save_ratings,
)
from .domain import Dataset, common_movies
from .errors import (
    EmptyDatasetError,
    EmptyPoolError,
    EmptyPopulationError,
    ImmunorecError,
    InsufficientAntigensError,
    InsufficientOverlapError,
    InsufficientRatingsError,
    ParseError,
    SampleMismatchError,
    UnknownUserError,
)
from .evaluation import accuracy_experiment, paired_comparison, ties_experiment
from .immune_network import ImmuneParams, run_to_convergence
from .recommender import recommend_top_n

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DATA = 2
EXIT_RUNTIME = 3

_DATA_ERRORS = (
    ParseError,
    EmptyDatasetError,
    UnknownUserError,
    InsufficientAntigensError,
    InsufficientRatingsError,
    SampleMismatchError,
    FileNotFoundError,
    IsADirectoryError,
    PermissionError,
)


class _Parser(argparse.ArgumentParser):
    """argparse exits 2 on usage errors; the CLI contract reserves 2 for data."""

    def error(self, message: str):  # noqa: D102 - argparse override
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError(f"must be >= 1, got {value}")
    return value


def _nonnegative_int(text: str) -> int:
    value = int(text)
    if value < 0:
        raise argparse.ArgumentTypeError(f"must be >= 0, got {value}")
    return value


def _unit_float(text: str) -> float:
    value = float(text)
    if not 0.0 <= value <= 1.0:
        raise argparse.ArgumentTypeError(f"must lie in [0, 1], got {value}")
    return value


def _add_dataset_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("data", help="ratings CSV file")
    parser.add_argument(
        "--data-format",
        choices=[f.value for f in FileFormat],
        default=FileFormat.CATEGORY_CSV.value,
        help="input file format (default: category_csv)",
    )
    parser.add_argument(
        "--min-ratings",
        type=_positive_int,
        default=20,
        metavar="N",
        help="drop users with fewer ratings (default: 20)",
    )


def _add_measure_args(parser: argparse.ArgumentParser) -> None:
    parser.add_argument(
        "--measure",
        choices=[k.value for k in AffinityKind],
        default=AffinityKind.WEIGHTED_KAPPA.value,
        help="affinity measure (default: wk)",
    )
    parser.add_argument(
        "--min-overlap",
        type=_positive_int,
        default=2,
        metavar="N",
        help="common movies below which a pair is neutral (default: 2)",
    )


def _add_immune_args(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("immune network")
    group.add_argument("--k1", type=float, default=0.3, help="stimulation rate (default: 0.3)")
    group.add_argument("--k2", type=float, default=0.2, help="suppression rate (default: 0.2)")
    group.add_argument("--k3", type=float, default=0.1, help="death rate (default: 0.1)")
    group.add_argument(
        "--antigen-concentration", type=float, default=1.0, metavar="Y",
        help="fixed antigen concentration (default: 1.0)",
    )
    group.add_argument(
        "--population", type=_positive_int, default=100, metavar="N",
        help="antibody population size (default: 100)",
    )
    group.add_argument("--dt", type=float, default=1.0, help="Euler step (default: 1.0)")
    group.add_argument(
        "--threshold", type=float, default=0.05, metavar="X",
        help="prune concentrations below this (default: 0.05)",
    )
    group.add_argument(
        "--stability", type=_positive_int, default=10, metavar="N",
        help="iterations of unchanged membership to converge (default: 10)",
    )
    group.add_argument(
        "--max-iterations", type=_nonnegative_int, default=500, metavar="N",
        help="iteration cap (default: 500)",
    )
    group.add_argument(
        "--exclude-self", action="store_true",
        help="drop the j = i term from the suppression sum",
    )
    group.add_argument(
        "--remap-negative", action="store_true",
        help="remap defined affinities a to (a+1)/2 before the dynamics",
    )


def _measure_from(args: argparse.Namespace) -> AffinityMeasure:
    return AffinityMeasure(AffinityKind(args.measure), min_overlap=args.min_overlap)


def _params_from(args: argparse.Namespace) -> ImmuneParams:
    return ImmuneParams(
        stimulation_rate=args.k1,
        suppression_rate=args.k2,
        death_rate=args.k3,
        antigen_concentration=args.antigen_concentration,
        population_size=args.population,
        dt=args.dt,
        prune_threshold=args.threshold,
        stability_window=args.stability,
        max_iterations=args.max_iterations,
        include_self=not args.exclude_self,
        remap_negative=args.remap_negative,
    )


def _ingest_config(args: argparse.Namespace) -> IngestConfig:
    return IngestConfig(
        format=FileFormat(args.data_format),
        min_ratings_per_user=args.min_ratings,
    )


def _load(args: argparse.Namespace) -> Dataset:
    dataset, _ = load_ratings(args.data, _ingest_config(args))
    return dataset


def _split_for_eval(dataset: Dataset, args: argparse.Namespace) -> tuple[Dataset, Dataset]:
    """(pool, antigens) for an eval run.

    With --pool-threshold the id rule applies; with --split-fraction a seeded
    random split; by default the full dataset plays both roles (each run
    excludes the target user itself).
    """
    if args.pool_threshold is not None:
        config = IngestConfig(min_ratings_per_user=1, pool_id_threshold=args.pool_threshold)
        return partition(dataset, config)
    if args.split_fraction is not None:
        config = IngestConfig(
            min_ratings_per_user=1,
            split_fraction=args.split_fraction,
            split_seed=args.seed,
        )
        return partition(dataset, config)
    return dataset, dataset


def _write_text(path: str | Path, text: str) -> None:
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def _config_sidecar(path: Path, payload: dict) -> None:
    sidecar = path.with_name(path.name + ".meta.json")
    _write_text(sidecar, json.dumps(payload, sort_keys=True, indent=2) + "\n")


def cmd_gen(args: argparse.Namespace) -> int:
    config = SyntheticConfig(
        num_users=args.users,
        num_movies=args.movies,
        num_clusters=args.clusters,
        noise=args.noise,
        ratings_per_user=(args.ratings_min, args.ratings_max),
        seed=args.seed,
    )
    dataset = generate_synthetic(config)
    output = Path(args.output)
    save_ratings(dataset, output)
    _config_sidecar(output, {"command": "gen", "config": config.to_dict()})
    print(f"wrote {len(dataset)} users, {len(dataset.movie_ids)} movies to {output}")
    return EXIT_OK


def cmd_ingest_check(args: argparse.Namespace) -> int:
    _, report = load_ratings(args.data, _ingest_config(args))
    print(f"users kept:    {report.users_kept}")
    print(f"users dropped: {report.users_dropped}")
    print(f"rows rejected: {report.rows_rejected}")
    print(f"movies:        {report.movies}")
    if args.output:
        _write_text(args.output, report.to_json() + "\n")
    return EXIT_OK


def cmd_affinity(args: argparse.Namespace) -> int:
    dataset = _load(args)
    for user_id in (args.user_a, args.user_b):
        if user_id not in dataset:
            raise UnknownUserError(f"user {user_id} not in dataset")
    a, b = dataset.users[args.user_a], dataset.users[args.user_b]
    overlap = common_movies(a, b)
    print(f"users {a.user_id} and {b.user_id}: {len(overlap)} common movies")
    try:
        print(f"  weighted kappa: {weighted_kappa(a, b):.6f}")
    except InsufficientOverlapError as exc:
        print(f"  weighted kappa: insufficient overlap ({exc})")
    try:
        kt = kendalls_tau(a, b)
        print(
            f"  kendalls tau:   {kt.tau:.6f} "
            f"(concordant {kt.concordant}, discordant {kt.discordant}, "
            f"ignored {kt.ignored} of {kt.total_pairs})"
        )
    except InsufficientOverlapError as exc:
        print(f"  kendalls tau:   insufficient overlap ({exc})")
    try:
        pearson = pearson_baseline(a, b)
        suffix = " (degenerate: zero variance)" if pearson.degenerate else ""
        print(f"  pearson:        {pearson.value:.6f}{suffix}")
    except InsufficientOverlapError as exc:
        print(f"  pearson:        insufficient overlap ({exc})")
    return EXIT_OK


def cmd_recommend(args: argparse.Namespace) -> int:
    dataset = _load(args)
    if args.user not in dataset:
        raise UnknownUserError(f"user {args.user} not in dataset")
    antigen = dataset.users[args.user]
    measure = _measure_from(args)
    params = _params_from(args)
    final = run_to_convergence(antigen, dataset, measure, params, args.seed)
    recommendations = recommend_top_n(final, antigen, args.count)

    status = "converged" if final.converged else "did not converge"
    print(
        f"user {args.user}: {status} after {final.iterations_used} iterations, "
        f"{len(final.members)} antibodies"
    )
    if not recommendations.entries:
        print("no recommendations: the user already rated every candidate movie")
    for rank, entry in enumerate(recommendations.entries, start=1):
        print(
            f"  {rank:2d}. movie {entry.movie_id:6d}  "
            f"predicted {entry.value:.4f}  support {entry.support}"
        )
    if args.output:
        payload = {
            "user": args.user,
            "seed": args.seed,
            "measure": asdict(measure) | {"kind": measure.kind.value},
            "params": asdict(params),
            "converged": final.converged,
            "iterations": final.iterations_used,
            "entries": [asdict(entry) for entry in recommendations.entries],
        }
        _write_text(args.output, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def _write_report(report, args: argparse.Namespace, extra: dict | None = None) -> None:
    if not args.output:
        return
    output = Path(args.output)
    if args.report_format == "json":
        _write_text(output, report.to_json_text())
    else:
        _write_text(output, report.to_csv_text())
        sidecar = {
            "kind": report.kind,
            "measure": report.measure,
            "seed": report.seed,
            "median": report.median,
            "mean": report.mean,
            "params": asdict(report.params) if report.params else None,
        }
        if extra:
            sidecar.update(extra)
        _config_sidecar(output, sidecar)


def _print_report(report) -> None:
    metric = "accuracy" if report.kind == "accuracy" else "tie_fraction"
    print(f"{report.kind} experiment, measure {report.measure}, seed {report.seed}")
    print(f"  users: {len(report.rows)}  median {metric}: {report.median:.4f}  "
          f"mean: {report.mean:.4f}")
    for row in report.rows:
        if report.kind == "accuracy":
            print(
                f"  user {row.user_id:6d}  ratings {row.num_ratings:4d}  "
                f"accuracy {row.accuracy:.4f}  fallback trials {row.fallback_trials}"
            )
        else:
            print(
                f"  user {row.user_id:6d}  ratings {row.num_ratings:4d}  "
                f"tie fraction {row.tie_fraction:.4f}  pairs skipped {row.pairs_skipped}"
            )


def cmd_eval_accuracy(args: argparse.Namespace) -> int:
    dataset = _load(args)
    pool, antigens = _split_for_eval(dataset, args)
    report = accuracy_experiment(
        antigens,
        pool,
        _measure_from(args),
        _params_from(args),
        users=args.users,
        trials=args.trials,
        seed=args.seed,
        jobs=args.jobs,
        shared_population=args.shared_population,
    )
    _print_report(report)
    _write_report(report, args)
    return EXIT_OK


def cmd_eval_ties(args: argparse.Namespace) -> int:
    dataset = _load(args)
    all_ids = dataset.user_ids
    if args.users < len(all_ids):
        rng = np.random.default_rng(np.random.SeedSequence([args.seed]))
        picked = rng.choice(np.asarray(all_ids, dtype=np.int64), size=args.users, replace=False)
        users_sample = dataset.subset(sorted(int(u) for u in picked))
    else:
        users_sample = dataset
    report = ties_experiment(users_sample, dataset, args.peers, args.seed)
    _print_report(report)
    _write_report(report, args)
    return EXIT_OK


def cmd_eval_compare(args: argparse.Namespace) -> int:
    kinds = [AffinityKind(token) for token in args.measures.split(",")]
    if len(kinds) != 2:
        raise ValueError("--measures needs exactly two comma-separated measures")
    dataset = _load(args)
    pool, antigens = _split_for_eval(dataset, args)
    params = _params_from(args)
    reports = []
    for kind in kinds:
        measure = AffinityMeasure(kind, min_overlap=args.min_overlap)
        reports.append(
            accuracy_experiment(
                antigens, pool, measure, params,
                users=args.users, trials=args.trials, seed=args.seed, jobs=args.jobs,
                shared_population=args.shared_population,
            )
        )
    comparison = paired_comparison(reports[0], reports[1])
    for report in reports:
        print(f"measure {report.measure}: median {report.median:.4f}  mean {report.mean:.4f}")
    t_text = "undefined (zero variance)" if comparison.t_statistic is None else (
        f"{comparison.t_statistic:.4f}"
    )
    print(
        f"paired comparison ({reports[0].measure} - {reports[1].measure}): "
        f"mean difference {comparison.mean_difference:+.4f}, "
        f"sd {comparison.sd_difference:.4f}, t = {t_text}, df = {comparison.degrees_of_freedom}"
    )
    if args.output:
        payload = {
            "measures": [r.measure for r in reports],
            "seed": args.seed,
            "medians": [r.median for r in reports],
            "means": [r.mean for r in reports],
            "comparison": json.loads(comparison.to_json_text()),
            "reports": [json.loads(r.to_json_text()) for r in reports],
        }
        _write_text(args.output, json.dumps(payload, sort_keys=True, indent=2) + "\n")
    return EXIT_OK


def build_parser() -> _Parser:
    parser = _Parser(prog="immunorec", description=__doc__)
    commands = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")

    gen = commands.add_parser("gen", help="generate a clustered synthetic dataset")
    gen.add_argument("--users", type=_positive_int, required=True)
    gen.add_argument("--movies", type=_positive_int, required=True)
    gen.add_argument("--clusters", type=_positive_int, default=4)
    gen.add_argument("--noise", type=_unit_float, default=0.1)
    gen.add_argument("--ratings-min", type=_positive_int, default=30, metavar="N")
    gen.add_argument("--ratings-max", type=_positive_int, default=60, metavar="N")
    gen.add_argument("--seed", type=_nonnegative_int, required=True)
    gen.add_argument("-o", "--output", required=True, metavar="FILE")
    gen.set_defaults(func=cmd_gen)

    check = commands.add_parser("ingest-check", help="validate a ratings file")
    _add_dataset_args(check)
    check.add_argument("-o", "--output", metavar="FILE", help="write the load report as JSON")
    check.set_defaults(func=cmd_ingest_check)

    pair = commands.add_parser("affinity", help="print the affinity diagnostics of a user pair")
    _add_dataset_args(pair)
    pair.add_argument("user_a", type=_positive_int)
    pair.add_argument("user_b", type=_positive_int)
    pair.set_defaults(func=cmd_affinity)

    rec = commands.add_parser("recommend", help="run the full pipeline for one user")
    _add_dataset_args(rec)
    rec.add_argument("--user", type=_positive_int, required=True)
    rec.add_argument("--count", type=_positive_int, default=10)
    _add_measure_args(rec)
    _add_immune_args(rec)
    rec.add_argument("--seed", type=_nonnegative_int, required=True)
    rec.add_argument("-o", "--output", metavar="FILE", help="write the list as JSON")
    rec.set_defaults(func=cmd_recommend)

    evaluate = commands.add_parser("eval", help="run an experiment")
    subcommands = evaluate.add_subparsers(dest="subcommand", required=True, metavar="EXPERIMENT")

    def _add_eval_common(sub: argparse.ArgumentParser) -> None:
        sub.add_argument("--seed", type=_nonnegative_int, required=True)
        sub.add_argument("-o", "--output", metavar="FILE")
        sub.add_argument("--report-format", choices=["csv", "json"], default="csv")

    def _add_shared_flag(sub: argparse.ArgumentParser) -> None:
        sub.add_argument(
            "--shared-population", action="store_true",
            help="exploration only: reuse one network run per user instead of "
                 "one per hidden trial (leaks selection information)",
        )

    def _add_split_args(sub: argparse.ArgumentParser) -> None:
        sub.add_argument(
            "--pool-threshold", type=_nonnegative_int, default=None, metavar="ID",
            help="user ids above this form the pool, the rest are test users",
        )
        sub.add_argument(
            "--split-fraction", type=float, default=None, metavar="F",
            help="seeded random split: this fraction of users forms the pool",
        )

    accuracy = subcommands.add_parser("accuracy", help="hidden-rating prediction accuracy")
    _add_dataset_args(accuracy)
    accuracy.add_argument("--users", type=_positive_int, required=True)
    accuracy.add_argument("--trials", type=_positive_int, default=20)
    accuracy.add_argument("--jobs", type=_positive_int, default=1)
    _add_measure_args(accuracy)
    _add_immune_args(accuracy)
    _add_split_args(accuracy)
    _add_shared_flag(accuracy)
    _add_eval_common(accuracy)
    accuracy.set_defaults(func=cmd_eval_accuracy)

    ties = subcommands.add_parser("ties", help="rank information lost to ties")
    _add_dataset_args(ties)
    ties.add_argument("--users", type=_positive_int, required=True)
    ties.add_argument("--peers", type=_positive_int, default=30,
                      help="sampled peers per user (default: 30)")
    _add_eval_common(ties)
    ties.set_defaults(func=cmd_eval_ties)

    compare = subcommands.add_parser("compare", help="paired accuracy of two measures")
    _add_dataset_args(compare)
    compare.add_argument("--measures", default="wk,kt", metavar="A,B")
    compare.add_argument("--users", type=_positive_int, required=True)
    compare.add_argument("--trials", type=_positive_int, default=20)
    compare.add_argument("--jobs", type=_positive_int, default=1)
    compare.add_argument("--min-overlap", type=_positive_int, default=2, metavar="N")
    _add_immune_args(compare)
    _add_split_args(compare)
    _add_shared_flag(compare)
    _add_eval_common(compare)
    compare.set_defaults(func=cmd_eval_compare)

    return parser


_LOG_LEVELS = {
    "error": logging.ERROR,
    "warn": logging.WARNING,
    "info": logging.INFO,
    "debug": logging.DEBUG,
}


def main(argv: list[str] | None = None) -> int:
    level_name = os.environ.get("IMMUNOREC_LOG", "warn").lower()
    logging.basicConfig(
        level=_LOG_LEVELS.get(level_name, logging.WARNING),
        format="%(levelname)s %(name)s: %(message)s",
    )
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except ValueError as exc:
        print(f"immunorec: config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except _DATA_ERRORS as exc:
        print(f"immunorec: data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (EmptyPoolError, EmptyPopulationError, InsufficientOverlapError) as exc:
        print(f"immunorec: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    except ImmunorecError as exc:
        print(f"immunorec: runtime error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
