"""Experiment harness: hidden-rating accuracy, tie loss, and paired tests.

Accuracy protocol: for each test user, hide one rating, rebuild the
neighbourhood from scratch with the remaining information, predict the
hidden movie, and repeat over a seeded sample of distinct movies. Per-user

    accuracy = 1 - mean(|prediction - actual|)

on the 0-1 rating scale, so being off by exactly one category for every
trial scores 0.8.

Seed discipline: every random choice derives from the master seed plus
stable integers (user id, trial index) via ``numpy.random.SeedSequence``, so
per-user work is order- and schedule-independent and identical across
measures. That makes two runs with different measures a true paired design.
"""

from __future__ import annotations

import csv
import io
import json
import logging
import math
import statistics
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .affinity import AffinityMeasure, PairwiseCache, tie_ignored_fraction
from .domain import Dataset, UserProfile, rating_from_category
from .errors import (
    ImmunorecError,
    InsufficientAntigensError,
    InsufficientOverlapError,
    InsufficientRatingsError,
    SampleMismatchError,
)
from .immune_network import ImmuneParams, run_to_convergence
from .recommender import predict_rating

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class AccuracyRow:
    user_id: int
    num_ratings: int
    accuracy: float
    fallback_trials: int


@dataclass(frozen=True)
class TieRow:
    user_id: int
    num_ratings: int
    tie_fraction: float
    pairs_skipped: int


@dataclass(frozen=True)
class ExperimentReport:
    """Per-user rows plus aggregates; serializable to CSV and JSON."""

    kind: str                  # "accuracy" | "ties"
    measure: str
    rows: tuple
    median: float
    mean: float
    seed: int
    params: ImmuneParams | None

    def metric_values(self) -> list[float]:
        if self.kind == "accuracy":
            return [row.accuracy for row in self.rows]
        return [row.tie_fraction for row in self.rows]

    def to_csv_text(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        if self.kind == "accuracy":
            writer.writerow(["user_id", "num_ratings", "accuracy", "fallback_trials"])
            for row in self.rows:
                writer.writerow([row.user_id, row.num_ratings, repr(row.accuracy), row.fallback_trials])
        else:
            writer.writerow(["user_id", "num_ratings", "tie_fraction", "pairs_skipped"])
            for row in self.rows:
                writer.writerow([row.user_id, row.num_ratings, repr(row.tie_fraction), row.pairs_skipped])
        return buffer.getvalue()

    def to_json_text(self) -> str:
        payload = {
            "kind": self.kind,
            "measure": self.measure,
            "seed": self.seed,
            "median": self.median,
            "mean": self.mean,
            "params": asdict(self.params) if self.params is not None else None,
            "rows": [asdict(row) for row in self.rows],
        }
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def pool_mean_rating(pool: Dataset) -> float:
    """Unweighted mean of every rating in the pool (the trivial predictor)."""
    total = 0.0
    count = 0
    for profile in pool:
        for category in profile.categories.values():
            total += rating_from_category(category)
            count += 1
    if count == 0:
        raise ImmunorecError("pool has no ratings")
    return total / count


def select_trial_movies(profile: UserProfile, trials: int, seed: int) -> list[int]:
    """The seeded hidden-movie sample for one user: distinct, without replacement.

    Depends only on (seed, user_id), never on the measure, so different
    measures evaluated under one master seed hide identical movies.
    """
    rng = np.random.default_rng(np.random.SeedSequence([seed, profile.user_id]))
    picked = rng.choice(profile.movie_array, size=trials, replace=False)
    return [int(m) for m in picked]


def _trial_seed(seed: int, user_id: int, trial_index: int) -> int:
    return int(np.random.SeedSequence([seed, user_id, trial_index]).generate_state(1)[0])


def user_accuracy(
    antigen: UserProfile,
    pool: Dataset,
    measure: AffinityMeasure,
    params: ImmuneParams,
    trials: int = 20,
    seed: int = 0,
    *,
    pair_cache: PairwiseCache | None = None,
    shared_population: bool = False,
) -> AccuracyRow:
    """Hidden-rating accuracy for one user over ``trials`` leave-one-out runs.

    Each trial removes a single rating, runs the full immune-network pipeline
    on the reduced profile (the user's own pool entry is never eligible, so
    the hidden rating is invisible everywhere), and scores the prediction.
    Fallback predictions count toward the average but are tallied in
    ``fallback_trials`` so their influence stays auditable.

    ``shared_population`` is an exploration-only shortcut: one network run on
    the FULL profile serves every trial. Neighbour selection then sees the
    hidden ratings, so it is not leak-free and is never used for reported
    results.

    Raises :class:`InsufficientRatingsError` unless the user rated strictly
    more than ``trials`` movies.
    """
    if len(antigen) <= trials:
        raise InsufficientRatingsError(
            f"user {antigen.user_id} rated {len(antigen)} movies, need more than {trials}"
        )
    hidden_movies = select_trial_movies(antigen, trials, seed)

    shared_final = None
    if shared_population:
        # seed index `trials` can never collide with a per-trial seed
        shared_final = run_to_convergence(
            antigen, pool, measure, params,
            _trial_seed(seed, antigen.user_id, trials),
            pair_cache=pair_cache,
        )

    total_error = 0.0
    fallbacks = 0
    for trial_index, movie_id in enumerate(hidden_movies):
        actual = antigen.rating(movie_id)
        if shared_final is not None:
            final = shared_final
        else:
            final = run_to_convergence(
                antigen.without_movie(movie_id),
                pool,
                measure,
                params,
                _trial_seed(seed, antigen.user_id, trial_index),
                pair_cache=pair_cache,
            )
        if final.members:
            prediction = predict_rating(final, movie_id)
            value = prediction.value
            fallbacks += int(prediction.fallback)
        else:
            # Extinct population (exhausted pool): fall back to the pool mean.
            value = pool_mean_rating(pool)
            fallbacks += 1
        total_error += abs(value - actual)
    return AccuracyRow(
        user_id=antigen.user_id,
        num_ratings=len(antigen),
        accuracy=1.0 - total_error / trials,
        fallback_trials=fallbacks,
    )


def _eligible_antigens(antigens: Dataset, trials: int) -> list[int]:
    return [uid for uid in antigens.user_ids if len(antigens.users[uid]) > trials]


_WORKER: tuple | None = None


def _worker_init(pool: Dataset, measure: AffinityMeasure, params: ImmuneParams,
                 trials: int, seed: int, shared_population: bool) -> None:
    global _WORKER
    _WORKER = (pool, measure, params, trials, seed, shared_population, PairwiseCache(measure))


def _worker_run(antigen: UserProfile) -> AccuracyRow:
    assert _WORKER is not None
    pool, measure, params, trials, seed, shared, cache = _WORKER
    return user_accuracy(
        antigen, pool, measure, params, trials, seed,
        pair_cache=cache, shared_population=shared,
    )


def accuracy_experiment(
    antigens: Dataset,
    pool: Dataset,
    measure: AffinityMeasure,
    params: ImmuneParams,
    users: int,
    trials: int,
    seed: int,
    *,
    pair_cache: PairwiseCache | None = None,
    jobs: int = 1,
    shared_population: bool = False,
) -> ExperimentReport:
    """Hidden-rating accuracy over a seeded sample of eligible test users.

    Eligible users rated more than ``trials`` movies. Results are identical
    for any ``jobs`` value because every trial seeds itself from
    (seed, user id, trial index) alone.

    Raises :class:`InsufficientAntigensError` when the sample cannot be drawn.
    """
    eligible = _eligible_antigens(antigens, trials)
    if len(eligible) < users:
        raise InsufficientAntigensError(
            f"need {users} users with more than {trials} ratings, found {len(eligible)}"
        )
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    sample = sorted(
        int(u) for u in rng.choice(np.asarray(eligible, dtype=np.int64), size=users, replace=False)
    )
    profiles = [antigens.users[uid] for uid in sample]

    if jobs > 1:
        with ProcessPoolExecutor(
            max_workers=jobs,
            initializer=_worker_init,
            initargs=(pool, measure, params, trials, seed, shared_population),
        ) as executor:
            rows = list(executor.map(_worker_run, profiles))
    else:
        cache = pair_cache if pair_cache is not None else PairwiseCache(measure)
        rows = [
            user_accuracy(
                antigen, pool, measure, params, trials, seed,
                pair_cache=cache, shared_population=shared_population,
            )
            for antigen in profiles
        ]

    accuracies = [row.accuracy for row in rows]
    return ExperimentReport(
        kind="accuracy",
        measure=measure.kind.value,
        rows=tuple(rows),
        median=float(statistics.median(accuracies)),
        mean=float(statistics.fmean(accuracies)),
        seed=seed,
        params=params,
    )


def ties_experiment(
    users_sample: Dataset,
    peers: Dataset,
    sample_pairs_per_user: int,
    seed: int,
) -> ExperimentReport:
    """Average fraction of rank information lost to ties, per sampled user.

    For every user, a seeded sample of peers is drawn and the ignored-pair
    fraction of each comparable pair (2+ common movies) is averaged; pairs
    without enough overlap are skipped and counted. Users with no comparable
    peer at all are dropped with a diagnostic.
    """
    rows: list[TieRow] = []
    for user_id in users_sample.user_ids:
        profile = users_sample.users[user_id]
        candidates = [uid for uid in peers.user_ids if uid != user_id]
        if not candidates:
            log.warning("user %d: no peers available, skipped", user_id)
            continue
        rng = np.random.default_rng(np.random.SeedSequence([seed, user_id]))
        k = min(sample_pairs_per_user, len(candidates))
        picked = sorted(
            int(u)
            for u in rng.choice(np.asarray(candidates, dtype=np.int64), size=k, replace=False)
        )
        fractions = []
        skipped = 0
        for peer_id in picked:
            try:
                fractions.append(tie_ignored_fraction(profile, peers.users[peer_id]))
            except InsufficientOverlapError:
                skipped += 1
        if not fractions:
            log.warning(
                "user %d: none of %d sampled peers shared 2+ movies, skipped", user_id, k
            )
            continue
        rows.append(
            TieRow(
                user_id=user_id,
                num_ratings=len(profile),
                tie_fraction=float(statistics.fmean(fractions)),
                pairs_skipped=skipped,
            )
        )
    if not rows:
        raise ImmunorecError("no sampled user had a peer with 2 or more common movies")
    values = [row.tie_fraction for row in rows]
    return ExperimentReport(
        kind="ties",
        measure="kt",
        rows=tuple(rows),
        median=float(statistics.median(values)),
        mean=float(statistics.fmean(values)),
        seed=seed,
        params=None,
    )


@dataclass(frozen=True)
class PairedComparison:
    """Paired t summary of two accuracy reports on identical trials.

    ``t_statistic`` is None when the differences have zero variance (the
    statistic is undefined there); judging significance is left to the
    reader.
    """

    n: int
    differences: tuple[float, ...]
    mean_difference: float
    sd_difference: float
    t_statistic: float | None
    degrees_of_freedom: int

    def to_json_text(self) -> str:
        payload = asdict(self)
        payload["differences"] = list(self.differences)
        return json.dumps(payload, sort_keys=True, indent=2) + "\n"


def paired_comparison(a: ExperimentReport, b: ExperimentReport) -> PairedComparison:
    """Per-user differences and the paired t statistic for two reports.

    Both reports must come from the same seed and cover the same users in
    the same order (which the seed discipline guarantees); otherwise
    :class:`SampleMismatchError` is raised.
    """
    if a.kind != "accuracy" or b.kind != "accuracy":
        raise SampleMismatchError("paired comparison needs two accuracy reports")
    if a.seed != b.seed:
        raise SampleMismatchError(f"seeds differ: {a.seed} vs {b.seed}")
    ids_a = [row.user_id for row in a.rows]
    ids_b = [row.user_id for row in b.rows]
    if ids_a != ids_b:
        raise SampleMismatchError("user samples differ between the two reports")
    if not ids_a:
        raise SampleMismatchError("reports contain no rows")

    diffs = tuple(ra.accuracy - rb.accuracy for ra, rb in zip(a.rows, b.rows))
    n = len(diffs)
    mean_diff = float(statistics.fmean(diffs))
    sd = float(statistics.stdev(diffs)) if n >= 2 else 0.0
    if n < 2 or sd == 0.0:
        t_stat = None
    else:
        t_stat = mean_diff / (sd / math.sqrt(n))
    return PairedComparison(
        n=n,
        differences=diffs,
        mean_difference=mean_diff,
        sd_difference=sd,
        t_statistic=t_stat,
        degrees_of_freedom=n - 1,
    )
