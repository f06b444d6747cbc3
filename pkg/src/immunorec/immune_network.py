"""Idiotypic immune-network selection of a recommendation neighbourhood.

One target user (the antigen) is matched against a population of candidate
users (antibodies) drawn from a pool. Each antibody carries a concentration
that evolves by forward-Euler steps of

    dx_i/dt = k1 * m_i * x_i * y  -  (k2/n) * sum_j m_ij * x_i * x_j  -  k3 * x_i

where m_i is the antibody-antigen affinity, m_ij the antibody-antibody
affinity, y the fixed antigen concentration and n the current population
size. Stimulation rewards agreement with the antigen; suppression penalises
redundancy inside the population; the death term thins out everything else.
Antibodies whose concentration falls below a threshold are discarded for
good and replaced by fresh draws from the pool. The run stops once
membership has been unchanged for a configured number of consecutive
iterations.

Updates are simultaneous (all dx_i computed from the pre-step state) and all
randomness flows through one seeded generator, so a run is a pure function
of (antigen, pool, measure, params, seed).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .affinity import AffinityMeasure, AffinityValue, PairwiseCache, affinity
from .domain import Dataset, UserProfile
from .errors import EmptyPoolError

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ImmuneParams:
    """Dynamics constants and run limits.

    The rate defaults (0.3 / 0.2 / 0.1) are the standard operating point for
    this model family; ``dt`` is exposed because the continuous equation is
    integrated by plain forward Euler.
    """

    stimulation_rate: float = 0.3      # k1
    suppression_rate: float = 0.2      # k2
    death_rate: float = 0.1            # k3
    antigen_concentration: float = 1.0  # y
    population_size: int = 100
    dt: float = 1.0
    prune_threshold: float = 0.05
    initial_concentration: float = 1.0
    stability_window: int = 10
    max_iterations: int = 500
    include_self: bool = True          # keep j = i in the suppression sum
    remap_negative: bool = False       # map defined affinities a -> (a+1)/2

    def __post_init__(self) -> None:
        if min(self.stimulation_rate, self.suppression_rate, self.death_rate) < 0:
            raise ValueError("rates k1, k2, k3 must be non-negative")
        if self.antigen_concentration <= 0:
            raise ValueError("antigen_concentration must be positive")
        if self.population_size < 1:
            raise ValueError("population_size must be >= 1")
        if self.dt <= 0:
            raise ValueError("dt must be positive")
        if self.prune_threshold < 0:
            raise ValueError("prune_threshold must be >= 0")
        if self.initial_concentration <= 0:
            raise ValueError("initial_concentration must be positive")
        if self.stability_window < 1:
            raise ValueError("stability_window must be >= 1")
        if self.max_iterations < 0:
            raise ValueError("max_iterations must be >= 0")


@dataclass(frozen=True)
class Antibody:
    """Read-only view of one population member."""

    profile: UserProfile
    concentration: float
    antigen_affinity: float


@dataclass
class AisState:
    """Mutable run state: membership, concentrations, and cached affinities.

    ``members`` is in admission order and indexes the concentration vector,
    the antigen-affinity vector and the rows/columns of the pairwise matrix.
    Member ids, ``pool_remaining`` and ``discarded`` stay mutually disjoint
    and together always cover the original eligible candidate set.
    """

    antigen: UserProfile
    pool: Dataset
    measure: AffinityMeasure
    members: list[UserProfile]
    concentrations: np.ndarray
    antigen_affinities: np.ndarray
    matrix: np.ndarray
    pool_remaining: list[int]
    discarded: set[int] = field(default_factory=set)
    iteration: int = 0
    stable_count: int = 0
    cache: PairwiseCache | None = None

    @property
    def member_ids(self) -> list[int]:
        return [p.user_id for p in self.members]

    def antibodies(self) -> list[Antibody]:
        return [
            Antibody(p, float(x), float(m))
            for p, x, m in zip(self.members, self.concentrations, self.antigen_affinities)
        ]


@dataclass(frozen=True)
class FinalPopulation:
    """Converged (or timed-out) neighbourhood with prediction weights."""

    members: tuple[tuple[UserProfile, float], ...]
    converged: bool
    iterations_used: int


def _usable(value: AffinityValue, params: ImmuneParams) -> float:
    """The number the dynamics consume: neutral 0 when overlap is short,
    optionally remapped to [0, 1] otherwise."""
    if value.insufficient_overlap:
        return 0.0
    if params.remap_negative:
        return (value.value + 1.0) / 2.0
    return value.value


def init_population(
    antigen: UserProfile,
    pool: Dataset,
    measure: AffinityMeasure,
    params: ImmuneParams,
    seed: int | np.random.Generator,
    *,
    pair_cache: PairwiseCache | None = None,
) -> AisState:
    """Draw the initial antibody sample and compute all affinities.

    Samples ``min(population_size, eligible pool)`` users uniformly without
    replacement with a seeded generator; the antigen's own user id is never
    eligible. Every antibody starts at ``initial_concentration``.

    Raises :class:`EmptyPoolError` when no candidate exists.
    """
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    eligible = [uid for uid in pool.user_ids if uid != antigen.user_id]
    if not eligible:
        raise EmptyPoolError("no eligible candidate antibodies in the pool")

    size = min(params.population_size, len(eligible))
    if size < params.population_size:
        log.warning(
            "pool shortfall: wanted %d antibodies, only %d candidates",
            params.population_size,
            len(eligible),
        )
    chosen = rng.choice(np.asarray(eligible, dtype=np.int64), size=size, replace=False)
    chosen_ids = sorted(int(u) for u in chosen)

    cache = pair_cache if pair_cache is not None else PairwiseCache(measure)
    members = [pool.users[uid] for uid in chosen_ids]
    m_i = np.array(
        [_usable(affinity(measure, antigen, p), params) for p in members], dtype=np.float64
    )
    matrix = np.empty((size, size), dtype=np.float64)
    for i in range(size):
        for j in range(i, size):
            value = _usable(cache.lookup(members[i], members[j]), params)
            matrix[i, j] = value
            matrix[j, i] = value

    return AisState(
        antigen=antigen,
        pool=pool,
        measure=measure,
        members=members,
        concentrations=np.full(size, params.initial_concentration, dtype=np.float64),
        antigen_affinities=m_i,
        matrix=matrix,
        pool_remaining=sorted(set(eligible) - set(chosen_ids)),
        cache=cache,
    )


def concentration_step(state: AisState, params: ImmuneParams) -> AisState:
    """One simultaneous Euler update of every concentration, clamped at 0.

    The suppression sum runs over the whole current population including
    j = i unless ``params.include_self`` is off.
    """
    x = state.concentrations
    n = x.size
    if n == 0:
        return state
    # Row-wise multiply+reduce instead of a BLAS matvec keeps the summation
    # order fixed across builds, which the bit-identical rerun contract needs.
    interact = (state.matrix * x[None, :]).sum(axis=1)
    if not params.include_self:
        interact = interact - np.diagonal(state.matrix) * x
    dx = (
        params.stimulation_rate * params.antigen_concentration * state.antigen_affinities * x
        - (params.suppression_rate / n) * x * interact
        - params.death_rate * x
    )
    state.concentrations = np.maximum(0.0, x + params.dt * dx)
    return state


def _admit(state: AisState, profile: UserProfile, params: ImmuneParams) -> None:
    """Append one antibody: extend the vectors and the affinity matrix."""
    assert state.cache is not None
    m_i = _usable(affinity(state.measure, state.antigen, profile), params)
    row = np.array(
        [_usable(state.cache.lookup(profile, member), params) for member in state.members],
        dtype=np.float64,
    )
    self_value = _usable(state.cache.lookup(profile, profile), params)

    k = len(state.members)
    grown = np.empty((k + 1, k + 1), dtype=np.float64)
    grown[:k, :k] = state.matrix
    grown[k, :k] = row
    grown[:k, k] = row
    grown[k, k] = self_value
    state.matrix = grown
    state.members.append(profile)
    state.concentrations = np.append(state.concentrations, params.initial_concentration)
    state.antigen_affinities = np.append(state.antigen_affinities, m_i)


def prune_and_replace(
    state: AisState, params: ImmuneParams, rng: np.random.Generator
) -> AisState:
    """Discard antibodies below the prune threshold and refill from the pool.

    Pruned user ids are permanently discarded (never redrawn). Replacements
    are drawn uniformly from the untouched remainder of the pool, up to the
    removed count; an exhausted pool shrinks the population instead. The
    stability counter resets on any membership change and increments
    otherwise.
    """
    below = state.concentrations < params.prune_threshold
    if below.any():
        keep = ~below
        removed = [p.user_id for p, gone in zip(state.members, below) if gone]
        state.discarded.update(removed)
        state.members = [p for p, stay in zip(state.members, keep) if stay]
        state.concentrations = state.concentrations[keep]
        state.antigen_affinities = state.antigen_affinities[keep]
        state.matrix = state.matrix[np.ix_(keep, keep)]

        want = len(removed)
        draw = min(want, len(state.pool_remaining))
        if draw < want:
            log.info(
                "pool exhausted: replacing %d of %d pruned antibodies (population now %d)",
                draw,
                want,
                len(state.members) + draw,
            )
        if draw > 0:
            picked = rng.choice(
                np.asarray(state.pool_remaining, dtype=np.int64), size=draw, replace=False
            )
            newcomer_ids = sorted(int(u) for u in picked)
            state.pool_remaining = sorted(set(state.pool_remaining) - set(newcomer_ids))
            for uid in newcomer_ids:
                _admit(state, state.pool.users[uid], params)
        state.stable_count = 0
    else:
        state.stable_count += 1
    return state


def run_to_convergence(
    antigen: UserProfile,
    pool: Dataset,
    measure: AffinityMeasure,
    params: ImmuneParams,
    seed: int,
    *,
    pair_cache: PairwiseCache | None = None,
) -> FinalPopulation:
    """Full selection loop: init, then step+prune until membership settles.

    Converged means the member set was unchanged for ``stability_window``
    consecutive iterations; hitting ``max_iterations`` first returns the
    current population with ``converged=False`` and a warning. Reusing a
    ``pair_cache`` across runs on the same pool skips recomputing
    antibody-antibody affinities and cannot change any result.
    """
    rng = np.random.default_rng(seed)
    state = init_population(antigen, pool, measure, params, rng, pair_cache=pair_cache)

    converged = False
    iterations = 0
    for iterations in range(1, params.max_iterations + 1):
        concentration_step(state, params)
        prune_and_replace(state, params, rng)
        state.iteration = iterations
        if state.stable_count >= params.stability_window:
            converged = True
            break
    if not converged:
        log.warning(
            "no convergence within %d iterations (stable for %d)",
            params.max_iterations,
            state.stable_count,
        )
    if not state.members:
        log.warning("population went extinct (pool exhausted and all pruned)")
    members = tuple(
        (p, float(x)) for p, x in zip(state.members, state.concentrations)
    )
    return FinalPopulation(members=members, converged=converged, iterations_used=iterations)
