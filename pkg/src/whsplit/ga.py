"""Genetic algorithm over fixed-length bitstrings.

Each generation keeps the ``elite_count`` best individuals, by default
five percent of the population and at least two, fills a
``crossover_fraction`` of the remainder with scattered crossover children
and the rest with uniformly mutated parents. Parents are drawn by stochastic
universal sampling over rank-scaled fitness, or by binary tournaments.
All randomness is drawn by the sequential driver, so results depend only on
the seed.
"""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses
import logging
import math
from dataclasses import dataclass

import numpy as np

from whsplit import config as settings
from whsplit.allocation import AllocationCost, AllocationVector, PoleZeroGroups
from whsplit.errors import ConfigurationError

log = logging.getLogger(__name__)

SELECTIONS = ("sus-rank", "tournament")

# Population sizes for block orders 5 to 8
POPULATION_SIZES = {5: 200, 6: 400, 7: 600, 8: 800}


@dataclass(frozen=True)
class GAConfig:
    population_size: int = 200
    max_generations: int = 50
    stall_generation_limit: int = 5
    cost_tolerance: float = 1e-20
    crossover_fraction: float = 0.8
    mutation_rate: float | None = None
    elite_count: int | None = None
    selection: str = "sus-rank"
    rng_seed: int = 0

    def __post_init__(self):
        if self.population_size < 2:
            raise ConfigurationError(
                f"population_size must be >= 2, got {self.population_size}"
            )

        if self.elite_count is not None and not 0 <= self.elite_count < self.population_size:
            raise ConfigurationError(
                f"elite_count must lie in [0, population_size), got {self.elite_count}"
            )

        if not 0.0 <= self.crossover_fraction <= 1.0:
            raise ConfigurationError(
                f"crossover_fraction must lie in [0, 1], got {self.crossover_fraction}"
            )

        if self.mutation_rate is not None and not 0.0 <= self.mutation_rate <= 1.0:
            raise ConfigurationError(
                f"mutation_rate must lie in [0, 1], got {self.mutation_rate}"
            )

        if self.max_generations < 0 or self.stall_generation_limit < 1:
            raise ConfigurationError(
                "max_generations must be >= 0 and stall_generation_limit >= 1"
            )

        if self.selection not in SELECTIONS:
            raise ConfigurationError(
                f"selection must be one of {SELECTIONS}, got {self.selection!r}"
            )

    @property
    def elites(self):
        """Number of individuals carried over unchanged"""
        if self.elite_count is not None:
            return self.elite_count

        return min(max(2, math.ceil(0.05 * self.population_size)), self.population_size - 1)

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        return dataclasses.asdict(self)

    @classmethod
    def from_dict(cls, d):
        fields = {f.name for f in dataclasses.fields(cls)}

        if unknown := set(d) - fields:
            raise ConfigurationError(f"Unknown GA settings {sorted(unknown)}")

        return cls(**d)


@dataclass(frozen=True)
class GAResult:
    best_bits: tuple
    best_cost: float
    evaluations: int
    generations_run: int
    history: tuple
    stop_reason: str

    @property
    def best_allocation(self):
        return AllocationVector(self.best_bits)

    def to_dict(self):
        return {
            "best_bits": "".join(map(str, self.best_bits)),
            "best_cost": self.best_cost,
            "evaluations": self.evaluations,
            "generations_run": self.generations_run,
            "history": list(self.history),
            "stop_reason": self.stop_reason,
        }


class _MemoizedCost:
    def __init__(self, cost, jobs):
        self.cost = cost
        self.jobs = jobs
        self.table = {}

    def __len__(self):
        return len(self.table)

    def __call__(self, population):
        keys = [row.tobytes() for row in population]
        new = {}

        for key, row in zip(keys, population):
            if key not in self.table and key not in new:
                new[key] = row

        if self.jobs > 1 and len(new) > 1:
            with cf.ThreadPoolExecutor(self.jobs) as pool:
                values = list(pool.map(self.cost, new.values()))
        else:
            values = [self.cost(row) for row in new.values()]

        self.table.update(zip(new.keys(), map(float, values)))
        return np.array([self.table[k] for k in keys])


def _rank_expectation(costs):
    order = np.argsort(costs, kind="stable")
    expectation = np.empty(len(costs))
    expectation[order] = 1.0 / np.sqrt(np.arange(1, len(costs) + 1))
    return expectation / expectation.sum()


def _select_sus(rng, costs, n):
    if n == 0:
        return np.empty(0, dtype=np.int64)

    edges = np.cumsum(_rank_expectation(costs))
    edges[-1] = 1.0
    pointers = (rng.random() + np.arange(n)) / n
    selected = np.searchsorted(edges, pointers, side="right")
    return rng.permutation(np.minimum(selected, len(costs) - 1))


def _select_tournament(rng, costs, n):
    contestants = rng.integers(0, len(costs), size=(n, 2))
    a, b = contestants[:, 0], contestants[:, 1]
    pick_b = (costs[b] < costs[a]) | ((costs[b] == costs[a]) & (b < a))
    return np.where(pick_b, b, a)


_SELECTORS = {"sus-rank": _select_sus, "tournament": _select_tournament}


def _initial_population(rng, length, size):
    population = rng.integers(0, 2, size=(size, length), dtype=np.uint8)

    if 2**length <= size:
        shifts = np.arange(length - 1, -1, -1)
        every = (np.arange(2**length)[:, None] >> shifts) & 1
        population[: len(every)] = every

    return population


def _next_generation(rng, population, costs, config, rate):
    size, length = population.shape
    order = np.argsort(costs, kind="stable")
    n_elite = config.elites
    n_cross = int(round(config.crossover_fraction * (size - n_elite)))
    n_mutate = size - n_elite - n_cross
    parents = _SELECTORS[config.selection](rng, costs, 2 * n_cross + n_mutate)

    elite = population[order[:n_elite]]
    first = population[parents[:n_cross]]
    second = population[parents[n_cross : 2 * n_cross]]
    scatter = rng.random((n_cross, length)) < 0.5
    crossed = np.where(scatter, first, second)
    flips = rng.random((n_mutate, length)) < rate
    mutated = population[parents[2 * n_cross :]] ^ flips.astype(np.uint8)
    return np.concatenate([elite, crossed, mutated])


def _ranks_before(cost, bits, other_cost, other_bits, rtol):
    """Whether ``(cost, bits)`` ranks before ``(other_cost, other_bits)``.
    Costs equal within ``rtol`` are ordered by their bits."""
    if abs(cost - other_cost) <= rtol * min(abs(cost), abs(other_cost)):
        return bytes(bits) < bytes(other_bits)

    return cost < other_cost


def _best_index(population, costs, rtol):
    best = int(np.argmin(costs))
    tied = np.flatnonzero(costs <= costs[best] + rtol * abs(costs[best]))

    for i in tied:
        if _ranks_before(costs[i], population[i], costs[best], population[best], rtol):
            best = int(i)

    return best


def ga_optimize(cost, length, config: GAConfig, jobs=1) -> GAResult:
    """Minimise ``cost`` over bitstrings of ``length`` bits.

    ``cost`` receives a ``numpy.uint8`` array of bits and returns a float.
    Costs are memoised, ``evaluations`` counts distinct bitstrings.
    """
    if length < 0:
        raise ConfigurationError(f"bitstring length must be >= 0, got {length}")

    rng = np.random.default_rng(config.rng_seed)
    rate = config.mutation_rate
    rate = (1.0 / length if length else 0.0) if rate is None else rate
    evaluate = _MemoizedCost(cost, jobs)

    population = _initial_population(rng, length, config.population_size)
    costs = evaluate(population)
    rtol = settings.get("tie-rtol")
    i = _best_index(population, costs, rtol)
    best_bits, best_cost = population[i].copy(), float(costs[i])
    history = [best_cost]
    generation = 0

    if 2**length <= config.population_size:
        stop_reason = "enumerated"
    else:
        stop_reason = "generations"

        while generation < config.max_generations:
            if best_cost <= config.cost_tolerance:
                stop_reason = "tolerance"
                break

            stall = config.stall_generation_limit

            if len(history) > stall and history[-1 - stall] - history[-1] < config.cost_tolerance:
                stop_reason = "stall"
                break

            population = _next_generation(rng, population, costs, config, rate)
            costs = evaluate(population)
            generation += 1
            i = _best_index(population, costs, rtol)

            if _ranks_before(costs[i], population[i], best_cost, best_bits, rtol):
                best_bits, best_cost = population[i].copy(), float(costs[i])

            # Lowest cost seen, which a tie resolved by bits may exceed by rtol
            history.append(min(history[-1], best_cost))
            log.debug(
                "Generation %d: best %.6g, %d distinct evaluations",
                generation,
                best_cost,
                len(evaluate),
            )

    log.info(
        "GA stopped (%s) after %d generations, %d evaluations, best cost %.6g",
        stop_reason,
        generation,
        len(evaluate),
        best_cost,
    )
    return GAResult(
        tuple(int(b) for b in best_bits),
        best_cost,
        len(evaluate),
        generation,
        tuple(history),
        stop_reason,
    )


def identify_wh_ga(
    groups: PoleZeroGroups,
    u,
    y,
    degrees=(1, 2, 3),
    config: GAConfig | None = None,
    jobs=1,
    cost=None,
):
    """Search the allocation with the genetic algorithm and refit the best one"""
    config = GAConfig() if config is None else config
    cost = AllocationCost(groups, u, y, degrees) if cost is None else cost
    result = ga_optimize(cost, len(groups), config, jobs=jobs)
    return result, cost.fit(result.best_allocation)
