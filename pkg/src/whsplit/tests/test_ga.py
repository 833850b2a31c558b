import numpy as np
import pytest

from whsplit.allocation import AllocationCost
from whsplit.brute_force import brute_force_scan
from whsplit.errors import ConfigurationError
from whsplit.ga import POPULATION_SIZES, GAConfig, ga_optimize, identify_wh_ga


class RecordingCost:
    """Random cost table over bitstrings that remembers what it was asked"""

    def __init__(self, length, seed):
        self.table = np.random.default_rng(seed).random(2**length)
        self.weights = 1 << np.arange(length - 1, -1, -1)
        self.seen = set()

    def __call__(self, bits):
        index = int(np.dot(bits, self.weights))
        self.seen.add(index)
        return float(self.table[index])


def hamming_cost(target):
    target = np.asarray(target, dtype=np.uint8)
    return lambda bits: float(np.count_nonzero(bits != target))


def test_table_defaults():
    config = GAConfig()
    assert config.max_generations == 50
    assert config.stall_generation_limit == 5
    assert config.cost_tolerance == 1e-20
    assert config.elite_count is None
    assert config.elites == 10
    assert [config.replace(population_size=p).elites for p in (2, 20, 400, 800)] == [1, 2, 20, 40]
    assert config.replace(elite_count=0).elites == 0
    assert POPULATION_SIZES == {5: 200, 6: 400, 7: 600, 8: 800}


@pytest.mark.parametrize(
    "kw",
    [
        {"population_size": 1},
        {"elite_count": 200},
        {"crossover_fraction": 1.5},
        {"mutation_rate": -0.1},
        {"stall_generation_limit": 0},
        {"selection": "roulette"},
    ],
    ids=["population", "elite", "crossover", "mutation", "stall", "selection"],
)
def test_invalid_config(kw):
    with pytest.raises(ConfigurationError):
        GAConfig(**kw)


def test_config_dict():
    config = GAConfig(population_size=30, selection="tournament", rng_seed=5)
    assert GAConfig.from_dict(config.to_dict()) == config

    with pytest.raises(ConfigurationError, match="generation_count"):
        GAConfig.from_dict({"generation_count": 3})


def test_single_bit():
    result = ga_optimize(lambda bits: [3.0, 1.0][bits[0]], 1, GAConfig(population_size=10))
    assert result.best_bits == (1,)
    assert result.best_cost == 1.0
    assert result.evaluations <= 2
    assert result.stop_reason == "enumerated"


def test_hamming_target_found():
    rng = np.random.default_rng(2014)
    target = rng.integers(0, 2, 16)
    config = GAConfig(population_size=200)
    found = sum(
        ga_optimize(hamming_cost(target), 16, config.replace(rng_seed=seed)).best_cost == 0
        for seed in range(100)
    )
    assert found >= 95


@pytest.mark.parametrize("selection", ["sus-rank", "tournament"])
def test_invariants(selection):
    length = 10

    for seed in range(100):
        config = GAConfig(population_size=20, selection=selection, rng_seed=seed)
        cost = RecordingCost(length, seed)
        result = ga_optimize(cost, length, config)

        assert all(b <= a for a, b in zip(result.history, result.history[1:]))
        assert len(result.history) == result.generations_run + 1
        assert result.evaluations == len(cost.seen)
        assert result.evaluations <= min(2**length, 20 * (result.generations_run + 1))
        assert result.best_cost == min(cost.table[i] for i in cost.seen)
        assert result.stop_reason in ("generations", "stall", "tolerance")

        again = ga_optimize(RecordingCost(length, seed), length, config)
        assert again == result


def test_without_variation_population_never_degrades():
    cost = RecordingCost(12, 0)
    config = GAConfig(
        population_size=16,
        crossover_fraction=0.0,
        mutation_rate=0.0,
        elite_count=15,
        max_generations=10,
    )
    result = ga_optimize(cost, 12, config)
    assert len(set(result.history)) == 1
    assert result.stop_reason == "stall"


def test_tolerance_stop():
    result = ga_optimize(lambda bits: 0.0, 8, GAConfig(population_size=10))
    assert result.stop_reason == "tolerance"
    assert result.generations_run == 0


def test_generation_cap():
    config = GAConfig(population_size=10, max_generations=0)
    result = ga_optimize(RecordingCost(8, 1), 8, config)
    assert result.stop_reason == "generations"
    assert result.evaluations <= 10


def test_jobs_do_not_change_the_result():
    config = GAConfig(population_size=30, rng_seed=3)
    serial = ga_optimize(RecordingCost(10, 3), 10, config)
    threaded = ga_optimize(RecordingCost(10, 3), 10, config, jobs=4)
    assert serial == threaded


def test_enumerating_population(cubic_dataset):
    groups, _, u, y = cubic_dataset
    scan = brute_force_scan(groups, u, y)
    config = GAConfig(population_size=2 ** len(groups))
    result, fit = identify_wh_ga(groups, u, y, config=config)
    assert result.stop_reason == "enumerated"
    assert result.evaluations == 2 ** len(groups)
    assert result.best_cost == pytest.approx(scan.best_cost, abs=1e-12 * np.var(y.samples))
    assert fit.mse == pytest.approx(result.best_cost)


def test_ga_matches_brute_force(order3_dataset):
    groups, _, u, y = order3_dataset
    cost = AllocationCost(groups, u, y)
    scan = brute_force_scan(groups, u, y, cost=cost)
    tolerance = 1e-9 * max(scan.best_cost, 1e-15 * np.var(y.samples))
    matches = 0

    for seed in range(10):
        config = GAConfig(population_size=100, rng_seed=seed)
        result, fit = identify_wh_ga(groups, u, y, config=config, cost=cost)
        assert result.best_cost >= scan.best_cost - tolerance
        assert result.evaluations <= 2 ** len(groups)
        matches += abs(result.best_cost - scan.best_cost) <= tolerance

    assert matches >= 9


@pytest.mark.parametrize(
    "costs, expected",
    [
        ({0b110: 0.5, 0b011: 0.5}, (0, 1, 1)),
        ({0b110: 0.5, 0b011: 0.5 * (1 + 1e-15)}, (0, 1, 1)),
        ({0b110: 0.5, 0b011: 0.5 * (1 + 1e-9)}, (1, 1, 0)),
    ],
    ids=["exact", "within-tolerance", "outside-tolerance"],
)
def test_equal_costs_resolve_by_bits(costs, expected):
    def cost(bits):
        return costs.get(int(bits[0]) << 2 | int(bits[1]) << 1 | int(bits[2]), 1.0)

    result = ga_optimize(cost, 3, GAConfig(population_size=10))
    assert result.stop_reason == "enumerated"
    assert result.best_bits == expected


def test_ties_across_generations_resolve_by_bits():
    # Every allocation with two leading ones is optimal
    length = 10

    def cost(bits):
        return 0.25 if bits[0] and bits[1] else 1.0 + float(bits.sum())

    config = GAConfig(population_size=20, stall_generation_limit=20, max_generations=30)
    result = ga_optimize(cost, length, config)
    assert result.best_cost == 0.25
    assert result.best_bits[:2] == (1, 1)
    assert all(b <= a for a, b in zip(result.history, result.history[1:]))

    # Of the optimal allocations seen, the reported one has the smallest bits
    seen = []
    ga_optimize(lambda bits: seen.append(tuple(int(b) for b in bits)) or cost(bits), length, config)
    assert result.best_bits == min(b for b in seen if b[:2] == (1, 1))
