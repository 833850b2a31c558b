"""Monte Carlo comparison of the brute force scan and the genetic algorithm.

Each trial draws a random Wiener-Hammerstein system, excites it with one
period of Gaussian noise, allocates the true poles and zeros of the cascade
with both methods and records timings, cost evaluations and whether the
genetic algorithm reached the brute force minimum.

Seeds are derived with :class:`numpy.random.SeedSequence`: the master seed
spawns one child per configured order, in configured order, and each child
spawns one grandchild per trial. A trial's generator draws the system, then
the excitation, then the genetic algorithm seed.
"""

from __future__ import annotations

import concurrent.futures as cf
import dataclasses
import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np
import pyarrow as pa

from whsplit import config as settings
from whsplit.allocation import AllocationCost
from whsplit.bla import generate_periodic_gaussian
from whsplit.brute_force import brute_force_scan
from whsplit.errors import ConfigurationError, WHSplitError
from whsplit.ga import POPULATION_SIZES, GAConfig, ga_optimize
from whsplit.model import SystemRecipe, random_wh_system, simulate_wh, true_groups

log = logging.getLogger(__name__)

ZERO_COST_GUARD = 1e-15


@dataclass(frozen=True)
class MonteCarloConfig:
    orders: tuple = (5, 6, 7, 8)
    trials_per_order: int = 100
    period_length: int = 4096
    population_size_per_order: dict = field(default_factory=lambda: dict(POPULATION_SIZES))
    ga: GAConfig = field(default_factory=GAConfig)
    success_rel_tol: float = field(default_factory=lambda: settings.get("success-rtol"))
    rng_seed: int = 0
    degrees: tuple = (1, 2, 3)
    input_std: float = 1.0
    cheby1_ripple_db: float = 3.0
    cheby2_atten_db: float = 50.0
    cutoff_range: tuple = (0.025, 0.125)
    nl_coeff_range: tuple = (-0.25, 0.25)

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(int(o) for o in self.orders))
        object.__setattr__(self, "degrees", tuple(int(d) for d in self.degrees))
        object.__setattr__(
            self,
            "population_size_per_order",
            {int(k): int(v) for k, v in self.population_size_per_order.items()},
        )
        object.__setattr__(self, "cutoff_range", tuple(map(float, self.cutoff_range)))
        object.__setattr__(self, "nl_coeff_range", tuple(map(float, self.nl_coeff_range)))

        if len(self.orders) == 0:
            raise ConfigurationError("at least one block order is required")

        if any(o < 1 for o in self.orders):
            raise ConfigurationError(f"block orders must be >= 1, got {self.orders}")

        if self.trials_per_order < 1:
            raise ConfigurationError(
                f"trials_per_order must be >= 1, got {self.trials_per_order}"
            )

        if self.period_length < 64:
            raise ConfigurationError(
                f"period_length must be >= 64, got {self.period_length}"
            )

        if self.success_rel_tol < 0:
            raise ConfigurationError("success_rel_tol must be non-negative")

    def population_size(self, order):
        return self.population_size_per_order.get(order, self.ga.population_size)

    def recipe(self, order):
        return SystemRecipe(
            order,
            cheby1_ripple_db=self.cheby1_ripple_db,
            cheby2_atten_db=self.cheby2_atten_db,
            cutoff_range=self.cutoff_range,
            nl_coeff_range=self.nl_coeff_range,
        )

    def replace(self, **kw):
        return dataclasses.replace(self, **kw)

    def to_dict(self):
        d = dataclasses.asdict(self)
        d["orders"] = list(self.orders)
        d["degrees"] = list(self.degrees)
        d["cutoff_range"] = list(self.cutoff_range)
        d["nl_coeff_range"] = list(self.nl_coeff_range)
        d["population_size_per_order"] = {
            str(k): v for k, v in self.population_size_per_order.items()
        }
        d["ga"] = self.ga.to_dict()
        return d

    @classmethod
    def from_dict(cls, d):
        d = dict(d)
        names = {f.name for f in dataclasses.fields(cls)}

        if unknown := set(d) - names:
            raise ConfigurationError(f"Unknown benchmark settings {sorted(unknown)}")

        try:
            if "ga" in d:
                d["ga"] = GAConfig.from_dict(d["ga"])

            return cls(**d)
        except (TypeError, ValueError) as e:
            if isinstance(e, ConfigurationError):
                raise
            raise ConfigurationError(f"invalid benchmark configuration: {e}") from e


def full_scale_config(**kw):
    return MonteCarloConfig(**kw)


def desk_scale_config(**kw):
    defaults = {
        "orders": (5, 6),
        "trials_per_order": 20,
        "period_length": 1024,
    }
    return MonteCarloConfig(**{**defaults, **kw})


@dataclass(frozen=True)
class TrialRecord:
    order: int
    trial: int
    population_size: int
    n_groups: int = 0
    status: str = "ok"
    success: bool = False
    output_variance: float = math.nan
    true_bits: str = ""
    true_cost: float = math.nan
    setup_seconds: float = math.nan
    bf_best_bits: str = ""
    bf_best_cost: float = math.nan
    bf_evaluations: int = 0
    bf_seconds: float = math.nan
    ga_best_bits: str = ""
    ga_best_cost: float = math.nan
    ga_evaluations: int = 0
    ga_generations: int = 0
    ga_seconds: float = math.nan
    error: str = ""

    @property
    def counted(self):
        """Whether the trial enters the success rate"""
        return self.status in ("ok", "ga-failed")


def is_success(ga_cost, bf_cost, output_variance, rel_tol):
    guard = ZERO_COST_GUARD * output_variance
    return abs(ga_cost - bf_cost) <= rel_tol * max(bf_cost, guard)


def compare_methods(
    groups,
    u,
    y,
    ga_config: GAConfig,
    degrees=(1, 2, 3),
    success_rel_tol=None,
    true_bits=None,
    scan=None,
    **record,
) -> TrialRecord:
    """Run both searches on one record and compare their minima.

    A previously computed brute force ``scan`` of the same record is reused.
    Extra keyword arguments are stored on the returned record.
    """
    if success_rel_tol is None:
        success_rel_tol = settings.get("success-rtol")

    variance = float(np.var(y.samples))
    fields = dict(record, n_groups=len(groups), output_variance=variance)
    start = time.perf_counter()

    try:
        cost = AllocationCost(groups, u, y, degrees)
    except WHSplitError as e:
        log.warning("Trial setup failed: %s", e)
        return TrialRecord(**fields, status="excluded", error=str(e))

    fields["setup_seconds"] = time.perf_counter() - start

    if true_bits is not None:
        fields["true_bits"] = "".join(map(str, true_bits))
        fields["true_cost"] = cost(true_bits)

    errors = []

    if scan is None:
        try:
            scan = brute_force_scan(groups, u, y, degrees, cost=cost)
        except WHSplitError as e:
            errors.append(f"brute force: {e}")

    if scan is not None:
        fields.update(
            bf_best_bits=str(scan.best),
            bf_best_cost=scan.best_cost,
            bf_evaluations=scan.evaluations,
            bf_seconds=scan.elapsed,
        )

    try:
        start = time.perf_counter()
        result = ga_optimize(cost, len(groups), ga_config)
        ga_seconds = time.perf_counter() - start
    except WHSplitError as e:
        errors.append(f"genetic algorithm: {e}")
        result = None
    else:
        fields.update(
            ga_best_bits="".join(map(str, result.best_bits)),
            ga_best_cost=result.best_cost,
            ga_evaluations=result.evaluations,
            ga_generations=result.generations_run,
            ga_seconds=ga_seconds,
        )

    if scan is None:
        log.warning("Trial excluded: %s", "; ".join(errors))
        return TrialRecord(**fields, status="excluded", error="; ".join(errors))

    if result is None:
        log.warning("Genetic algorithm failed: %s", "; ".join(errors))
        return TrialRecord(**fields, status="ga-failed", error="; ".join(errors))

    success = is_success(result.best_cost, scan.best_cost, variance, success_rel_tol)
    return TrialRecord(**fields, success=bool(success))


def _trial_data(recipe, period_length, input_std, rng):
    model = random_wh_system(recipe, rng)
    u = generate_periodic_gaussian(period_length, input_std, rng)
    y = simulate_wh(model, u)
    groups, alloc = true_groups(model)
    return groups, alloc, u, y


def run_trial(
    recipe: SystemRecipe,
    ga_config: GAConfig,
    rng,
    period_length=4096,
    success_rel_tol=None,
    degrees=(1, 2, 3),
    input_std=1.0,
    trial=0,
) -> TrialRecord:
    record = {
        "order": recipe.block_order,
        "trial": trial,
        "population_size": ga_config.population_size,
    }

    try:
        groups, alloc, u, y = _trial_data(recipe, period_length, input_std, rng)
    except WHSplitError as e:
        log.warning("System generation failed: %s", e)
        return TrialRecord(**record, status="excluded", error=str(e))

    ga_config = ga_config.replace(rng_seed=int(rng.integers(2**32)))
    return compare_methods(
        groups,
        u,
        y,
        ga_config,
        degrees,
        success_rel_tol,
        true_bits=alloc.bits,
        **record,
    )


def trial_generators(config: MonteCarloConfig):
    """``{(order, trial): numpy.random.Generator}`` per the seed derivation scheme"""
    master = np.random.SeedSequence(config.rng_seed)
    generators = {}

    for order, child in zip(config.orders, master.spawn(len(config.orders))):
        for trial, grandchild in enumerate(child.spawn(config.trials_per_order)):
            generators[order, trial] = np.random.default_rng(grandchild)

    return generators


@dataclass(frozen=True)
class ReportRow:
    order: int
    population_size: int
    trials: int
    failures: int
    brute_force_seconds_mean: float
    ga_seconds_mean: float
    brute_force_evaluations: float
    ga_evaluations_mean: float
    success_rate: float
    speedup: float
    mean_groups: float
    ga_generations_mean: float


def _mean(values):
    return float(np.mean(values)) if len(values) else math.nan


def aggregate(records, order, population_size) -> ReportRow:
    records = sorted(records, key=lambda r: r.trial)
    counted = [r for r in records if r.counted]
    ok = [r for r in records if r.status == "ok"]
    bf_seconds = _mean([r.bf_seconds for r in counted])
    ga_seconds = _mean([r.ga_seconds for r in ok])

    if counted:
        success_rate = sum(r.success for r in counted) / len(counted)
    else:
        log.warning("No usable trials for order %d", order)
        success_rate = 0.0

    return ReportRow(
        order=order,
        population_size=population_size,
        trials=len(records),
        failures=len(records) - len(counted),
        brute_force_seconds_mean=bf_seconds,
        ga_seconds_mean=ga_seconds,
        brute_force_evaluations=_mean([r.bf_evaluations for r in counted]),
        ga_evaluations_mean=_mean([r.ga_evaluations for r in ok]),
        success_rate=success_rate,
        speedup=bf_seconds / ga_seconds if ga_seconds > 0 else math.nan,
        mean_groups=_mean([r.n_groups for r in counted]),
        ga_generations_mean=_mean([r.ga_generations for r in ok]),
    )


MARKDOWN_ROWS = (
    ("Block order", "order", "{}"),
    ("Population size", "population_size", "{}"),
    ("Groups (mean)", "mean_groups", "{:.1f}"),
    ("Brute force scan", "brute_force_seconds_mean", "{:.3g}s"),
    ("Genetic algorithm", "ga_seconds_mean", "{:.3g}s"),
    ("Speed-up", "speedup", "{:.2f}"),
    ("Brute force evaluations", "brute_force_evaluations", "{:.0f}"),
    ("GA evaluations (mean)", "ga_evaluations_mean", "{:.0f}"),
    ("Success rate", "success_rate", "{:.0%}"),
)


@dataclass(frozen=True)
class BenchmarkReport:
    rows: tuple
    trials: tuple
    config: MonteCarloConfig | None = None

    def row_table(self) -> pa.Table:
        return pa.Table.from_pylist([dataclasses.asdict(r) for r in self.rows])

    def trial_table(self) -> pa.Table:
        names = [f.name for f in dataclasses.fields(TrialRecord)]
        columns = {n: [getattr(t, n) for t in self.trials] for n in names}
        return pa.table(columns)

    def to_dict(self):
        return {
            "config": None if self.config is None else self.config.to_dict(),
            "rows": [dataclasses.asdict(r) for r in self.rows],
        }

    def to_markdown(self):
        header = "| " + " | ".join(
            [""] + [str(r.order) for r in self.rows]
        ) + " |"
        lines = [header, "|" + "---|" * (len(self.rows) + 1)]

        for label, attr, fmt in MARKDOWN_ROWS[1:]:
            cells = []

            for r in self.rows:
                value = getattr(r, attr)
                cells.append("n/a" if isinstance(value, float) and math.isnan(value) else fmt.format(value))

            lines.append("| " + " | ".join([label] + cells) + " |")

        return "\n".join(lines) + "\n"


def _run(tasks, jobs):
    if jobs > 1:
        with cf.ThreadPoolExecutor(jobs) as pool:
            return list(pool.map(lambda task: task(), tasks))

    return [task() for task in tasks]


def run_monte_carlo(config: MonteCarloConfig, jobs=1, progress=None) -> BenchmarkReport:
    """Run every configured trial and aggregate one report row per order.

    ``progress`` is called with each finished :class:`TrialRecord`.
    """
    generators = trial_generators(config)

    def task(order, trial):
        def run():
            ga_config = config.ga.replace(population_size=config.population_size(order))
            record = run_trial(
                config.recipe(order),
                ga_config,
                generators[order, trial],
                config.period_length,
                config.success_rel_tol,
                config.degrees,
                config.input_std,
                trial,
            )

            if progress is not None:
                progress(record)

            return record

        return run

    log.info(
        "Running %d trials for orders %s",
        config.trials_per_order * len(config.orders),
        list(config.orders),
    )
    records = _run([task(o, t) for o, t in generators], jobs)
    records = sorted(records, key=lambda r: (config.orders.index(r.order), r.trial))
    rows = tuple(
        aggregate(
            [r for r in records if r.order == order],
            order,
            config.population_size(order),
        )
        for order in config.orders
    )
    return BenchmarkReport(rows, tuple(records), config)


def run_population_sweep(
    config: MonteCarloConfig, order, population_sizes, jobs=1, progress=None
) -> BenchmarkReport:
    """Success rate and cost evaluations of the genetic algorithm against
    population size, on the same systems for every size"""
    population_sizes = [int(p) for p in population_sizes]

    if not population_sizes:
        raise ConfigurationError("at least one population size is required")

    generators = trial_generators(config.replace(orders=(order,)))

    def task(trial):
        def run():
            rng = generators[order, trial]
            record = {"order": order, "trial": trial}

            try:
                groups, alloc, u, y = _trial_data(
                    config.recipe(order), config.period_length, config.input_std, rng
                )
            except WHSplitError as e:
                return [
                    TrialRecord(**record, population_size=p, status="excluded", error=str(e))
                    for p in population_sizes
                ]

            seed = int(rng.integers(2**32))

            try:
                scan = brute_force_scan(groups, u, y, config.degrees)
            except WHSplitError as e:
                log.warning("Brute force scan failed: %s", e)
                scan = None

            records = [
                compare_methods(
                    groups,
                    u,
                    y,
                    config.ga.replace(population_size=p, rng_seed=seed),
                    config.degrees,
                    config.success_rel_tol,
                    true_bits=alloc.bits,
                    scan=scan,
                    population_size=p,
                    **record,
                )
                for p in population_sizes
            ]

            if progress is not None:
                for r in records:
                    progress(r)

            return records

        return run

    nested = _run([task(t) for t in range(config.trials_per_order)], jobs)
    records = [r for trial in nested for r in trial]
    rows = tuple(
        aggregate([r for r in records if r.population_size == p], order, p)
        for p in population_sizes
    )
    return BenchmarkReport(rows, tuple(records), config)
