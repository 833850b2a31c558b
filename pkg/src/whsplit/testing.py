import numpy as np
from numpy.testing import assert_allclose

from whsplit.allocation import AllocationCost, true_allocation
from whsplit.bla import generate_periodic_gaussian
from whsplit.brute_force import brute_force_scan
from whsplit.ga import GAConfig, ga_optimize
from whsplit.lti import cheby1_design, cheby2_design
from whsplit.model import StaticNonlinearity, WienerHammersteinModel, simulate_wh

NSAMPLES = 256
ORDER = 2
WEIGHTS = [3.0, 0.1, -0.2]


def sanity_system():
    return WienerHammersteinModel(
        cheby1_design(ORDER, 3.0, 0.1),
        StaticNonlinearity((1, 2, 3), WEIGHTS),
        cheby2_design(ORDER, 50.0, 0.07),
    )


def sanity():
    """Sanity check a whsplit install"""
    rng = np.random.default_rng(42)
    model = sanity_system()
    u = generate_periodic_gaussian(NSAMPLES, 1.0, rng)
    y = simulate_wh(model, u)
    groups, alloc = true_allocation(model.front_zpk(), model.back_zpk())
    cost = AllocationCost(groups, u, y)
    variance = np.var(y.samples)

    # The true split explains the data exactly
    assert cost(alloc.bits) < 1e-12 * variance

    scan = brute_force_scan(groups, u, y, cost=cost)
    assert scan.evaluations == 2 ** len(groups)
    assert scan.best_cost < 1e-12 * variance

    result = ga_optimize(cost, len(groups), GAConfig(population_size=20, rng_seed=1))
    assert_allclose(result.best_cost, scan.best_cost, atol=1e-12 * variance)
