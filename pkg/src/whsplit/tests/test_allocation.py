import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from whsplit.allocation import (
    AllocationCost,
    AllocationVector,
    PoleZeroGroups,
    allocation_cost,
    allocation_count,
    bits_from_str,
    bits_to_str,
    build_split,
    combination_bounds,
    estimate_nonlinearity,
    group_conjugates,
    identified_model,
    rescale_weights,
)
from whsplit.errors import ConjugacyError, DegenerateError, InstabilityError
from whsplit.lti import PoleZeroGain, Signal, freq_response, tf_from_zpk, zpk_from_tf
from whsplit.model import (
    StaticNonlinearity,
    WienerHammersteinModel,
    simulate_wh,
)


def sorted_roots(values):
    return np.sort_complex(np.asarray(values, dtype=np.complex128))


def split_roots(groups, alloc):
    front, back = build_split(groups, alloc)
    return zpk_from_tf(front), zpk_from_tf(back)


def test_group_conjugates():
    zpk = PoleZeroGain([], [0.5, 0.3 + 0.4j, 0.3 - 0.4j], 1.0)
    groups = group_conjugates(zpk)
    assert len(groups.pole_groups) == 2
    assert len(groups.zero_groups) == 0
    # Sorted by magnitude then angle
    assert groups.pole_groups[0] == (0.5 + 0j,)
    assert sorted_roots(groups.pole_groups[1]).tolist() == [0.3 - 0.4j, 0.3 + 0.4j]


def test_group_conjugates_unpaired():
    class Fake:
        zeros = np.array([0.2 + 0.1j])
        poles = np.array([], dtype=np.complex128)
        gain = 1.0
        delay = 0

    with pytest.raises(ConjugacyError):
        group_conjugates(Fake())


@pytest.mark.parametrize(
    "poles, zeros, groups",
    [
        ([0.1, 0.2, 0.3, 0.4], [-0.1, -0.2, -0.3, -0.4], 8),
        ([0.5j, -0.5j, 0.2 + 0.3j, 0.2 - 0.3j], [0.9j, -0.9j, 0.1 + 0.1j, 0.1 - 0.1j], 4),
        ([0.5, 0.3 + 0.4j, 0.3 - 0.4j], [], 2),
    ],
    ids=["all-real", "all-paired", "mixed"],
)
def test_combination_counts(poles, zeros, groups):
    pzg = group_conjugates(PoleZeroGain(zeros, poles, 1.0))
    assert len(pzg) == groups
    assert allocation_count(pzg) == 2**groups
    low, high = combination_bounds(len(poles), len(zeros))
    assert low <= allocation_count(pzg) <= high

    if all(np.isreal(poles)) and all(np.isreal(zeros)):
        assert allocation_count(pzg) == high
    elif not np.any(np.isreal(poles)) and not np.any(np.isreal(zeros)):
        assert allocation_count(pzg) == low


def test_combination_bounds():
    assert combination_bounds(4, 4) == (16, 256)
    assert combination_bounds(3, 0) == (4, 8)
    assert combination_bounds(0, 0) == (1, 1)


def test_allocation_vector():
    alloc = AllocationVector((1, 0, 1))
    assert str(alloc) == "101"
    assert alloc.complement() == AllocationVector((0, 1, 0))
    assert bits_from_str("101") == alloc
    assert bits_to_str(np.array([1, 0, 1], dtype=np.uint8)) == "101"
    assert_array_equal(np.asarray(alloc), [1, 0, 1])
    assert AllocationVector((0, 1)) < AllocationVector((1, 0))

    with pytest.raises(DegenerateError):
        AllocationVector((0, 2))

    with pytest.raises(DegenerateError):
        AllocationVector.from_str("10x")


@pytest.fixture
def three_groups():
    zpk = PoleZeroGain([-0.5], [0.8, 0.3 + 0.4j, 0.3 - 0.4j], 2.0)
    return group_conjugates(zpk)


def test_build_split_all_front(three_groups):
    front, back = build_split(three_groups, AllocationVector((1, 1, 1)))
    assert_array_equal(back.num, [1.0])
    assert_array_equal(back.den, [1.0])
    assert front.num_order == 1 and front.den_order == 3
    # Gain is left to the nonlinearity
    assert front.num[0] == 1.0


def test_build_split_bookkeeping(three_groups):
    alloc = AllocationVector((1, 0, 1))
    front, back = split_roots(three_groups, alloc)
    first, second = three_groups.pole_groups
    (zero,) = three_groups.zero_groups
    assert_allclose(sorted_roots(front.poles), sorted_roots(first))
    assert_allclose(sorted_roots(front.zeros), sorted_roots(zero))
    assert_allclose(sorted_roots(back.poles), sorted_roots(second))
    assert back.n_zeros == 0

    # The complement swaps the blocks
    swapped_front, swapped_back = split_roots(three_groups, alloc.complement())
    assert_allclose(sorted_roots(swapped_front.poles), sorted_roots(back.poles))
    assert_allclose(sorted_roots(swapped_back.poles), sorted_roots(front.poles))


def test_build_split_length_mismatch(three_groups):
    with pytest.raises(DegenerateError, match="length"):
        build_split(three_groups, AllocationVector((1, 0)))


def test_split_preserves_dynamics(cubic_dataset):
    groups = cubic_dataset[0]
    rng = np.random.default_rng(4)
    f = rng.uniform(0, 0.5, 64)
    everything = build_split(groups, AllocationVector((1,) * len(groups)))[0]
    full = freq_response(everything, f)

    for bits in rng.integers(0, 2, size=(10, len(groups))):
        front, back = build_split(groups, AllocationVector(bits))
        assert np.isrealobj(front.num) and np.isrealobj(back.den)
        assert front.den_order + back.den_order == groups.n_poles
        assert front.num_order + back.num_order == groups.n_zeros
        assert_allclose(freq_response(front, f) * freq_response(back, f), full, rtol=1e-8)


def test_true_split_fits_exactly(cubic_dataset):
    groups, alloc, u, y = cubic_dataset
    variance = np.var(y.samples)
    front, back = build_split(groups, alloc)
    fit = estimate_nonlinearity(front, back, u, y)
    assert fit.mse < 1e-12 * variance
    assert np.isfinite(fit.condition_estimate)
    assert allocation_cost(groups, alloc, u, y) < 1e-12 * variance


def test_weight_recovery_with_matched_gains(cubic_system, cubic_dataset):
    groups, alloc, u, y = cubic_dataset
    front, back = build_split(groups, alloc)
    fit = estimate_nonlinearity(front, back, u, y)
    gains = [cubic_system.front_zpk().gain, cubic_system.back_zpk().gain]
    weights = rescale_weights(fit.weights, fit.degrees, *gains)
    assert_allclose(weights, cubic_system.nonlinearity.weights, rtol=1e-6)


def test_wrong_allocations_cost_more(cubic_dataset):
    groups, alloc, u, y = cubic_dataset
    cost = AllocationCost(groups, u, y)
    true_cost = cost(alloc.bits)
    true_roots = split_roots(groups, alloc)[0]

    for index in range(2 ** len(groups)):
        bits = tuple((index >> k) & 1 for k in reversed(range(len(groups))))
        candidate = split_roots(groups, AllocationVector(bits))[0]
        same_size = candidate.n_poles == true_roots.n_poles and candidate.n_zeros == true_roots.n_zeros
        same_front = (
            same_size
            and np.allclose(sorted_roots(candidate.poles), sorted_roots(true_roots.poles))
            and np.allclose(sorted_roots(candidate.zeros), sorted_roots(true_roots.zeros))
        )

        if same_front:
            # Swapping identical groups leaves the cost unchanged
            assert cost(bits) == pytest.approx(true_cost, abs=1e-12 * np.var(y.samples))
        else:
            assert cost(bits) > 1e3 * true_cost


def test_linear_system_unidentifiable(cubic_system):
    linear = WienerHammersteinModel(
        cubic_system.front, StaticNonlinearity((1,), [3.0]), cubic_system.back
    )
    u = Signal(np.random.default_rng(8).standard_normal(256))
    y = simulate_wh(linear, u)
    groups = group_conjugates(zpk_from_tf(linear.linear_dynamics()))
    cost = AllocationCost(groups, u, y)

    for index in range(2 ** len(groups)):
        bits = [(index >> k) & 1 for k in range(len(groups))]
        assert cost(bits) < 1e-12 * np.var(y.samples)


def test_zero_residual():
    u = Signal(np.random.default_rng(0).standard_normal(64))
    identity = tf_from_zpk(PoleZeroGain([], [], 1.0))
    y = u.with_samples(2.0 * u.samples - u.samples**3)
    fit = estimate_nonlinearity(identity, identity, u, y)
    assert fit.mse == pytest.approx(0.0, abs=1e-28)
    assert_allclose(fit.weights, [2.0, 0.0, -1.0], atol=1e-12)


def test_rank_deficient_regression():
    u = Signal(np.ones(32))
    identity = tf_from_zpk(PoleZeroGain([], [], 1.0))
    fit = estimate_nonlinearity(identity, identity, u, u)
    assert fit.condition_estimate == np.inf
    assert fit.mse == pytest.approx(0.0, abs=1e-28)


def test_nested_degrees_do_not_increase_error(cubic_dataset):
    groups, _, u, y = cubic_dataset
    bits = AllocationVector((0,) * len(groups))
    errors = [
        allocation_cost(groups, bits, u, y, degrees)
        for degrees in ((1,), (1, 2), (1, 2, 3), (1, 2, 3, 4))
    ]
    assert all(b <= a * (1 + 1e-12) for a, b in zip(errors, errors[1:]))


def test_cached_cost_matches_composition(cubic_dataset):
    groups, _, u, y = cubic_dataset
    cost = AllocationCost(groups, u, y)
    rng = np.random.default_rng(12)

    for bits in rng.integers(0, 2, size=(8, len(groups))):
        expected = allocation_cost(groups, AllocationVector(bits), u, y)
        assert cost(bits) == pytest.approx(expected, rel=1e-8, abs=1e-14 * np.var(y.samples))

    fit = cost.fit(AllocationVector(bits))
    assert fit.mse == pytest.approx(cost(bits))
    assert fit.degrees == (1, 2, 3)


def test_cost_rejects_unstable_groups():
    groups = PoleZeroGroups(((1.5 + 0j,),), ())
    u = Signal(np.random.default_rng(0).standard_normal(16))

    with pytest.raises(InstabilityError):
        AllocationCost(groups, u, u)

    with pytest.raises(DegenerateError):
        AllocationCost(PoleZeroGroups((), ()), u, Signal(np.ones(8)))


def test_identified_model_resimulates(cubic_dataset):
    groups, alloc, u, y = cubic_dataset
    fit = AllocationCost(groups, u, y).fit(alloc)
    model = identified_model(groups, alloc, fit)
    y_hat = simulate_wh(model, u)
    relative = np.sqrt(np.mean((y_hat.samples - y.samples) ** 2) / np.mean(y.samples**2))
    assert relative < 1e-6
