import numpy as np
import pytest

NSAMPLES = 1024


def pytest_addoption(parser):
    parser.addoption(
        "--runslow",
        action="store_true",
        default=False,
        help="Run acceptance scale Monte Carlo tests",
    )


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return

    skip_slow = pytest.mark.skip(reason="needs --runslow")

    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip_slow)


@pytest.fixture(scope="session", autouse=True)
def pin_configuration():
    """Ignore WHSPLIT_* environment overrides during the test run"""
    from whsplit import config

    with config.set(**config.DEFAULTS):
        yield


@pytest.fixture(scope="session")
def cubic_system():
    from whsplit.testing import sanity_system

    return sanity_system()


@pytest.fixture(scope="session")
def cubic_dataset(cubic_system):
    """Noise-free period of the cubic system with its true groups"""
    from whsplit.bla import generate_periodic_gaussian
    from whsplit.model import simulate_wh, true_groups

    rng = np.random.default_rng(42)
    u = generate_periodic_gaussian(NSAMPLES, 1.0, rng)
    y = simulate_wh(cubic_system, u)
    groups, alloc = true_groups(cubic_system)
    return groups, alloc, u, y


@pytest.fixture(scope="session")
def order3_system():
    from whsplit.model import SystemRecipe, random_wh_system

    return random_wh_system(SystemRecipe(3, rng_seed=7))


@pytest.fixture(scope="session")
def order3_dataset(order3_system):
    from whsplit.bla import generate_periodic_gaussian
    from whsplit.model import simulate_wh, true_groups

    rng = np.random.default_rng(3)
    u = generate_periodic_gaussian(NSAMPLES, 1.0, rng)
    y = simulate_wh(order3_system, u)
    groups, alloc = true_groups(order3_system)
    return groups, alloc, u, y


@pytest.fixture(scope="session")
def cubic_dataset_files(cubic_system, cubic_dataset, tmp_path_factory):
    """Signal and pole/zero files of ``cubic_dataset`` for the applications"""
    from whsplit.io import write_json, write_signal
    from whsplit.lti import zpk_from_tf, zpk_to_dict
    from whsplit.model import model_to_dict

    _, _, u, y = cubic_dataset
    path = tmp_path_factory.mktemp("cubic-dataset")
    write_signal(path / "u.csv", u)
    write_signal(path / "y.csv", y)
    write_json(path / "model.json", model_to_dict(cubic_system))
    zpk = zpk_from_tf(cubic_system.linear_dynamics())
    write_json(path / "zpk.json", zpk_to_dict(zpk))
    return path
