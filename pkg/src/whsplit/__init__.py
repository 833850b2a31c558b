from typing import TYPE_CHECKING, Literal

if TYPE_CHECKING:
    from whsplit.allocation import FitResult, PoleZeroGroups
    from whsplit.lti import PoleZeroGain, Signal

__version__ = "0.1.0"


def identify(
    u: "Signal",
    y: "Signal",
    dynamics: "PoleZeroGain | PoleZeroGroups",
    method: Literal["brute", "ga"] = "brute",
    degrees=(1, 2, 3),
    ga_config=None,
    jobs: int = 1,
) -> "tuple[FitResult, object]":
    """Identify a Wiener-Hammerstein model from one period of input/output data.

    ``dynamics`` are the poles and zeros of the overall linear dynamics,
    either ungrouped or already grouped. Returns the best fit and the
    search result (a ``ScanResult`` or a ``GAResult``).
    """
    from whsplit.allocation import AllocationCost, PoleZeroGroups, group_conjugates
    from whsplit.brute_force import brute_force_scan
    from whsplit.ga import identify_wh_ga

    groups = dynamics if isinstance(dynamics, PoleZeroGroups) else group_conjugates(dynamics)
    cost = AllocationCost(groups, u, y, degrees)

    if method == "brute":
        scan = brute_force_scan(groups, u, y, degrees, jobs=jobs, cost=cost)
        return cost.fit(scan.best), scan
    elif method == "ga":
        result, fit = identify_wh_ga(groups, u, y, degrees, ga_config, jobs=jobs, cost=cost)
        return fit, result

    raise ValueError(f"method must be 'brute' or 'ga', got {method!r}")
