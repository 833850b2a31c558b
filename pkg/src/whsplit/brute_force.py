from __future__ import annotations

import concurrent.futures as cf
import itertools
import logging
import time
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from whsplit import config
from whsplit.allocation import AllocationCost, AllocationVector, PoleZeroGroups
from whsplit.errors import CapacityError, DegenerateError

log = logging.getLogger(__name__)

CHUNK_SIZE = 4096


def _check_capacity(m):
    if m < 0:
        raise DegenerateError(f"number of groups must be >= 0, got {m}")

    if m > (limit := config.get("max-scan-groups")):
        raise CapacityError(
            f"{m} groups give 2**{m} allocations, more than the brute force "
            f"limit of 2**{limit}. Use the genetic algorithm instead (--method ga)."
        )


def enumerate_allocations(m):
    """Every allocation of ``m`` groups in lexicographic order"""
    _check_capacity(m)

    for bits in itertools.product((0, 1), repeat=m):
        yield AllocationVector(bits)


def index_to_bits(index, m):
    """Bits of ``index``, most significant first, so that index order is
    lexicographic order"""
    return tuple((int(index) >> (m - 1 - k)) & 1 for k in range(m))


def _index_bit_matrix(indices, m):
    shifts = np.arange(m - 1, -1, -1, dtype=np.int64)
    return ((indices[:, None] >> shifts) & 1).astype(bool)


def rank_entries(indices, costs, rtol=None):
    """Order by cost; costs equal within ``rtol`` are ordered by their bits"""
    rtol = config.get("tie-rtol") if rtol is None else rtol
    indices = np.asarray(indices, dtype=np.int64)
    costs = np.asarray(costs, dtype=np.float64)
    order = np.lexsort((indices, costs))
    indices, costs = indices[order], costs[order]
    i, n = 0, len(costs)

    while i < n:
        bound = costs[i] + rtol * abs(costs[i])
        j = int(np.searchsorted(costs, bound, side="right"))

        if j - i > 1:
            tie = i + np.argsort(indices[i:j], kind="stable")
            indices[i:j], costs[i:j] = indices[tie], costs[tie]

        i = max(j, i + 1)

    return indices, costs


@dataclass(frozen=True, eq=False)
class ScanResult:
    """Ranked outcome of a brute force scan.

    ``indices`` encode allocations as integers whose binary expansion,
    most significant bit first, is the allocation. When the number of
    groups exceeds the ``full-ranking-groups`` setting only the best
    ``top-k`` entries are retained.
    """

    indices: np.ndarray
    costs: np.ndarray
    n_groups: int
    evaluations: int
    elapsed: float

    @cached_property
    def ranked(self):
        return [
            (AllocationVector(index_to_bits(i, self.n_groups)), float(c))
            for i, c in zip(self.indices, self.costs)
        ]

    @property
    def complete(self):
        return len(self.indices) == self.evaluations

    @property
    def best(self):
        return AllocationVector(index_to_bits(self.indices[0], self.n_groups))

    @property
    def best_cost(self):
        return float(self.costs[0])

    def to_dict(self):
        return {
            "n_groups": self.n_groups,
            "evaluations": self.evaluations,
            "elapsed": self.elapsed,
            "complete": self.complete,
            "ranked": [
                {"bits": str(a), "mse": c} for a, c in self.ranked
            ],
        }


def _evaluate_chunk(cost, start, stop, m):
    indices = np.arange(start, stop, dtype=np.int64)
    bits = _index_bit_matrix(indices, m)
    costs = np.fromiter((cost(b) for b in bits), dtype=np.float64, count=len(indices))
    return indices, costs


def _keep(indices, costs, keep):
    if keep is None or len(indices) <= keep:
        return indices, costs

    indices, costs = rank_entries(indices, costs)
    return indices[:keep], costs[:keep]


def brute_force_scan(
    groups: PoleZeroGroups,
    u,
    y,
    degrees=(1, 2, 3),
    jobs=1,
    cost=None,
    progress=None,
) -> ScanResult:
    """Evaluate the allocation cost of every allocation and rank them.

    Parameters
    ----------
    cost : AllocationCost, optional
        Precomputed cost for ``(groups, u, y, degrees)``.
    jobs : int
        Number of threads evaluating contiguous blocks of allocations.
    progress : callable, optional
        Called with the number of allocations evaluated in each finished block.
    """
    m = len(groups)
    _check_capacity(m)
    cost = AllocationCost(groups, u, y, degrees) if cost is None else cost
    total = 2**m
    keep = None if m <= config.get("full-ranking-groups") else config.get("top-k")
    # Oversample so that ties at the top-k boundary resolve by bits
    chunk_keep = None if keep is None else 2 * keep
    bounds = [(s, min(s + CHUNK_SIZE, total)) for s in range(0, total, CHUNK_SIZE)]
    log.info("Scanning %d allocations of %d groups", total, m)
    start = time.perf_counter()

    def run(bound):
        result = _keep(*_evaluate_chunk(cost, *bound, m), chunk_keep)

        if progress is not None:
            progress(bound[1] - bound[0])

        return result

    if jobs > 1:
        with cf.ThreadPoolExecutor(jobs) as pool:
            results = list(pool.map(run, bounds))
    else:
        results = [run(b) for b in bounds]

    indices = np.concatenate([r[0] for r in results])
    costs = np.concatenate([r[1] for r in results])
    indices, costs = rank_entries(indices, costs)

    if keep is not None:
        indices, costs = indices[:keep], costs[:keep]

    elapsed = time.perf_counter() - start
    log.info(
        "Scan of %d allocations finished in %.3fs, best mse %.6g",
        total,
        elapsed,
        costs[0],
    )
    return ScanResult(indices, costs, m, total, elapsed)
