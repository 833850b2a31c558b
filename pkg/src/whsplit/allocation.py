"""Pole/zero allocation between the front and back blocks.

The poles and zeros of the overall linear dynamics are grouped so that a
complex conjugate pair always moves as a unit. An allocation assigns every
group to the front block (bit 1) or to the back block (bit 0); for a given
allocation the static nonlinearity is linear in its weights and is fitted by
least squares. The mean squared output error of that fit is the allocation
cost shared by the brute force scan and the genetic algorithm.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from whsplit import config
from whsplit.errors import DegenerateError, InstabilityError
from whsplit.lti import (
    PoleZeroGain,
    Signal,
    TransferFunction,
    filter_periodic,
    freq_response,
    pair_conjugates,
    tf_from_zpk,
)
from whsplit.model import StaticNonlinearity, WienerHammersteinModel

log = logging.getLogger(__name__)


def _group_key(group):
    root = group[0]
    return (round(abs(root), 12), round(abs(np.angle(root)), 12))


def _root_groups(values, tol):
    reals, pairs = pair_conjugates(values, tol)
    groups = [(complex(r),) for r in reals]
    groups.extend((p, p.conjugate()) for p in pairs)
    return groups


@dataclass(frozen=True)
class PoleZeroGroups:
    pole_groups: tuple
    zero_groups: tuple
    source_gain: float = 1.0
    source_delay: int = 0

    def __len__(self):
        return len(self.pole_groups) + len(self.zero_groups)

    @property
    def groups(self):
        """Pole groups followed by zero groups, in allocation bit order"""
        return self.pole_groups + self.zero_groups

    def is_pole(self, index):
        return index < len(self.pole_groups)

    @property
    def n_poles(self):
        return sum(map(len, self.pole_groups))

    @property
    def n_zeros(self):
        return sum(map(len, self.zero_groups))

    def to_dict(self):
        def encode(groups):
            return [[[r.real, r.imag] for r in g] for g in groups]

        return {
            "pole_groups": encode(self.pole_groups),
            "zero_groups": encode(self.zero_groups),
            "source_gain": self.source_gain,
            "source_delay": self.source_delay,
        }


def group_conjugates(zpk: PoleZeroGain, conj_tol=None) -> PoleZeroGroups:
    tol = config.get("conj-tol") if conj_tol is None else conj_tol
    poles = sorted(_root_groups(zpk.poles, tol), key=_group_key)
    zeros = sorted(_root_groups(zpk.zeros, tol), key=_group_key)
    return PoleZeroGroups(tuple(poles), tuple(zeros), zpk.gain, zpk.delay)


def true_allocation(front: PoleZeroGain, back: PoleZeroGain, conj_tol=None):
    """Groups of the cascade ``front * back`` and the allocation that
    reproduces the original split"""
    tol = config.get("conj-tol") if conj_tol is None else conj_tol

    def tagged(front_values, back_values):
        items = [(g, 1) for g in _root_groups(front_values, tol)]
        items.extend((g, 0) for g in _root_groups(back_values, tol))
        return sorted(items, key=lambda item: _group_key(item[0]))

    poles = tagged(front.poles, back.poles)
    zeros = tagged(front.zeros, back.zeros)
    groups = PoleZeroGroups(
        tuple(g for g, _ in poles),
        tuple(g for g, _ in zeros),
        front.gain * back.gain,
        front.delay + back.delay,
    )
    bits = tuple(b for _, b in poles) + tuple(b for _, b in zeros)
    return groups, AllocationVector(bits)


@dataclass(frozen=True, order=True)
class AllocationVector:
    """Bit ``i`` is 1 when group ``i`` belongs to the front block"""

    bits: tuple

    def __post_init__(self):
        bits = tuple(int(b) for b in self.bits)

        if any(b not in (0, 1) for b in bits):
            raise DegenerateError(f"allocation bits must be 0 or 1, got {bits}")

        object.__setattr__(self, "bits", bits)

    def __len__(self):
        return len(self.bits)

    def __str__(self):
        return "".join(map(str, self.bits))

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.bits, dtype=dtype or np.uint8)

    def complement(self):
        return AllocationVector(tuple(1 - b for b in self.bits))

    @classmethod
    def from_str(cls, s):
        if any(c not in "01" for c in s):
            raise DegenerateError(f"allocation string must contain only 0/1, got {s!r}")

        return cls(tuple(int(c) for c in s))


def bits_to_str(bits):
    return "".join(str(int(b)) for b in bits)


def bits_from_str(s):
    return AllocationVector.from_str(s)


def allocation_count(groups: PoleZeroGroups) -> int:
    return 2 ** len(groups)


def combination_bounds(n_poles, n_zeros):
    """Smallest and largest allocation counts for ``n_poles + n_zeros`` roots.

    The minimum holds when every root is part of a conjugate pair, the
    maximum when every root is real.
    """
    n = n_poles + n_zeros
    return 2 ** math.ceil(n / 2), 2**n


def _check_length(groups, alloc):
    if len(alloc) != len(groups):
        raise DegenerateError(
            f"allocation of length {len(alloc)} does not match {len(groups)} groups"
        )


def build_split(groups: PoleZeroGroups, alloc: AllocationVector):
    """Unit-gain front and back blocks for ``alloc``.

    The overall gain is left to the nonlinearity weights.
    """
    _check_length(groups, alloc)
    roots = {(side, kind): [] for side in (0, 1) for kind in ("p", "z")}

    for i, (group, bit) in enumerate(zip(groups.groups, alloc.bits)):
        roots[bit, "p" if groups.is_pole(i) else "z"].extend(group)

    # A pure delay commutes with the nonlinearity, the front block carries it
    front = tf_from_zpk(PoleZeroGain(roots[1, "z"], roots[1, "p"], 1.0, groups.source_delay))
    back = tf_from_zpk(PoleZeroGain(roots[0, "z"], roots[0, "p"], 1.0))
    return front, back


@dataclass(frozen=True, eq=False)
class FitResult:
    weights: np.ndarray
    mse: float
    front: TransferFunction
    back: TransferFunction
    condition_estimate: float
    degrees: tuple = (1, 2, 3)

    def nonlinearity(self):
        return StaticNonlinearity(self.degrees, self.weights)

    def model(self):
        return WienerHammersteinModel(self.front, self.nonlinearity(), self.back)


def _solve(phi, y):
    """Least squares on unit-RMS scaled columns.

    Returns weights, mean squared error and the condition estimate, which is
    infinite when ``phi`` is rank deficient.
    """
    n, ncols = phi.shape
    scale = np.sqrt(np.mean(phi**2, axis=0))
    scale[scale == 0.0] = 1.0
    ws, _, rank, sv = np.linalg.lstsq(phi / scale, y, rcond=config.get("rank-rtol"))
    weights = ws / scale
    residual = y - phi @ weights
    mse = float(np.mean(residual**2))

    if rank < ncols or sv[-1] == 0.0:
        return weights, mse, math.inf

    return weights, mse, float(sv[0] / sv[-1])


def _powers(x, degrees):
    return np.stack([x**d for d in degrees])


def _check_signals(u, y):
    if len(u) != len(y):
        raise DegenerateError(f"input ({len(u)}) and output ({len(y)}) lengths differ")


def estimate_nonlinearity(
    front: TransferFunction,
    back: TransferFunction,
    u: Signal,
    y: Signal,
    degrees=(1, 2, 3),
) -> FitResult:
    _check_signals(u, y)
    degrees = tuple(degrees)
    x = filter_periodic(front, u)
    phi = np.column_stack(
        [filter_periodic(back, x.with_samples(x.samples**d)).samples for d in degrees]
    )
    weights, mse, cond = _solve(phi, y.samples)
    return FitResult(weights, mse, front, back, cond, degrees)


def allocation_cost(groups, alloc, u, y, degrees=(1, 2, 3)) -> float:
    front, back = build_split(groups, alloc)
    return estimate_nonlinearity(front, back, u, y, degrees).mse


def rescale_weights(weights, degrees, front_gain, back_gain):
    """Weights for blocks of gains ``front_gain`` and ``back_gain`` that
    produce the same output as ``weights`` on unit-gain blocks"""
    weights = np.asarray(weights, dtype=np.float64)
    degrees = np.asarray(degrees)
    return weights / (back_gain * front_gain**degrees)


class AllocationCost:
    """Allocation cost for one input/output record.

    The frequency response of every group at the DFT bins is computed once,
    so the split responses of an allocation are products of cached factors.
    Instances are read-only after construction and may be called from
    several threads.
    """

    def __init__(self, groups: PoleZeroGroups, u: Signal, y: Signal, degrees=(1, 2, 3)):
        _check_signals(u, y)
        self.groups = groups
        self.degrees = tuple(degrees)
        self.u = u
        self.y = y
        self.n = n = len(u)

        if n < 2:
            raise DegenerateError(f"record must contain at least 2 samples, got {n}")

        freqs = np.fft.rfftfreq(n)
        self.input_spectrum = np.fft.rfft(u.samples)
        responses = np.ones((len(groups), len(freqs)), dtype=np.complex128)

        for i, group in enumerate(groups.groups):
            if groups.is_pole(i):
                if np.max(np.abs(group)) >= 1.0:
                    raise InstabilityError(f"pole group {group} is not stable")

                zpk = PoleZeroGain([], group, 1.0)
            else:
                zpk = PoleZeroGain(group, [], 1.0)

            responses[i] = freq_response(tf_from_zpk(zpk), freqs)

        self.responses = responses
        self.delay_response = np.exp(-2j * np.pi * freqs * groups.source_delay)

    def __len__(self):
        return len(self.groups)

    def _split_responses(self, bits):
        mask = np.asarray(bits, dtype=bool)

        if len(mask) != len(self.groups):
            raise DegenerateError(
                f"allocation of length {len(mask)} does not match {len(self.groups)} groups"
            )

        front = np.prod(self.responses[mask], axis=0) * self.delay_response
        back = np.prod(self.responses[~mask], axis=0)
        return front, back

    def regressors(self, bits):
        front, back = self._split_responses(bits)
        x = np.fft.irfft(self.input_spectrum * front, self.n)
        spectra = np.fft.rfft(_powers(x, self.degrees), axis=1) * back
        return np.fft.irfft(spectra, self.n, axis=1).T

    def solve(self, bits):
        return _solve(self.regressors(bits), self.y.samples)

    def __call__(self, bits) -> float:
        return self.solve(bits)[1]

    def fit(self, alloc: AllocationVector) -> FitResult:
        """Full fit result, with the blocks in coefficient form"""
        alloc = alloc if isinstance(alloc, AllocationVector) else AllocationVector(alloc)
        weights, mse, cond = self.solve(alloc.bits)
        front, back = build_split(self.groups, alloc)
        return FitResult(weights, mse, front, back, cond, self.degrees)


def identified_model(groups: PoleZeroGroups, alloc, fit: FitResult) -> WienerHammersteinModel:
    """Model of ``fit`` with the blocks of ``alloc``, ready for re-simulation"""
    alloc = alloc if isinstance(alloc, AllocationVector) else AllocationVector(alloc)
    front, back = build_split(groups, alloc)
    return WienerHammersteinModel(front, StaticNonlinearity(fit.degrees, fit.weights), back)
