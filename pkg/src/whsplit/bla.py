"""Best linear approximation from periodic data.

For Gaussian-like excitations the best linear approximation of a
Wiener-Hammerstein system is proportional to the product of its two linear
blocks, so the poles and zeros of a rational model of it are the poles and
zeros to allocate.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from whsplit.allocation import group_conjugates
from whsplit.errors import DegenerateError, FitDegenerateError, SingularResponseError
from whsplit.lti import PoleZeroGain, Signal, TransferFunction, tf_from_zpk, zpk_from_tf

log = logging.getLogger(__name__)

SINGULAR_BIN_RTOL = 1e-12
# Variances below this fraction of the median variance are raised to it
VARIANCE_FLOOR_RTOL = 1e-3


def generate_periodic_gaussian(n, std=1.0, rng=None, sample_rate=1.0) -> Signal:
    """One period of zero-mean Gaussian noise with sample standard deviation ``std``"""
    if n < 2:
        raise DegenerateError(f"period length must be >= 2, got {n}")

    rng = np.random.default_rng() if rng is None else rng
    x = rng.standard_normal(n)
    x -= x.mean()
    return Signal(x * (std / x.std()), sample_rate)


@dataclass(frozen=True, eq=False)
class FrfEstimate:
    """Frequency response averaged over realizations.

    ``frequencies`` are in cycles per sample. ``sample_variance`` is the
    variance of the averaged response, i.e. the spread across realizations
    divided by their number, and is zero for a single realization.
    Bins where any realization has no input energy are marked invalid.
    """

    frequencies: np.ndarray
    response: np.ndarray
    sample_variance: np.ndarray
    realizations: int
    valid: np.ndarray
    sample_rate: float = 1.0

    @property
    def frequencies_hz(self):
        return self.frequencies * self.sample_rate


def estimate_frf(u_realizations, y_realizations) -> FrfEstimate:
    if len(u_realizations) < 1 or len(u_realizations) != len(y_realizations):
        raise DegenerateError(
            f"need matching, nonempty realization lists, got "
            f"{len(u_realizations)} inputs and {len(y_realizations)} outputs"
        )

    n = len(u_realizations[0])

    if any(len(s) != n for s in (*u_realizations, *y_realizations)):
        raise DegenerateError("all realizations must have the same length")

    u = np.fft.rfft(np.stack([s.samples for s in u_realizations]), axis=1)
    y = np.fft.rfft(np.stack([s.samples for s in y_realizations]), axis=1)
    magnitude = np.abs(u)
    singular = magnitude <= SINGULAR_BIN_RTOL * magnitude.max(axis=1, keepdims=True)
    valid = ~np.any(singular, axis=0)

    if not np.any(valid):
        raise SingularResponseError("input has no energy at any frequency bin")

    if flagged := np.flatnonzero(~valid[1:]).tolist():
        log.warning("Excluding %d bins without input energy", len(flagged))

    g = np.where(valid, y / np.where(valid, u, 1.0), 0.0)
    r = len(u_realizations)
    response = g.mean(axis=0)

    if r > 1:
        variance = g.real.var(axis=0, ddof=1) + g.imag.var(axis=0, ddof=1)
        variance = variance / r
    else:
        variance = np.zeros(g.shape[1])

    return FrfEstimate(
        np.fft.rfftfreq(n),
        response,
        variance,
        r,
        valid,
        u_realizations[0].sample_rate,
    )


@dataclass(frozen=True, eq=False)
class RationalFit:
    tf: TransferFunction
    iterations: int
    converged: bool
    reflected_poles: int


def _reflect_unstable(tf):
    zpk = zpk_from_tf(tf)
    unstable = np.abs(zpk.poles) >= 1.0

    if not np.any(unstable):
        return tf, 0

    poles = zpk.poles.copy()
    # Reflection scales |1 - p q^-1| by 1/|p| on the unit circle
    gain = zpk.gain / np.prod(np.abs(poles[unstable]))
    poles[unstable] = 1.0 / np.conj(poles[unstable])
    log.warning("Reflected %d unstable poles into the unit circle", unstable.sum())
    return tf_from_zpk(PoleZeroGain(zpk.zeros, poles, gain, zpk.delay)), int(unstable.sum())


def _noise_weights(frf):
    if frf.realizations < 2:
        return np.ones(np.count_nonzero(frf.valid))

    variance = frf.sample_variance[frf.valid]
    floor = max(VARIANCE_FLOOR_RTOL * float(np.median(variance)), np.finfo(float).tiny)
    return 1.0 / np.sqrt(np.maximum(variance, floor))


def fit_rational_detailed(
    frf: FrfEstimate, num_order, den_order, max_iterations=20, tol=1e-8
) -> RationalFit:
    """Fit ``B/A`` to ``frf`` by iteratively reweighted linear least squares.

    Each iteration solves the linearised equation error ``B - G A`` weighted
    by the inverse magnitude of the previous denominator. With more than one
    realization every bin is further weighted by the inverse standard
    deviation of its averaged response. Only valid bins enter the fit.
    """
    if num_order < 0 or den_order < 0:
        raise FitDegenerateError(f"orders must be >= 0, got ({num_order}, {den_order})")

    f = frf.frequencies[frf.valid]
    g = frf.response[frf.valid]
    nparams = num_order + den_order + 1

    if len(f) < nparams:
        raise FitDegenerateError(
            f"{len(f)} valid bins cannot determine {nparams} parameters"
        )

    shift = np.exp(-2j * np.pi * f)
    b_basis = shift[:, None] ** np.arange(num_order + 1)
    a_basis = shift[:, None] ** np.arange(1, den_order + 1)
    design = np.hstack([b_basis, -g[:, None] * a_basis])
    noise = _noise_weights(frf)
    weights = noise
    theta = np.zeros(nparams)
    converged = False

    for iteration in range(1, max_iterations + 1):
        lhs = design * weights[:, None]
        rhs = g * weights
        lhs = np.vstack([lhs.real, lhs.imag])
        rhs = np.concatenate([rhs.real, rhs.imag])
        scale = np.linalg.norm(lhs, axis=0)
        scale[scale == 0.0] = 1.0
        solution, _, rank, _ = np.linalg.lstsq(lhs / scale, rhs, rcond=None)

        if rank < nparams:
            raise FitDegenerateError(
                f"rank {rank} regression for {nparams} rational parameters"
            )

        previous, theta = theta, solution / scale
        den = np.concatenate([[1.0], theta[num_order + 1 :]])
        weights = noise / np.maximum(np.abs(np.polyval(den[::-1], shift)), 1e-12)

        if np.linalg.norm(theta - previous) <= tol * max(1.0, np.linalg.norm(theta)):
            converged = True
            break

    log.debug("Rational fit finished after %d iterations (converged=%s)", iteration, converged)
    tf = TransferFunction(theta[: num_order + 1], np.concatenate([[1.0], theta[num_order + 1 :]]))
    tf, reflected = _reflect_unstable(tf)
    return RationalFit(tf, iteration, converged, reflected)


def fit_rational(frf: FrfEstimate, num_order, den_order) -> TransferFunction:
    return fit_rational_detailed(frf, num_order, den_order).tf


def bla_groups(u_realizations, y_realizations, num_order, den_order):
    """Pole/zero groups of a rational best linear approximation"""
    frf = estimate_frf(u_realizations, y_realizations)
    fit = fit_rational_detailed(frf, num_order, den_order)
    return group_conjugates(zpk_from_tf(fit.tf)), fit
