"""Discrete-time rational transfer functions in the backward shift operator.

A transfer function is stored as

.. math::

    G(q) = \\frac{b_0 + b_1 q^{-1} + \\ldots + b_{n_b} q^{-n_b}}
                 {a_0 + a_1 q^{-1} + \\ldots + a_{n_a} q^{-n_a}}

and its factored form as

.. math::

    G(q) = k q^{-d} \\frac{\\prod_i (1 - z_i q^{-1})}{\\prod_i (1 - p_i q^{-1})}

so that poles and zeros are the roots of the z-domain polynomials and a
system is stable when every pole lies strictly inside the unit circle.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import signal as sps

from whsplit import config
from whsplit.errors import (
    ConjugacyError,
    DegenerateError,
    DesignError,
    InstabilityError,
    SingularResponseError,
)

log = logging.getLogger(__name__)

MAX_DESIGN_ORDER = 20


def _readonly(a):
    a.flags.writeable = False
    return a


def _is_real(v, tol):
    return abs(v.imag) <= tol * max(1.0, abs(v))


def pair_conjugates(values, tol=None):
    """Split ``values`` into real roots and conjugate pairs.

    Complex roots are greedily matched to the nearest unmatched conjugate
    of the opposite imaginary sign.

    Returns
    -------
    reals : list of float
    pairs : list of complex
        One representative per pair, with positive imaginary part.
        Pair members are symmetrised so that the conjugate is exact.
    """
    tol = config.get("conj-tol") if tol is None else tol
    values = np.asarray(values, dtype=np.complex128).ravel()
    reals = []
    upper = []
    lower = []

    for v in values:
        if _is_real(v, tol):
            reals.append(float(v.real))
        elif v.imag > 0:
            upper.append(v)
        else:
            lower.append(v)

    pairs = []
    unmatched = list(lower)

    for v in upper:
        if not unmatched:
            raise ConjugacyError(f"Complex root {v} has no conjugate partner")

        distances = [abs(v - np.conj(w)) for w in unmatched]
        i = int(np.argmin(distances))

        if distances[i] > tol * max(1.0, abs(v)):
            raise ConjugacyError(
                f"Complex root {v} has no conjugate partner within "
                f"tolerance {tol} (nearest is {unmatched[i]})"
            )

        w = unmatched.pop(i)
        pairs.append(complex(0.5 * (v + np.conj(w))))

    if unmatched:
        raise ConjugacyError(
            f"Complex roots {unmatched} have no conjugate partner"
        )

    return reals, pairs


def _canonical_roots(values, tol=None):
    """Conjugate-closed copy of ``values`` with exact conjugate pairs"""
    reals, pairs = pair_conjugates(values, tol)
    out = [complex(r) for r in reals]

    for p in pairs:
        out.extend((p, p.conjugate()))

    return np.asarray(out, dtype=np.complex128)


def real_poly(reals, pairs):
    """Coefficients of ``prod (1 - r q^-1) prod (1 - p q^-1)(1 - conj(p) q^-1)``

    Built from real linear and quadratic factors so the result is real by
    construction.
    """
    coeffs = np.ones(1)

    for r in reals:
        coeffs = np.convolve(coeffs, [1.0, -r])

    for p in pairs:
        coeffs = np.convolve(coeffs, [1.0, -2.0 * p.real, abs(p) ** 2])

    return coeffs


@dataclass(frozen=True, eq=False)
class PoleZeroGain:
    zeros: np.ndarray
    poles: np.ndarray
    gain: float
    delay: int = 0

    def __post_init__(self):
        zeros = np.atleast_1d(np.asarray(self.zeros, dtype=np.complex128)).ravel()
        poles = np.atleast_1d(np.asarray(self.poles, dtype=np.complex128)).ravel()
        gain = float(self.gain)

        if not np.isfinite(gain) or gain == 0.0:
            raise DegenerateError(f"gain must be finite and nonzero, got {gain}")

        if not (np.all(np.isfinite(zeros)) and np.all(np.isfinite(poles))):
            raise DegenerateError("poles and zeros must be finite")

        if int(self.delay) < 0:
            raise DegenerateError(f"delay must be >= 0, got {self.delay}")

        object.__setattr__(self, "zeros", _readonly(_canonical_roots(zeros)))
        object.__setattr__(self, "poles", _readonly(_canonical_roots(poles)))
        object.__setattr__(self, "gain", gain)
        object.__setattr__(self, "delay", int(self.delay))

    @property
    def n_zeros(self):
        return len(self.zeros)

    @property
    def n_poles(self):
        return len(self.poles)

    def is_stable(self):
        margin = config.get("stability-margin")
        return bool(np.all(np.abs(self.poles) < 1.0 - margin))


def _trim(coeffs):
    nz = np.flatnonzero(coeffs)
    return coeffs[: nz[-1] + 1] if len(nz) > 0 else coeffs[:1]


@dataclass(frozen=True, eq=False)
class TransferFunction:
    """Rational transfer function in :math:`q^{-1}`.

    ``den`` is normalised so that ``den[0] == 1`` and trailing zero
    coefficients of both polynomials are trimmed.
    When constructed through :func:`tf_from_zpk` the factored form is
    retained in ``zpk``.
    """

    num: np.ndarray
    den: np.ndarray
    zpk: PoleZeroGain | None = field(default=None, repr=False)

    def __post_init__(self):
        num = np.atleast_1d(np.asarray(self.num, dtype=np.float64)).ravel()
        den = np.atleast_1d(np.asarray(self.den, dtype=np.float64)).ravel()

        if len(num) == 0 or len(den) == 0:
            raise DegenerateError("numerator and denominator must be non-empty")

        if not (np.all(np.isfinite(num)) and np.all(np.isfinite(den))):
            raise DegenerateError("transfer function coefficients must be finite")

        if den[0] == 0.0:
            raise DegenerateError(f"den[0] must be nonzero, got den={den.tolist()}")

        num, den = _trim(num / den[0]), _trim(den / den[0])
        object.__setattr__(self, "num", _readonly(num))
        object.__setattr__(self, "den", _readonly(den))

    @property
    def num_order(self):
        return len(self.num) - 1

    @property
    def den_order(self):
        return len(self.den) - 1

    def poles(self):
        if self.zpk is not None:
            return self.zpk.poles

        return np.roots(self.den)

    def is_stable(self):
        margin = config.get("stability-margin")
        return bool(np.all(np.abs(self.poles()) < 1.0 - margin))

    def __mul__(self, other):
        return series(self, other)


def identity_tf():
    return TransferFunction([1.0], [1.0])


@dataclass(frozen=True, eq=False)
class Signal:
    samples: np.ndarray
    sample_rate: float = 1.0

    def __post_init__(self):
        samples = np.atleast_1d(np.asarray(self.samples, dtype=np.float64)).ravel()

        if len(samples) < 1:
            raise DegenerateError("signal must contain at least one sample")

        if not np.all(np.isfinite(samples)):
            raise DegenerateError("signal samples must be finite")

        if not self.sample_rate > 0:
            raise DegenerateError(
                f"sample_rate must be positive, got {self.sample_rate}"
            )

        object.__setattr__(self, "samples", _readonly(samples))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))

    def __len__(self):
        return len(self.samples)

    def with_samples(self, samples):
        return Signal(samples, self.sample_rate)


def tf_from_zpk(zpk: PoleZeroGain) -> TransferFunction:
    zreals, zpairs = pair_conjugates(zpk.zeros)
    preals, ppairs = pair_conjugates(zpk.poles)
    num = zpk.gain * real_poly(zreals, zpairs)
    num = np.concatenate([np.zeros(zpk.delay), num])
    den = real_poly(preals, ppairs)
    return TransferFunction(num, den, zpk=zpk)


def zpk_from_tf(tf: TransferFunction) -> PoleZeroGain:
    if tf.zpk is not None:
        return tf.zpk

    nz = np.flatnonzero(tf.num)

    if len(nz) == 0:
        raise DegenerateError("numerator has no nonzero coefficients")

    delay = int(nz[0])
    b = tf.num[delay:]
    zeros = np.roots(b) if len(b) > 1 else np.empty(0, np.complex128)
    poles = np.roots(tf.den) if len(tf.den) > 1 else np.empty(0, np.complex128)

    return PoleZeroGain(zeros, poles, b[0] / tf.den[0], delay)


def series(a: TransferFunction, b: TransferFunction) -> TransferFunction:
    """Cascade of two transfer functions"""
    if a.zpk is not None and b.zpk is not None:
        zpk = PoleZeroGain(
            np.concatenate([a.zpk.zeros, b.zpk.zeros]),
            np.concatenate([a.zpk.poles, b.zpk.poles]),
            a.zpk.gain * b.zpk.gain,
            a.zpk.delay + b.zpk.delay,
        )
        return tf_from_zpk(zpk)

    return TransferFunction(np.convolve(a.num, b.num), np.convolve(a.den, b.den))


def freq_response(tf: TransferFunction, normalized_freqs) -> np.ndarray:
    """Evaluate ``tf`` at :math:`q = e^{j 2 \\pi f}` for each ``f`` in cycles/sample"""
    f = np.atleast_1d(np.asarray(normalized_freqs, dtype=np.float64))

    if np.any(f < 0.0) or np.any(f > 0.5):
        raise ValueError("normalized frequencies must lie in [0, 0.5]")

    w = 2.0 * np.pi * f

    if tf.zpk is not None:
        # Expanded coefficients lose the response near clustered poles
        shift = np.exp(-1j * w)
        numerator = tf.zpk.gain * shift**tf.zpk.delay
        numerator = numerator * np.prod(1.0 - np.outer(tf.zpk.zeros, shift), axis=0)
        factors = 1.0 - np.outer(tf.zpk.poles, shift)
        denominator = np.prod(factors, axis=0)
        singular = np.any(np.abs(factors) <= 1e-14, axis=0)
    else:
        _, numerator = sps.freqz(tf.num, [1.0], worN=w)
        _, denominator = sps.freqz(tf.den, [1.0], worN=w)
        singular = np.abs(denominator) <= 1e-14 * np.sum(np.abs(tf.den))

    if np.any(singular):
        raise SingularResponseError(
            f"Frequency response is singular at normalized frequencies "
            f"{f[singular].tolist()}"
        )

    return numerator / denominator


def dc_gain(tf: TransferFunction) -> float:
    return float(freq_response(tf, [0.0])[0].real)


def _check_stable(tf):
    poles = tf.poles()

    if len(poles) and (pmax := np.max(np.abs(poles))) >= 1.0:
        raise InstabilityError(f"maximum pole magnitude {pmax} >= 1")


def filter_periodic(tf: TransferFunction, period: Signal) -> Signal:
    """Periodic steady-state response to one period of a periodic input"""
    n = len(period)

    if n < 2:
        raise DegenerateError(f"period must contain at least 2 samples, got {n}")

    # Pure gains pass through without a round trip through the DFT
    if len(tf.den) == 1 and len(tf.num) == 1:
        return period if tf.num[0] == 1.0 else period.with_samples(tf.num[0] * period.samples)

    _check_stable(tf)
    response = freq_response(tf, np.fft.rfftfreq(n))
    return period.with_samples(np.fft.irfft(np.fft.rfft(period.samples) * response, n))


def filter_transient(
    tf: TransferFunction, input: Signal, initial_state=None
) -> Signal:
    """Direct-form difference equation response, zero initial state by default"""
    if initial_state is None:
        return input.with_samples(sps.lfilter(tf.num, tf.den, input.samples))

    y, _ = sps.lfilter(tf.num, tf.den, input.samples, zi=initial_state)
    return input.with_samples(y)


def _validate_design(order, cutoff, level, level_name):
    if not isinstance(order, (int, np.integer)) or not 1 <= order <= MAX_DESIGN_ORDER:
        raise DesignError(f"order must be an integer in [1, {MAX_DESIGN_ORDER}], got {order}")

    if not 0.0 < cutoff < 0.5:
        raise DesignError(f"cutoff must lie in (0, 0.5), got {cutoff}")

    if not level > 0.0:
        raise DesignError(f"{level_name} must be positive, got {level}")


def _digital_lowpass(z, p, k, cutoff):
    # Prewarp so that the analog edge maps onto cutoff after the
    # bilinear transform at fs = 2
    warped = 4.0 * np.tan(np.pi * cutoff)
    z, p, k = sps.lp2lp_zpk(z, p, k, wo=warped)
    z, p, k = sps.bilinear_zpk(z, p, k, fs=2.0)
    delay = len(p) - len(z)

    if delay < 0:
        raise DesignError("digital design has more zeros than poles")

    zpk = PoleZeroGain(z, p, float(np.real(k)), delay)

    if not zpk.is_stable():
        raise DesignError(f"design produced unstable poles {zpk.poles}")

    return zpk


def cheby1_zpk(order, passband_ripple_db, cutoff) -> PoleZeroGain:
    _validate_design(order, cutoff, passband_ripple_db, "passband ripple")
    z, p, k = sps.cheb1ap(int(order), passband_ripple_db)
    zpk = _digital_lowpass(z, p, k, cutoff)
    log.debug(
        "Chebyshev type 1 order %d ripple %.3g dB cutoff %.5g", order, passband_ripple_db, cutoff
    )
    return zpk


def cheby2_zpk(order, stopband_atten_db, cutoff) -> PoleZeroGain:
    _validate_design(order, cutoff, stopband_atten_db, "stopband attenuation")
    z, p, k = sps.cheb2ap(int(order), stopband_atten_db)
    zpk = _digital_lowpass(z, p, k, cutoff)
    log.debug(
        "Chebyshev type 2 order %d attenuation %.3g dB cutoff %.5g",
        order,
        stopband_atten_db,
        cutoff,
    )
    return zpk


def cheby1_design(order, passband_ripple_db, cutoff) -> TransferFunction:
    return tf_from_zpk(cheby1_zpk(order, passband_ripple_db, cutoff))


def cheby2_design(order, stopband_atten_db, cutoff) -> TransferFunction:
    return tf_from_zpk(cheby2_zpk(order, stopband_atten_db, cutoff))


def _complex_pairs(values):
    return [[float(v.real), float(v.imag)] for v in values]


def tf_to_dict(tf: TransferFunction):
    return {"num": tf.num.tolist(), "den": tf.den.tolist()}


def tf_from_dict(d) -> TransferFunction:
    try:
        return TransferFunction(d["num"], d["den"])
    except (KeyError, TypeError) as e:
        raise DegenerateError(f"invalid transfer function record {d!r}") from e


def zpk_to_dict(zpk: PoleZeroGain):
    return {
        "zeros": _complex_pairs(zpk.zeros),
        "poles": _complex_pairs(zpk.poles),
        "gain": zpk.gain,
        "delay": zpk.delay,
    }


def zpk_from_dict(d) -> PoleZeroGain:
    try:
        zeros = [complex(re, im) for re, im in d["zeros"]]
        poles = [complex(re, im) for re, im in d["poles"]]
        return PoleZeroGain(zeros, poles, d.get("gain", 1.0), d.get("delay", 0))
    except (KeyError, TypeError, ValueError) as e:
        if isinstance(e, ConjugacyError):
            raise
        raise DegenerateError(f"invalid pole/zero record {d!r}") from e
