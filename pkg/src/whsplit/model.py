"""Wiener-Hammerstein models and the random system family used in Monte Carlo runs.

The model output is ``y = S[f(H[u])]`` with ``H`` the front and ``S`` the
back linear block, and ``f`` a static nonlinearity expanded on monomials.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np

from whsplit.errors import DegenerateError, DesignError, InstabilityError
from whsplit.lti import (
    Signal,
    TransferFunction,
    cheby1_design,
    cheby2_design,
    filter_periodic,
    identity_tf,
    series,
    tf_from_dict,
    tf_from_zpk,
    tf_to_dict,
    zpk_from_dict,
    zpk_from_tf,
    zpk_to_dict,
)

log = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class StaticNonlinearity:
    """``f(x) = sum_j weights[j] * x ** degrees[j]``"""

    degrees: tuple
    weights: np.ndarray

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        weights = np.atleast_1d(np.asarray(self.weights, dtype=np.float64)).ravel()

        if len(degrees) == 0:
            raise DegenerateError("nonlinearity basis must be nonempty")

        if len(set(degrees)) != len(degrees) or min(degrees) < 1:
            raise DegenerateError(
                f"basis degrees must be distinct and >= 1, got {list(degrees)}"
            )

        if len(weights) != len(degrees):
            raise DegenerateError(
                f"{len(weights)} weights supplied for {len(degrees)} basis functions"
            )

        if not np.all(np.isfinite(weights)):
            raise DegenerateError("nonlinearity weights must be finite")

        weights.flags.writeable = False
        object.__setattr__(self, "degrees", degrees)
        object.__setattr__(self, "weights", weights)

    @classmethod
    def identity(cls):
        return cls((1,), [1.0])


def evaluate_nonlinearity(nl: StaticNonlinearity, x: Signal) -> Signal:
    r = np.zeros_like(x.samples)

    for d, w in zip(nl.degrees, nl.weights):
        r += w * x.samples**d

    return x.with_samples(r)


@dataclass(frozen=True, eq=False)
class WienerHammersteinModel:
    front: TransferFunction
    nonlinearity: StaticNonlinearity
    back: TransferFunction

    def __post_init__(self):
        for name in ("front", "back"):
            if not getattr(self, name).is_stable():
                raise InstabilityError(f"{name} block of the model is unstable")

    def front_zpk(self):
        return zpk_from_tf(self.front)

    def back_zpk(self):
        return zpk_from_tf(self.back)

    def linear_dynamics(self):
        """The product ``H S`` whose poles and zeros are allocated"""
        return series(self.front, self.back)


def identity_model():
    return WienerHammersteinModel(
        identity_tf(), StaticNonlinearity.identity(), identity_tf()
    )


def simulate_wh(model: WienerHammersteinModel, u_period: Signal) -> Signal:
    """Periodic steady-state output of ``model`` for one input period"""
    x = filter_periodic(model.front, u_period)
    r = evaluate_nonlinearity(model.nonlinearity, x)
    return filter_periodic(model.back, r)


@dataclass(frozen=True)
class SystemRecipe:
    """Random Wiener-Hammerstein system family.

    The front block is a Chebyshev type 1 low-pass, the back block a
    Chebyshev type 2 low-pass, both of ``block_order``. Cutoffs are
    fractions of the sample rate.
    """

    block_order: int
    cheby1_ripple_db: float = 3.0
    cheby2_atten_db: float = 50.0
    cutoff_range: tuple = (0.025, 0.125)
    nl_linear_coeff: float = 3.0
    nl_coeff_range: tuple = (-0.25, 0.25)
    rng_seed: int = 0

    def __post_init__(self):
        lo, hi = self.cutoff_range

        if not 0.0 < lo <= hi < 0.5:
            raise DesignError(f"cutoff_range must lie within (0, 0.5), got {self.cutoff_range}")

        if self.block_order < 1:
            raise DesignError(f"block_order must be >= 1, got {self.block_order}")

        lo, hi = self.nl_coeff_range

        if lo > hi:
            raise DesignError(f"invalid nl_coeff_range {self.nl_coeff_range}")

        object.__setattr__(self, "cutoff_range", tuple(map(float, self.cutoff_range)))
        object.__setattr__(self, "nl_coeff_range", tuple(map(float, self.nl_coeff_range)))

    def to_dict(self):
        return {
            "block_order": self.block_order,
            "cheby1_ripple_db": self.cheby1_ripple_db,
            "cheby2_atten_db": self.cheby2_atten_db,
            "cutoff_range": list(self.cutoff_range),
            "nl_linear_coeff": self.nl_linear_coeff,
            "nl_coeff_range": list(self.nl_coeff_range),
            "rng_seed": self.rng_seed,
        }


def random_wh_system(recipe: SystemRecipe, rng=None) -> WienerHammersteinModel:
    """Draw a system from ``recipe``.

    Randomness is consumed in the fixed order: front cutoff, back cutoff,
    quadratic weight, cubic weight. ``rng`` defaults to a generator seeded
    with ``recipe.rng_seed``.
    """
    rng = np.random.default_rng(recipe.rng_seed) if rng is None else rng
    front_cutoff = rng.uniform(*recipe.cutoff_range)
    back_cutoff = rng.uniform(*recipe.cutoff_range)
    w2 = rng.uniform(*recipe.nl_coeff_range)
    w3 = rng.uniform(*recipe.nl_coeff_range)

    front = cheby1_design(recipe.block_order, recipe.cheby1_ripple_db, front_cutoff)
    back = cheby2_design(recipe.block_order, recipe.cheby2_atten_db, back_cutoff)
    nl = StaticNonlinearity((1, 2, 3), [recipe.nl_linear_coeff, w2, w3])
    log.debug(
        "Drew order %d system, cutoffs (%.4f, %.4f), weights %s",
        recipe.block_order,
        front_cutoff,
        back_cutoff,
        nl.weights.tolist(),
    )
    return WienerHammersteinModel(front, nl, back)


def model_to_dict(model: WienerHammersteinModel):
    d = {
        "front": tf_to_dict(model.front),
        "nonlinearity": {
            "degrees": list(model.nonlinearity.degrees),
            "weights": model.nonlinearity.weights.tolist(),
        },
        "back": tf_to_dict(model.back),
    }

    # Factored forms keep repeated roots exact
    for name, tf in (("front", model.front), ("back", model.back)):
        if tf.zpk is not None:
            d[f"{name}_zpk"] = zpk_to_dict(tf.zpk)

    return d


def model_from_dict(d) -> WienerHammersteinModel:
    def block(name):
        if f"{name}_zpk" in d:
            return tf_from_zpk(zpk_from_dict(d[f"{name}_zpk"]))

        return tf_from_dict(d[name])

    try:
        nl = d["nonlinearity"]
        return WienerHammersteinModel(
            block("front"),
            StaticNonlinearity(nl["degrees"], nl["weights"]),
            block("back"),
        )
    except (KeyError, TypeError) as e:
        raise DegenerateError(f"invalid model record: {e}") from e


def true_groups(model: WienerHammersteinModel):
    """Pole/zero groups of ``H S`` and the allocation of the model's own split"""
    from whsplit.allocation import true_allocation

    return true_allocation(model.front_zpk(), model.back_zpk())
