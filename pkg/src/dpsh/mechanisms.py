"""Release mechanisms for thresholded sparse histograms.

Four mechanisms share one shape: add Gaussian noise to every non-zero
count, then drop noisy values that fail the release cutoff 1 + tau. They
differ in the noise structure (independent vs a shared correlated draw,
continuous vs integer-valued) and in the threshold comparison (strict for
the continuous mechanisms, complement-of-weak for the discrete one).

Keys are processed in sorted order so a given seed maps to the same noise
assignment on every platform. The correlated mechanisms draw the shared
value before any per-entry noise; an empty histogram therefore still
consumes exactly one correlated draw.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import accounting
from .accounting import MechanismConfig, PrivacyParams
from .gaussian import (
    ContinuousGaussianParams,
    DiscreteGaussianParams,
    sample_discrete_gaussian,
    sample_gaussian,
)
from .histogram import NoisyHistogram, SparseHistogram, topk_preprocess

__all__ = [
    "ReleaseReceipt",
    "gshm_release",
    "csh_release",
    "topk_release",
    "discrete_correlated_release",
    "discrete_csh_release",
    "build_receipt",
    "receipt_to_json",
]


@dataclass(frozen=True)
class ReleaseReceipt:
    """Audit trail for one release: what was published and at what cost.

    ``achieved.delta`` is the accounting module's delta for (config,
    achieved.epsilon) under the named analysis, recomputed by build_receipt
    rather than trusted from the caller.
    """

    output: NoisyHistogram
    config: MechanismConfig
    analysis: str
    achieved: PrivacyParams
    seed: int

    def __post_init__(self) -> None:
        if self.analysis not in accounting.ANALYSES:
            raise ValueError(
                f"unknown analysis {self.analysis!r}; expected one of {accounting.ANALYSES}"
            )
        if isinstance(self.seed, bool) or not isinstance(self.seed, int):
            raise ValueError(f"seed must be an integer, got {self.seed!r}")
        if not 0 <= self.seed < 2**64:
            raise ValueError(f"seed must fit in 64 bits, got {self.seed!r}")


def _entry_noise(rng: np.random.Generator, sigma: float, n: int) -> np.ndarray:
    # test hook: patching this to zeros isolates the shared correlated draw
    return sigma * rng.standard_normal(n)


def _require_positive(name: str, value: float) -> None:
    if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
        raise ValueError(f"{name} must be a positive finite real, got {value!r}")


def _check_sparsity(hist: SparseHistogram, k: int) -> None:
    if hist.sparsity() > k:
        raise ValueError(
            f"histogram has {hist.sparsity()} non-zero counts but the sparsity bound is "
            f"k={k}; releasing anyway would void the privacy guarantee"
        )


def gshm_release(
    hist: SparseHistogram,
    sigma: float,
    tau: float,
    rng: np.random.Generator,
    *,
    seed: int | None = None,
) -> NoisyHistogram:
    """Independent noise: count + N(0, sigma^2), keep values above 1 + tau."""
    _require_positive("sigma", sigma)
    _require_positive("tau", tau)
    keys = hist.sorted_keys()
    noise = _entry_noise(rng, sigma, len(keys))
    cutoff = 1.0 + tau
    released = {}
    for key, z in zip(keys, noise):
        value = hist.counts[key] + z
        if value > cutoff:
            released[key] = float(value)
    return NoisyHistogram(
        released, mechanism="gshm", params={"sigma": sigma, "tau": tau}, seed=seed
    )


def csh_release(
    hist: SparseHistogram,
    config: MechanismConfig,
    rng: np.random.Generator,
    *,
    seed: int | None = None,
) -> NoisyHistogram:
    """Correlated noise: count + Z_i + Z_corr, keep values above 1 + tau.

    Z_corr ~ N(0, sigma^2/sqrt(k)) is drawn once and shared by every entry;
    the histogram must have at most k non-zero counts or the guarantee the
    correlated draw buys does not hold.
    """
    _check_sparsity(hist, config.k)
    z_corr = sample_gaussian(ContinuousGaussianParams(config.sigma * config.k**-0.25), rng)
    keys = hist.sorted_keys()
    noise = _entry_noise(rng, config.sigma, len(keys))
    cutoff = 1.0 + config.tau
    released = {}
    for key, z in zip(keys, noise):
        value = hist.counts[key] + z + z_corr
        if value > cutoff:
            released[key] = float(value)
    return NoisyHistogram(
        released,
        mechanism="csh",
        params={"k": config.k, "sigma": config.sigma, "tau": config.tau},
        seed=seed,
    )


def topk_release(
    hist: SparseHistogram,
    config: MechanismConfig,
    rng: np.random.Generator,
    *,
    seed: int | None = None,
) -> NoisyHistogram:
    """Reduce to at most k counts by subtracting the (k+1)-th largest, then
    run the correlated release on the reduced histogram.

    Released values are offsets relative to the subtracted count, which
    biases them low; no offset estimate is added back.
    """
    noisy = csh_release(topk_preprocess(hist, config.k), config, rng, seed=seed)
    return NoisyHistogram(
        noisy.counts, mechanism="topk", params=noisy.params, seed=seed
    )


def _rationalize_variance(value: float) -> Fraction:
    """Represent a float variance as a ratio of 64-bit integers.

    Floats are dyadic rationals, so the exact conversion is preferred; when
    its terms overflow 64 bits (tiny variances with deep exponents) the
    closest ratio with a 63-bit denominator is used instead, which perturbs
    the variance by a relative error below 2^-52.
    """
    exact = Fraction(value)
    if exact.numerator.bit_length() <= 64 and exact.denominator.bit_length() <= 64:
        return exact
    return exact.limit_denominator((1 << 63) - 1)


def _discrete_noise_params(k: int, sigma: float) -> tuple[DiscreteGaussianParams, DiscreteGaussianParams]:
    variance = 4.0 * sigma * sigma
    corr = DiscreteGaussianParams(_rationalize_variance(variance / math.sqrt(k)))
    entry = DiscreteGaussianParams(_rationalize_variance(variance))
    return corr, entry


def discrete_correlated_release(
    values: Sequence[int],
    k: int,
    sigma: float,
    rng: np.random.Generator,
    *,
    round_output: bool = False,
) -> list[float] | list[int]:
    """Integer-valued correlated noise on a dense length-k count vector.

    Adds (Z_i + Z_corr)/2 with Z_corr ~ N_Z(0, 4 sigma^2 / sqrt(k)) shared
    and Z_i ~ N_Z(0, 4 sigma^2) per entry, so outputs are exact multiples of
    one half. ``round_output`` post-processes to integers (halves round up),
    which costs nothing privacy-wise.
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    _require_positive("sigma", sigma)
    counts = list(values)
    if len(counts) != k:
        raise ValueError(f"expected a dense vector of {k} counts, got length {len(counts)}")
    for c in counts:
        if isinstance(c, bool) or not isinstance(c, int) or c < 0:
            raise ValueError(f"counts must be non-negative integers, got {c!r}")
    corr_params, entry_params = _discrete_noise_params(k, sigma)
    z_corr = sample_discrete_gaussian(corr_params, rng)
    doubled = [
        2 * c + sample_discrete_gaussian(entry_params, rng) + z_corr for c in counts
    ]
    if round_output:
        return [(n + 1) // 2 for n in doubled]  # floor(value + 1/2) in exact arithmetic
    return [n / 2.0 for n in doubled]


def discrete_csh_release(
    hist: SparseHistogram,
    config: MechanismConfig,
    rng: np.random.Generator,
    *,
    seed: int | None = None,
) -> NoisyHistogram:
    """Integer-valued correlated release restricted to the support, removing
    noisy counts less than or equal to 1 + tau.

    Z_corr keeps the variance 4 sigma^2 / sqrt(k) of the full sparsity bound
    even when the support is smaller; per-entry draws happen only for stored
    keys, in sorted order.
    """
    _check_sparsity(hist, config.k)
    corr_params, entry_params = _discrete_noise_params(config.k, config.sigma)
    z_corr = sample_discrete_gaussian(corr_params, rng)
    cutoff = 1.0 + config.tau
    released = {}
    for key in hist.sorted_keys():
        doubled = 2 * hist.counts[key] + sample_discrete_gaussian(entry_params, rng) + z_corr
        if doubled / 2.0 > cutoff:
            released[key] = doubled / 2.0
    return NoisyHistogram(
        released,
        mechanism="discrete-csh",
        params={"k": config.k, "sigma": config.sigma, "tau": config.tau},
        seed=seed,
        half_integers=True,
    )


def _analysis_delta(config: MechanismConfig, analysis: str, epsilon: float) -> float:
    if analysis == "gshm-add":
        return accounting.gshm_add_deltas(config, epsilon).delta_total
    if analysis == "gshm-exact":
        return accounting.gshm_exact_delta(config, epsilon)
    if analysis == "csh-add":
        return accounting.csh_add_deltas(config, epsilon).delta_total
    if analysis == "csh-tight":
        return accounting.csh_tight_delta(config, epsilon)[0]
    if analysis == "discrete-csh":
        return accounting.discrete_csh_deltas(config, epsilon).delta_total
    raise ValueError(f"unknown analysis {analysis!r}; expected one of {accounting.ANALYSES}")


def build_receipt(
    output: NoisyHistogram,
    config: MechanismConfig,
    analysis: str,
    epsilon: float,
    seed: int,
) -> ReleaseReceipt:
    """Attach the achieved (epsilon, delta) under the named analysis.

    The delta is recomputed here; a config too noisy-hungry for delta < 1
    fails PrivacyParams validation rather than producing a vacuous receipt.
    """
    delta = _analysis_delta(config, analysis, epsilon)
    return ReleaseReceipt(
        output=output,
        config=config,
        analysis=analysis,
        achieved=PrivacyParams(epsilon, delta),
        seed=seed,
    )


def receipt_to_json(receipt: ReleaseReceipt) -> dict:
    """JSON-ready form of a receipt, written alongside released histograms."""
    return {
        "config": {
            "k": receipt.config.k,
            "sigma": receipt.config.sigma,
            "tau": receipt.config.tau,
        },
        "analysis": receipt.analysis,
        "achieved": {
            "epsilon": receipt.achieved.epsilon,
            "delta": receipt.achieved.delta,
        },
        "seed": receipt.seed,
    }
