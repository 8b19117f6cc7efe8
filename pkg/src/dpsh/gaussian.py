"""Gaussian primitives shared by every mechanism and accounting formula.

Continuous side: tail-accurate normal CDF machinery and the exact delta of
the Gaussian mechanism (plain and correlated-noise variants). Discrete side:
the integer-supported Gaussian N_Z(0, sigma2) with certified-truncation PMF
and CDF, and an exact rejection sampler that never touches floating point,
so sampled noise carries no distributional bias.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np
from scipy import special

__all__ = [
    "ContinuousGaussianParams",
    "DiscreteGaussianParams",
    "std_normal_cdf",
    "std_normal_log_cdf",
    "std_normal_inv_cdf",
    "shifted_gaussian_delta",
    "gaussian_mechanism_delta",
    "correlated_gaussian_delta",
    "discrete_gaussian_pmf",
    "discrete_gaussian_cdf",
    "sample_gaussian",
    "sample_discrete_gaussian",
]

_SQRT2 = math.sqrt(2.0)


@dataclass(frozen=True)
class ContinuousGaussianParams:
    """Standard deviation of the continuous noise distribution N(0, sigma^2)."""

    sigma: float

    def __post_init__(self) -> None:
        if not (isinstance(self.sigma, (int, float)) and math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be a positive finite real, got {self.sigma!r}")


@dataclass(frozen=True)
class DiscreteGaussianParams:
    """Variance of the integer-supported Gaussian N_Z(0, sigma2).

    The exact sampler works on the variance as a ratio of integers, so
    sigma2 must be representable as a ratio of 64-bit integers. Floats are
    accepted when their exact binary value fits that constraint.
    """

    sigma2: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "sigma2", _as_ratio64(self.sigma2))


def _as_ratio64(value) -> Fraction:
    try:
        ratio = Fraction(value)
    except (TypeError, ValueError) as exc:
        raise ValueError(f"sigma2 must be a rational number, got {value!r}") from exc
    if ratio <= 0:
        raise ValueError(f"sigma2 must be positive, got {value!r}")
    if ratio.numerator.bit_length() > 64 or ratio.denominator.bit_length() > 64:
        raise ValueError(
            f"sigma2 must be representable as a ratio of 64-bit integers, got {value!r}"
        )
    return ratio


def std_normal_cdf(x: float) -> float:
    """Standard normal CDF Phi(x).

    Routed through erfc so the lower tail keeps relative accuracy down to
    Phi(-38) instead of rounding to zero.
    """
    if math.isnan(x):
        raise ValueError("x must not be NaN")
    return 0.5 * math.erfc(-x / _SQRT2)


def std_normal_log_cdf(x):
    """log Phi(x); accepts scalars or arrays, accurate deep in the lower tail."""
    return special.log_ndtr(x)


def std_normal_inv_cdf(p: float) -> float:
    """Inverse standard normal CDF."""
    if not 0.0 < p < 1.0:
        raise ValueError(f"p must lie strictly inside (0, 1), got {p!r}")
    return float(special.ndtri(p))


def shifted_gaussian_delta(sensitivity, sigma: float, epsilon):
    """Hockey-stick delta Phi(s/2o - eo/s) - e^e Phi(-s/2o - eo/s), any real epsilon.

    This is the exact privacy loss of Gaussian noise at scale ``sigma``
    against a shift of size ``sensitivity``. The case-split analyses call it
    with epsilon shifted by log-probabilities, which may drive it negative,
    so no sign restriction is placed here; the public wrappers validate.
    The e^epsilon * Phi(-..) product is evaluated as exp(epsilon + log Phi(-..))
    so a huge exponential never multiplies a denormal tail. Broadcasts over
    numpy array inputs for ``sensitivity`` and ``epsilon``.
    """
    sens = np.asarray(sensitivity, dtype=float)
    eps = np.asarray(epsilon, dtype=float)
    half = sens / (2.0 * sigma)
    ratio = eps * sigma / sens
    delta = special.ndtr(half - ratio) - np.exp(eps + special.log_ndtr(-half - ratio))
    clipped = np.clip(delta, 0.0, 1.0)
    if clipped.ndim == 0:
        return float(clipped)
    return clipped


def gaussian_mechanism_delta(sensitivity: float, sigma: float, epsilon: float) -> float:
    """Exact delta of the Gaussian mechanism for a given L2 sensitivity.

    Clamped to [0, 1]; monotone non-increasing in sigma and in epsilon.
    """
    if not sensitivity > 0:
        raise ValueError(f"sensitivity must be positive, got {sensitivity!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if not epsilon >= 0:
        raise ValueError(f"epsilon must be non-negative, got {epsilon!r}")
    return float(shifted_gaussian_delta(sensitivity, sigma, epsilon))


def correlated_gaussian_delta(d: int, gamma: float, sigma: float, epsilon: float) -> float:
    """Exact delta of Gaussian noise plus one shared (correlated) Gaussian draw.

    For a d-dimensional release whose shared-noise variance is sigma^2 * gamma / d
    ... the combined mechanism's privacy loss equals the plain Gaussian
    mechanism at sensitivity sqrt(d + gamma) / 2, which is how it is computed.
    """
    if not (isinstance(d, int) and d >= 1):
        raise ValueError(f"d must be a positive integer, got {d!r}")
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma!r}")
    return gaussian_mechanism_delta(math.sqrt(d + gamma) / 2.0, sigma, epsilon)


# --------------------------------------------------------------------------
# Discrete Gaussian distribution functions.
# --------------------------------------------------------------------------


def _validated_sigma2(sigma2) -> float:
    if isinstance(sigma2, DiscreteGaussianParams):
        return float(sigma2.sigma2)
    value = float(sigma2)
    if not (math.isfinite(value) and value > 0):
        raise ValueError(f"sigma2 must be positive and finite, got {sigma2!r}")
    return value


@lru_cache(maxsize=1024)
def _normalizer(sigma2: float) -> float:
    """sum_y exp(-y^2 / (2 sigma2)) over all integers, certified truncation.

    Terms are accumulated symmetrically until they drop below 1e-18 of the
    running sum AND the geometric tail bound certifies the neglected mass
    below 1e-15 of the total: for y >= 1 the one-sided remainder is at most
    t * q / (1 - q) with t the last term and q = exp(-y / sigma2).
    """
    total = 1.0
    y = 1
    while True:
        term = math.exp(-(y * y) / (2.0 * sigma2))
        total += 2.0 * term
        if term < 1e-18 * total:
            q = math.exp(-y / sigma2)
            if 2.0 * term * q / (1.0 - q) < 1e-15 * total:
                return total
        y += 1
        if y > 1000 + 200 * math.sqrt(sigma2):
            raise RuntimeError(f"normalizer failed to converge for sigma2={sigma2!r}")


def _truncation_point(sigma2: float) -> int:
    # beyond this the per-term mass is < 1e-22 of the normalizer
    return int(math.ceil(math.sqrt(2.0 * sigma2 * (22.0 * math.log(10.0) + math.log(max(_normalizer(sigma2), 1.0)))))) + 2


def _survival(m: int, sigma2: float) -> float:
    """Pr[X > m] for m >= 0, summed small-to-large from the truncation point."""
    top = _truncation_point(sigma2)
    acc = 0.0
    for y in range(top, m, -1):
        acc += math.exp(-(y * y) / (2.0 * sigma2))
    return acc / _normalizer(sigma2)


def discrete_gaussian_pmf(x: int, sigma2) -> float:
    """PMF of N_Z(0, sigma2) at integer x."""
    s2 = _validated_sigma2(sigma2)
    return math.exp(-(x * x) / (2.0 * s2)) / _normalizer(s2)


def discrete_gaussian_cdf(x: int, sigma2) -> float:
    """Pr[X <= x] for X ~ N_Z(0, sigma2); absolute error <= 1e-12."""
    s2 = _validated_sigma2(sigma2)
    x = int(x)
    if x >= 0:
        return 1.0 - _survival(x, s2)
    # Pr[X <= x] = Pr[X >= -x] = Pr[X > -x - 1] by symmetry of the integer support
    return _survival(-x - 1, s2)


# --------------------------------------------------------------------------
# Samplers.
# --------------------------------------------------------------------------


def sample_gaussian(params: ContinuousGaussianParams, rng: np.random.Generator) -> float:
    """One draw from N(0, sigma^2); sigma * standard_normal, so draws at
    different scales from the same seed differ only by the scale factor."""
    return params.sigma * rng.standard_normal()


class _BitStream:
    """Exact uniform bits and integers pulled from a numpy Generator.

    The rejection sampler needs exact randrange / Bernoulli primitives;
    numpy hands out fixed-width words, so this buffers 62-bit chunks and
    slices arbitrary bit counts out of them.
    """

    __slots__ = ("_rng", "_acc", "_nbits")

    def __init__(self, rng: np.random.Generator) -> None:
        self._rng = rng
        self._acc = 0
        self._nbits = 0

    def getrandbits(self, k: int) -> int:
        while self._nbits < k:
            for word in self._rng.integers(0, 1 << 62, size=2, dtype=np.int64).tolist():
                self._acc = (self._acc << 62) | word
                self._nbits += 62
        self._nbits -= k
        out = self._acc >> self._nbits
        self._acc &= (1 << self._nbits) - 1
        return out

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), by rejection on the covering power of two."""
        k = (n - 1).bit_length()
        while True:
            r = self.getrandbits(k)
            if r < n:
                return r


def _bernoulli(num: int, den: int, bits: _BitStream) -> int:
    # exact Bernoulli(num/den); the ratio need not be in lowest terms
    return 1 if bits.randrange(den) < num else 0


def _bernoulli_exp1(num: int, den: int, bits: _BitStream) -> int:
    """Bernoulli(exp(-num/den)) for num/den in [0, 1]."""
    k = 1
    while _bernoulli(num, den * k, bits):
        k += 1
    return k % 2


def _bernoulli_exp(num: int, den: int, bits: _BitStream) -> int:
    """Bernoulli(exp(-num/den)) for any num/den >= 0."""
    while num > den:
        if not _bernoulli_exp1(1, 1, bits):
            return 0
        num -= den
    return _bernoulli_exp1(num, den, bits)


def _geometric_exp(den: int, bits: _BitStream) -> int:
    """Geometric(1 - exp(-1/den)) on {0, 1, 2, ...}."""
    while True:
        u = bits.randrange(den)
        if _bernoulli_exp(u, den, bits):
            break
    v = 0
    while _bernoulli_exp1(1, 1, bits):
        v += 1
    return v * den + u


def _discrete_laplace(t: int, bits: _BitStream) -> int:
    """Discrete Laplace with pmf proportional to exp(-|x|/t), exact."""
    while True:
        sign = bits.getrandbits(1)
        magnitude = _geometric_exp(t, bits)
        if sign == 1 and magnitude == 0:
            continue
        return (1 - 2 * sign) * magnitude


def _floorsqrt_ratio(num: int, den: int) -> int:
    """floor(sqrt(num/den)) by integer bracketing; no floating point."""
    hi = 1
    while hi * hi * den <= num:
        hi *= 2
    lo = hi // 2
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid * mid * den <= num:
            lo = mid
        else:
            hi = mid
    return lo


def _sample_discrete_gaussian_stream(num: int, den: int, bits: _BitStream) -> int:
    """Exact N_Z(0, num/den) draw via discrete-Laplace proposal + exp rejection."""
    t = _floorsqrt_ratio(num, den) + 1
    while True:
        candidate = _discrete_laplace(t, bits)
        c = abs(candidate)
        # acceptance probability exp(-(|c| - sigma2/t)^2 / (2 sigma2)) as a ratio
        bias_num = (c * den * t - num) ** 2
        bias_den = 2 * num * den * t * t
        if _bernoulli_exp(bias_num, bias_den, bits):
            return candidate


def sample_discrete_gaussian(params: DiscreteGaussianParams, rng: np.random.Generator) -> int:
    """One exact draw from N_Z(0, sigma2); deterministic given the generator state."""
    sigma2 = params.sigma2
    bits = _BitStream(rng)
    return _sample_discrete_gaussian_stream(sigma2.numerator, sigma2.denominator, bits)
