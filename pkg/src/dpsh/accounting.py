"""Privacy accounting for thresholded sparse-histogram releases.

Five analyses are implemented, named as in the CLI:

  gshm-add      independent Gaussian noise, delta_gauss + delta_inf
  gshm-exact    independent Gaussian noise, exact case-split over how many
                counts a neighboring input can change
  csh-add       correlated Gaussian noise, delta_gauss + delta_inf
  csh-tight     correlated Gaussian noise, case-split maximum instead of sum
  discrete-csh  integer-valued correlated Gaussian noise, zCDP-based
                delta_gauss plus a discrete tail bound

Conventions: every Phi power and every e^eps * Phi(-..) product is evaluated
in log space; scalar delta components are combined with compensated
summation; results are clamped to [0, 1]. Epsilon arguments to the internal
branch evaluators may be negative (the case splits shift epsilon by
log-probabilities), which shifted_gaussian_delta supports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from .gaussian import shifted_gaussian_delta, std_normal_inv_cdf
from . import gaussian as _gaussian

__all__ = [
    "PrivacyParams",
    "MechanismConfig",
    "DeltaBreakdown",
    "TightAnalysisTerms",
    "ZcdpBudget",
    "InfeasibleError",
    "ANALYSES",
    "gshm_add_deltas",
    "gshm_exact_delta",
    "delta_inf_bound",
    "csh_add_deltas",
    "csh_threshold_closed_form",
    "csh_tight_delta",
    "min_tau",
    "min_sigma",
    "total_noise_csh",
    "zcdp_to_approx_dp",
    "discrete_csh_deltas",
    "delta_gauss_with_offset_release",
]

ANALYSES = ("gshm-add", "gshm-exact", "csh-add", "csh-tight", "discrete-csh")


@dataclass(frozen=True)
class PrivacyParams:
    """Target (epsilon, delta) budget."""

    epsilon: float
    delta: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.epsilon) and self.epsilon >= 0):
            raise ValueError(f"epsilon must be a non-negative finite real, got {self.epsilon!r}")
        if not 0.0 < self.delta < 1.0:
            raise ValueError(f"delta must lie strictly inside (0, 1), got {self.delta!r}")


@dataclass(frozen=True)
class MechanismConfig:
    """Sparsity bound k, per-coordinate noise scale sigma, threshold offset tau.

    The release cutoff is 1 + tau.
    """

    k: int
    sigma: float
    tau: float

    def __post_init__(self) -> None:
        if isinstance(self.k, bool) or not isinstance(self.k, int) or self.k < 1:
            raise ValueError(f"k must be a positive integer, got {self.k!r}")
        if not (math.isfinite(self.sigma) and self.sigma > 0):
            raise ValueError(f"sigma must be a positive finite real, got {self.sigma!r}")
        if not (math.isfinite(self.tau) and self.tau > 0):
            raise ValueError(f"tau must be a positive finite real, got {self.tau!r}")


@dataclass(frozen=True)
class DeltaBreakdown:
    """Additive decomposition delta_total = min(1, delta_gauss + delta_inf)."""

    delta_gauss: float
    delta_inf: float
    delta_total: float

    def __post_init__(self) -> None:
        for name in ("delta_gauss", "delta_inf", "delta_total"):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {value!r}")

    @classmethod
    def from_components(cls, delta_gauss: float, delta_inf: float) -> "DeltaBreakdown":
        return cls(delta_gauss, delta_inf, min(1.0, delta_gauss + delta_inf))


@dataclass(frozen=True, eq=False)
class TightAnalysisTerms:
    """Branch values behind a csh-tight delta.

    branch_superset[j-1] covers neighbors whose support loses j coordinates;
    branch_subset[j-1] covers neighbors whose support gains j coordinates;
    both run over j = 1 .. k-1 and are empty for k = 1. psi_of_m holds the
    per-coordinate retention probability to the power m+1 for m = 0 .. k.
    """

    branch_inf_only: float
    branch_gauss_only: float
    branch_superset: np.ndarray
    branch_subset: np.ndarray
    gamma_of_j: np.ndarray
    psi_of_m: np.ndarray
    eps_hat_of_j: np.ndarray


@dataclass(frozen=True)
class ZcdpBudget:
    """Zero-concentrated differential privacy budget rho."""

    rho: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.rho) and self.rho > 0):
            raise ValueError(f"rho must be a positive finite real, got {self.rho!r}")


class InfeasibleError(ValueError):
    """No threshold can reach the target delta at this noise level.

    ``delta_floor`` is the threshold-independent delta component that already
    exceeds (or equals) the target.
    """

    def __init__(self, message: str, delta_floor: float) -> None:
        super().__init__(message)
        self.delta_floor = delta_floor


def _csh_sensitivity(k: int) -> float:
    # effective sensitivity of k unit shifts plus the shared draw's sqrt(k) term
    return math.sqrt(k + math.sqrt(k)) / 2.0


def _validate_epsilon(epsilon: float) -> float:
    value = float(epsilon)
    if not math.isfinite(value):
        raise ValueError(f"epsilon must be finite, got {epsilon!r}")
    return value


# --------------------------------------------------------------------------
# Independent-noise (gshm) analyses.
# --------------------------------------------------------------------------


def gshm_add_deltas(config: MechanismConfig, epsilon: float) -> DeltaBreakdown:
    """delta_gauss at sensitivity sqrt(k) plus the k-coordinate crossing bound."""
    epsilon = _validate_epsilon(epsilon)
    delta_gauss = float(shifted_gaussian_delta(math.sqrt(config.k), config.sigma, epsilon))
    delta_inf = -math.expm1(config.k * float(special.log_ndtr(config.tau / config.sigma)))
    return DeltaBreakdown.from_components(delta_gauss, delta_inf)


class _GshmExactEvaluator:
    """Exact case-split delta for independent noise, as a function of tau.

    A neighboring input can change j of the k counts for any j in [k]; the
    three branch families below cover (a) all changed counts suppressed,
    (b) some suppressed with the remainder released, and (c) the epsilon
    shift in the other neighbor direction. Everything that does not depend
    on tau is precomputed so calibration loops pay only the Phi calls.
    """

    def __init__(self, k: int, sigma: float, epsilon: float) -> None:
        j = np.arange(1, k + 1, dtype=float)
        sqrt_j = np.sqrt(j)
        self._k = k
        self._sigma = sigma
        self._eps = epsilon
        self._half = sqrt_j / (2.0 * sigma)
        self._eps_ratio = epsilon * sigma / sqrt_j
        self._shift = (k - j) * sigma / sqrt_j  # multiplies log Phi(tau/sigma)
        self._count = k - j  # gamma(j) = count * log Phi(tau/sigma)

    def delta(self, tau: float) -> float:
        logphi = float(special.log_ndtr(tau / self._sigma))
        branch_all_suppressed = -math.expm1(self._k * logphi)
        log_psi = self._count * logphi  # log of the suppression probability power
        # neighbor releases a subset: 1 - psi_j * Phi_c(a_j) - e^eps * Phi(b_j)
        a = self._half - self._eps_ratio + logphi * self._shift
        b = -self._half - self._eps_ratio + logphi * self._shift
        mixed = -np.expm1(log_psi + special.log_ndtr(-a)) - np.exp(self._eps + special.log_ndtr(b))
        # opposite neighbor direction: plain Gaussian term at epsilon + gamma(j)
        a2 = self._half - self._eps_ratio - logphi * self._shift
        b2 = -self._half - self._eps_ratio - logphi * self._shift
        shifted = special.ndtr(a2) - np.exp(self._eps + log_psi + special.log_ndtr(b2))
        best = max(branch_all_suppressed, float(mixed.max()), float(shifted.max()))
        return min(max(best, 0.0), 1.0)


def gshm_exact_delta(config: MechanismConfig, epsilon: float) -> float:
    """Exact delta for independent noise; never above gshm_add_deltas."""
    epsilon = _validate_epsilon(epsilon)
    return _GshmExactEvaluator(config.k, config.sigma, epsilon).delta(config.tau)


# --------------------------------------------------------------------------
# Correlated-noise (csh) analyses.
# --------------------------------------------------------------------------


def delta_inf_bound(k: int, j: int, sigma: float, tau: float) -> float:
    """Upper bound on Pr[some of j noisy zero counts crosses the threshold]
    when the noise carries a shared component of variance sigma^2/sqrt(k)."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if isinstance(j, bool) or not isinstance(j, int) or j < 1:
        raise ValueError(f"j must be a positive integer, got {j!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    scale = sigma * (k ** -0.25 + 1.0)
    return -math.expm1((j + 1) * float(special.log_ndtr(tau / scale)))


def csh_add_deltas(config: MechanismConfig, epsilon: float) -> DeltaBreakdown:
    """Correlated-noise delta_gauss plus the shared-draw crossing bound."""
    epsilon = _validate_epsilon(epsilon)
    delta_gauss = float(shifted_gaussian_delta(_csh_sensitivity(config.k), config.sigma, epsilon))
    delta_inf = delta_inf_bound(config.k, config.k, config.sigma, config.tau)
    return DeltaBreakdown.from_components(delta_gauss, delta_inf)


def csh_threshold_closed_form(k: int, sigma: float, target: PrivacyParams) -> float:
    """Smallest tau whose crossing bound fits inside delta - delta_gauss.

    Inverts the crossing bound directly:
    tau = Phi^{-1}((1 - budget)^{1/(k+1)}) * (1 + k^{-1/4}) * sigma.
    May return a non-positive value when the budget exceeds the bound at
    tau -> 0 (any positive threshold then suffices).
    """
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    delta_gauss = float(shifted_gaussian_delta(_csh_sensitivity(k), sigma, target.epsilon))
    budget = target.delta - delta_gauss
    if budget <= 0:
        raise InfeasibleError(
            f"target delta {target.delta:.6g} does not exceed the noise-level delta floor "
            f"{delta_gauss:.6g}; increase sigma or relax the target",
            delta_gauss,
        )
    p = math.exp(math.log1p(-budget) / (k + 1))
    return std_normal_inv_cdf(p) * (1.0 + k ** -0.25) * sigma


class _CshTightEvaluator:
    """Case-split delta for correlated noise, as a function of tau.

    Branches: (a) every coordinate of the all-ones worst case suppressed;
    (b) the full correlated Gaussian term; over j = 1..k-1, (c) neighbors
    whose support is smaller by j (suppression probability plus a Gaussian
    term at reduced sensitivity gamma(j)) and (d) neighbors whose support is
    larger by j (Gaussian term at epsilon shifted down by the suppression
    log-probability, which may turn epsilon negative).
    """

    def __init__(self, k: int, sigma: float, epsilon: float) -> None:
        self._k = k
        self._sigma = sigma
        self._eps = epsilon
        self._scale = sigma * (1.0 + k ** -0.25)
        self._corr = float(shifted_gaussian_delta(_csh_sensitivity(k), sigma, epsilon))
        if k >= 2:
            j = np.arange(1, k, dtype=float)
            gamma = np.minimum(np.sqrt(j), 0.5 * np.sqrt(j + math.sqrt(k)))
            self._gamma = gamma
            self._half = gamma / (2.0 * sigma)
            self._ratio = sigma / gamma
            self._m_plus_1 = (k - j) + 1.0
            self._superset_gauss = shifted_gaussian_delta(gamma, sigma, epsilon)
        else:
            self._gamma = np.empty(0)
            self._superset_gauss = np.empty(0)

    def _branches(self, tau: float):
        logphi1 = float(special.log_ndtr(tau / self._scale))
        branch_a = -math.expm1((self._k + 1) * logphi1)
        if self._k == 1:
            empty = np.empty(0)
            return logphi1, branch_a, empty, empty, empty
        log_psi = self._m_plus_1 * logphi1  # log psi(k-j) for j = 1..k-1
        branch_c = -np.expm1(log_psi) + self._superset_gauss
        eps_hat = self._eps + log_psi
        a = self._half - eps_hat * self._ratio
        b = -self._half - eps_hat * self._ratio
        branch_d = special.ndtr(a) - np.exp(eps_hat + special.log_ndtr(b))
        return logphi1, branch_a, branch_c, branch_d, eps_hat

    def delta(self, tau: float) -> float:
        _, branch_a, branch_c, branch_d, _ = self._branches(tau)
        best = max(branch_a, self._corr)
        if branch_c.size:
            best = max(best, float(branch_c.max()), float(branch_d.max()))
        return min(max(best, 0.0), 1.0)

    def delta_with_terms(self, tau: float) -> tuple[float, TightAnalysisTerms]:
        logphi1, branch_a, branch_c, branch_d, eps_hat = self._branches(tau)
        best = max(branch_a, self._corr)
        if branch_c.size:
            best = max(best, float(branch_c.max()), float(branch_d.max()))
        psi = np.exp(np.arange(1, self._k + 2, dtype=float) * logphi1)
        terms = TightAnalysisTerms(
            branch_inf_only=branch_a,
            branch_gauss_only=self._corr,
            branch_superset=np.clip(branch_c, 0.0, 1.0),
            branch_subset=np.clip(branch_d, 0.0, 1.0),
            gamma_of_j=self._gamma.copy(),
            psi_of_m=psi,
            eps_hat_of_j=np.asarray(eps_hat, dtype=float).copy(),
        )
        return min(max(best, 0.0), 1.0), terms


def csh_tight_delta(config: MechanismConfig, epsilon: float) -> tuple[float, TightAnalysisTerms]:
    """Case-split correlated-noise delta and its branch breakdown."""
    epsilon = _validate_epsilon(epsilon)
    evaluator = _CshTightEvaluator(config.k, config.sigma, epsilon)
    return evaluator.delta_with_terms(config.tau)


# --------------------------------------------------------------------------
# Discrete analysis.
# --------------------------------------------------------------------------


def zcdp_to_approx_dp(rho, delta: float) -> float:
    """epsilon achieved at a given delta by a rho-zCDP mechanism."""
    value = rho.rho if isinstance(rho, ZcdpBudget) else float(rho)
    if not value > 0:
        raise ValueError(f"rho must be positive, got {rho!r}")
    if not 0.0 < delta < 1.0:
        raise ValueError(f"delta must lie strictly inside (0, 1), got {delta!r}")
    return value + 2.0 * math.sqrt(value * math.log(1.0 / delta))


_LOG_DELTA_FLOOR = math.log(1e-300)


def _discrete_delta_gauss(k: int, sigma: float, epsilon: float) -> float:
    """Smallest delta' whose zCDP conversion stays within epsilon.

    rho = (k + sqrt(k)) / (8 sigma^2); epsilon below rho cannot be reached at
    any delta' < 1, which is surfaced as delta_gauss = 1. The inversion
    bisects in log-delta space; results below 1e-300 are clamped there.
    """
    rho = (k + math.sqrt(k)) / (8.0 * sigma * sigma)

    def eps_at(log_delta: float) -> float:
        return rho + 2.0 * math.sqrt(rho * -log_delta)

    if epsilon < rho:
        return 1.0
    if eps_at(_LOG_DELTA_FLOOR) <= epsilon:
        return 1e-300
    lo, hi = _LOG_DELTA_FLOOR, 0.0  # eps_at decreasing toward hi; eps_at(hi) = rho <= epsilon
    for _ in range(200):
        if hi - lo <= 1e-13 * max(1.0, abs(hi), abs(lo)):
            break
        mid = 0.5 * (lo + hi)
        if eps_at(mid) <= epsilon:
            hi = mid
        else:
            lo = mid
    return math.exp(hi)


def _discrete_delta_inf(k: int, sigma: float, tau: float) -> float:
    """Threshold-crossing bound for the integer-valued correlated mechanism.

    The real-valued CDF arguments are floored before the lattice CDF is
    taken, which only enlarges the bound (the conservative direction). With
    tau > 0 both floored arguments are >= 0, so the CDFs are >= 1/2 and the
    survival masses stay safely inside log1p's domain.
    """
    root = k ** -0.25
    x_corr = math.floor(2.0 * tau * root / (root + 1.0))
    x_ind = math.floor(2.0 * tau / (root + 1.0))
    sf_corr = _gaussian._survival(x_corr, 4.0 * sigma * sigma / math.sqrt(k))
    sf_ind = _gaussian._survival(x_ind, 4.0 * sigma * sigma)
    return -math.expm1(math.log1p(-sf_corr) + k * math.log1p(-sf_ind))


def discrete_csh_deltas(config: MechanismConfig, epsilon: float) -> DeltaBreakdown:
    """Breakdown for the integer-valued correlated mechanism.

    delta_gauss = 1 signals that epsilon sits below the zCDP budget rho and
    no threshold can help; calibration reports that as infeasible.
    """
    epsilon = _validate_epsilon(epsilon)
    delta_gauss = _discrete_delta_gauss(config.k, config.sigma, epsilon)
    delta_inf = _discrete_delta_inf(config.k, config.sigma, config.tau)
    return DeltaBreakdown.from_components(delta_gauss, delta_inf)


def delta_gauss_with_offset_release(k: int, sigma: float, epsilon: float) -> float:
    """delta_gauss when the top-k mechanism additionally releases a noisy
    offset estimate, raising the sensitivity argument to sqrt(k + 5 sqrt(k))/2."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    epsilon = _validate_epsilon(epsilon)
    return float(shifted_gaussian_delta(math.sqrt(k + 5.0 * math.sqrt(k)) / 2.0, sigma, epsilon))


# --------------------------------------------------------------------------
# Calibration solvers.
# --------------------------------------------------------------------------


def total_noise_csh(sigma: float, k: int) -> float:
    """Total per-coordinate noise scale (1 + 1/sqrt(k))^{1/2} * sigma of the
    correlated mechanism, used as the comparable x-axis across mechanisms."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    return math.sqrt(1.0 + 1.0 / math.sqrt(k)) * sigma


def _check_analysis(analysis: str) -> None:
    if analysis not in ANALYSES:
        raise ValueError(f"unknown analysis {analysis!r}; expected one of {ANALYSES}")


def _delta_floor(analysis: str, k: int, sigma: float, epsilon: float) -> float:
    """Threshold-independent delta component (the tau -> infinity limit)."""
    if analysis in ("gshm-add", "gshm-exact"):
        return float(shifted_gaussian_delta(math.sqrt(k), sigma, epsilon))
    if analysis in ("csh-add", "csh-tight"):
        return float(shifted_gaussian_delta(_csh_sensitivity(k), sigma, epsilon))
    return _discrete_delta_gauss(k, sigma, epsilon)


def _delta_of_tau(analysis: str, k: int, sigma: float, epsilon: float):
    """Total delta as a function of tau, with tau-independent parts hoisted."""
    if analysis == "gshm-add":
        floor = _delta_floor(analysis, k, sigma, epsilon)
        return lambda tau: min(1.0, floor - math.expm1(k * float(special.log_ndtr(tau / sigma))))
    if analysis == "gshm-exact":
        return _GshmExactEvaluator(k, sigma, epsilon).delta
    if analysis == "csh-add":
        floor = _delta_floor(analysis, k, sigma, epsilon)
        scale = sigma * (k ** -0.25 + 1.0)
        return lambda tau: min(1.0, floor - math.expm1((k + 1) * float(special.log_ndtr(tau / scale))))
    if analysis == "csh-tight":
        return _CshTightEvaluator(k, sigma, epsilon).delta
    floor = _discrete_delta_gauss(k, sigma, epsilon)
    return lambda tau: min(1.0, floor + _discrete_delta_inf(k, sigma, tau))


def min_tau(analysis: str, k: int, sigma: float, target: PrivacyParams) -> float:
    """Smallest tau > 0 with delta(tau) <= target.delta.

    Bracket then bisect, relying on delta(tau) being non-increasing in tau
    (verified by the test suite for all five analyses); the upper bracket is
    always kept feasible so the returned value satisfies the target.
    """
    _check_analysis(analysis)
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    floor = _delta_floor(analysis, k, sigma, target.epsilon)
    if floor >= target.delta:
        raise InfeasibleError(
            f"{analysis}: delta floor {floor:.6g} at sigma={sigma:.6g} already meets or exceeds "
            f"the target delta {target.delta:.6g}; no threshold can compensate",
            floor,
        )
    delta_of = _delta_of_tau(analysis, k, sigma, target.epsilon)
    lo, hi = sigma / 100.0, 100.0 * sigma
    doublings = 0
    while delta_of(hi) > target.delta:
        doublings += 1
        if doublings > 60:
            raise InfeasibleError(
                f"{analysis}: delta(tau) still above target after 60 bracket doublings; "
                f"delta floor is {floor:.6g}",
                floor,
            )
        lo = hi
        hi *= 2.0
    while delta_of(lo) <= target.delta:
        hi = lo
        lo *= 0.5
        if lo < sigma * 1e-15:
            return hi  # target met arbitrarily close to zero; report the bracket edge
    for _ in range(200):
        if hi - lo <= 1e-9 * hi:
            break
        mid = 0.5 * (lo + hi)
        if delta_of(mid) <= target.delta:
            hi = mid
        else:
            lo = mid
    return hi


def min_sigma(analysis: str, k: int, target: PrivacyParams) -> float:
    """Smallest sigma whose threshold-independent delta component reaches the
    target, i.e. the noise level at which min_tau first becomes feasible."""
    _check_analysis(analysis)
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")

    def floor_at(sigma: float) -> float:
        return _delta_floor(analysis, k, sigma, target.epsilon)

    hi = math.sqrt(k)
    expansions = 0
    while floor_at(hi) > target.delta:
        hi *= 2.0
        expansions += 1
        if expansions > 200:
            raise RuntimeError("failed to bracket the noise floor from above")
    lo = hi
    while floor_at(lo) <= target.delta:
        lo *= 0.5
        if lo < 1e-300:
            return hi
    for _ in range(200):
        if hi - lo <= 1e-9 * hi:
            break
        mid = 0.5 * (lo + hi)
        if floor_at(mid) <= target.delta:
            hi = mid
        else:
            lo = mid
    return hi
