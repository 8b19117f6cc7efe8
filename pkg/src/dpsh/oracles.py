"""Numerical oracles that check the accounting bounds from the outside.

Nothing here reuses accounting's formulas: the Monte Carlo estimator plays
the threshold-crossing event directly, and the hockey-stick routine
integrates the release mechanism's actual output distributions. Tests
compare the two routes; the oracles must stay independent for that
comparison to mean anything.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize, special

__all__ = ["McEstimate", "mc_delta_inf", "hockey_stick_csh", "NEIGHBOR_CASES"]

NEIGHBOR_CASES = ("superset", "subset", "same-support")

_SQRT_2PI = math.sqrt(2.0 * math.pi)
_MC_CHUNK = 200_000
# beyond 12 standard deviations the discarded Gaussian mass is ~1.8e-33
_RANGE_SD = 12.0
_TAIL_MASS = 4e-33


@dataclass(frozen=True)
class McEstimate:
    """Empirical event frequency with its binomial standard error."""

    estimate: float
    std_error: float
    trials: int

    def __post_init__(self) -> None:
        if isinstance(self.trials, bool) or not isinstance(self.trials, int) or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0.0 <= self.estimate <= 1.0:
            raise ValueError(f"estimate must lie in [0, 1], got {self.estimate!r}")
        expected = math.sqrt(self.estimate * (1.0 - self.estimate) / self.trials)
        if abs(self.std_error - expected) > 1e-12:
            raise ValueError(
                f"std_error {self.std_error!r} inconsistent with estimate and trials "
                f"(expected {expected!r})"
            )


def mc_delta_inf(
    k: int,
    j: int,
    sigma: float,
    tau: float,
    trials: int,
    rng: np.random.Generator,
) -> McEstimate:
    """Play the threshold-crossing event: one shared draw of scale
    sigma/k^(1/4) plus j independent draws of scale sigma per trial, counting
    trials where some sum exceeds tau."""
    if isinstance(k, bool) or not isinstance(k, int) or k < 1:
        raise ValueError(f"k must be a positive integer, got {k!r}")
    if isinstance(j, bool) or not isinstance(j, int) or j < 1:
        raise ValueError(f"j must be a positive integer, got {j!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if isinstance(trials, bool) or not isinstance(trials, int) or trials < 10_000:
        raise ValueError(f"trials must be an integer of at least 10^4, got {trials!r}")
    corr_scale = sigma * k**-0.25
    hits = 0
    remaining = trials
    while remaining:
        n = min(_MC_CHUNK, remaining)
        z_corr = corr_scale * rng.standard_normal(n)
        z_max = sigma * rng.standard_normal((n, j)).max(axis=1)
        hits += int(np.count_nonzero(z_corr + z_max > tau))
        remaining -= n
    estimate = hits / trials
    std_error = math.sqrt(estimate * (1.0 - estimate) / trials)
    return McEstimate(estimate=estimate, std_error=std_error, trials=trials)


# --------------------------------------------------------------------------
# Hockey-stick divergence of the correlated release, k <= 2, by quadrature.
#
# The mechanism's output is a released key set S plus a real value per
# released key. Noise is count + sigma*xi_i + c with one shared c of scale
# s = sigma/k^(1/4); a key is released iff its value exceeds t = 1 + tau,
# and zero counts are never touched. Conditioning on c makes every
# per-coordinate event an independent Phi factor, so each output cell is a
# one-dimensional integral over c (plus one over the released value, and,
# for the doubly released cell, one more that the half-space reduction
# keeps finite).
# --------------------------------------------------------------------------


def _neighbor_pair(k: int, neighbor_case: str) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """Worst-case neighboring count vectors (zero means the key is absent).

    superset: all-ones against the empty histogram. subset: the mirror
    direction, with the k=2 pair overlapping in one key so the comparison
    exercises a mixed released/suppressed cell. same-support: one shared
    user bumps every count.
    """
    if neighbor_case == "superset":
        return (1,) * k, (0,) * k
    if neighbor_case == "subset":
        if k == 1:
            return (0,), (1,)
        return (1, 0), (2, 1)
    if neighbor_case == "same-support":
        return (2,) * k, (1,) * k
    raise ValueError(
        f"unknown neighbor_case {neighbor_case!r}; expected one of {NEIGHBOR_CASES}"
    )


class _Quadrature:
    """Shared state for one divergence computation: parameters, Gauss nodes
    for the crossing scan, and the running error ledger."""

    def __init__(self, sigma: float, s: float, t: float, epsilon: float) -> None:
        self.sigma = sigma
        self.s = s
        self.t = t
        self.eps_factor = math.exp(epsilon)
        self.epsilon = epsilon
        self.errors: list[float] = []
        nodes, weights = np.polynomial.legendre.leggauss(256)
        self.c_nodes = nodes * (_RANGE_SD * s)
        gauss = np.exp(-0.5 * (self.c_nodes / s) ** 2) / (s * _SQRT_2PI)
        self.c_weights = weights * (_RANGE_SD * s) * gauss

    # -- scalar conditional building blocks ------------------------------

    def _log_suppressed(self, counts, skip, c: float) -> float:
        total = 0.0
        for i, a in enumerate(counts):
            if a and i not in skip:
                total += float(special.log_ndtr((self.t - a - c) / self.sigma))
        return total

    def _c_integral(self, fn, epsabs: float, certify: bool) -> float:
        # certify=False marks pointwise helper integrals whose error enters
        # an enclosing integrand; those are charged to the ledger in one
        # lump by their caller instead of per evaluation
        lim = _RANGE_SD * self.s

        def integrand(c: float) -> float:
            return math.exp(-0.5 * (c / self.s) ** 2) / (self.s * _SQRT_2PI) * fn(c)

        value, err = integrate.quad(
            integrand, -lim, lim, epsabs=epsabs, epsrel=1e-11, limit=200
        )
        if certify:
            self.errors.append(err + _TAIL_MASS)
        return value

    def atom(self, counts) -> float:
        """Probability that nothing is released."""
        return self._c_integral(
            lambda c: math.exp(self._log_suppressed(counts, (), c)), 1e-12, certify=True
        )

    def cell_mass(self, counts, released) -> float:
        """Probability that exactly the keys in ``released`` are released."""

        def fn(c: float) -> float:
            log_rel = sum(
                float(special.log_ndtr(-(self.t - counts[i] - c) / self.sigma))
                for i in released
            )
            return math.exp(log_rel + self._log_suppressed(counts, released, c))

        return self._c_integral(fn, 1e-12, certify=True)

    def released_density(self, counts, index: int, v: float) -> float:
        """Sub-density at value v of the cell releasing exactly ``index``."""
        a = counts[index]

        def fn(c: float) -> float:
            z = (v - a - c) / self.sigma
            return (
                math.exp(-0.5 * z * z + self._log_suppressed(counts, (index,), c))
                / (self.sigma * _SQRT_2PI)
            )

        return self._c_integral(fn, 1e-13, certify=False)

    # -- one-key cells ----------------------------------------------------

    def _grid_density(self, counts, index: int, grid: np.ndarray) -> np.ndarray:
        """Fast non-certified density on a grid, for locating sign changes."""
        sup = np.zeros_like(self.c_nodes)
        for i, a in enumerate(counts):
            if a and i != index:
                sup += special.log_ndtr((self.t - a - self.c_nodes) / self.sigma)
        weights = self.c_weights * np.exp(sup)
        z = (grid[:, None] - counts[index] - self.c_nodes[None, :]) / self.sigma
        return np.exp(-0.5 * z * z) @ weights / (self.sigma * _SQRT_2PI)

    def one_key_cell(self, counts_p, counts_q, index: int) -> float:
        """Integral of (p - e^eps q)+ over the cell releasing exactly
        ``index``, both supports containing the key."""
        w = math.sqrt(self.sigma**2 + self.s**2)
        top = max(max(counts_p), max(counts_q)) + _RANGE_SD * w + self.t

        def h(v: float) -> float:
            return self.released_density(counts_p, index, v) - self.eps_factor * (
                self.released_density(counts_q, index, v)
            )

        grid = np.linspace(self.t, top, 512)
        h_grid = self._grid_density(counts_p, index, grid) - self.eps_factor * (
            self._grid_density(counts_q, index, grid)
        )
        cuts = [self.t, top]
        flips = np.nonzero(np.diff(np.sign(h_grid)) != 0)[0]
        for idx in flips:
            lo, hi = grid[idx], grid[idx + 1]
            f_lo, f_hi = h(lo), h(hi)
            if f_lo == 0.0 or f_hi == 0.0 or (f_lo < 0) != (f_hi < 0):
                cuts.append(float(optimize.brentq(h, lo, hi, xtol=1e-11 * w)))
        cuts.sort()
        total = 0.0
        for lo, hi in itertools.pairwise(cuts):
            if hi - lo < 1e-12 * w:
                continue
            if h(0.5 * (lo + hi)) <= 0.0:
                continue
            value, err = integrate.quad(h, lo, hi, epsabs=1e-10, epsrel=1e-10, limit=400)
            total += value
            # the uncertified inner c-integrals perturb h pointwise by at
            # most ~2e-13; charge that over the segment length in one lump
            self.errors.append(err + (hi - lo) * (1.0 + self.eps_factor) * 2e-13)
        self.errors.append(_TAIL_MASS)  # released-value tail beyond top
        return total

    # -- the doubly released cell (same-support k=2 only) -----------------

    def both_keys_cell(self, counts_p, counts_q) -> float:
        """Exact positive-part integral over the cell releasing both keys.

        With every key released no Phi suppression factor survives, so p
        and q are bivariate normals with equal covariance sigma^2 I + s^2 J
        and p > e^eps q on the half-space where the value sum exceeds
        h = eps (sigma^2 + 2 s^2) + sum of all four counts over 2. The
        contribution is then P(R) - e^eps Q(R) with no positive-part kink.
        """
        diff = counts_p[0] - counts_q[0]
        if not (counts_p[0] == counts_p[1] and counts_q[0] == counts_q[1] and diff == 1):
            raise AssertionError("both-keys cell expects equal counts differing by one")
        h_sum = self.epsilon * (self.sigma**2 + 2.0 * self.s**2) + sum(counts_p) / 2.0 + sum(
            counts_q
        ) / 2.0

        def region_prob(count: int) -> float:
            def fn(c: float) -> float:
                alpha = (self.t - count - c) / self.sigma
                beta = (h_sum - 2.0 * (count + c)) / self.sigma
                tail = float(special.ndtr(-alpha))
                if beta <= 2.0 * alpha:
                    return tail * tail
                phi_alpha = float(special.ndtr(alpha))

                def slice_prob(x: float) -> float:
                    return (
                        math.exp(-0.5 * x * x)
                        / _SQRT_2PI
                        * (float(special.ndtr(beta - x)) - phi_alpha)
                    )

                shaved, _ = integrate.quad(
                    slice_prob, alpha, beta - alpha, epsabs=1e-13, epsrel=1e-12
                )
                return tail * tail - shaved

            value = self._c_integral(fn, 1e-11, certify=True)
            # pointwise slice-integral error folds through the outer weight
            self.errors.append(1e-12)
            return value

        return region_prob(counts_p[0]) - self.eps_factor * region_prob(counts_q[0])


def hockey_stick_csh(
    k: int,
    sigma: float,
    tau: float,
    epsilon: float,
    neighbor_case: str,
) -> float:
    """sup over output events of P(Y) - e^eps Q(Y) for the correlated
    release on the worst-case neighbor pair of the chosen case.

    The output space decomposes over released key sets; each cell's
    positive part is integrated with adaptive quadrature, and the summed
    error estimates must stay within 1e-7 or the computation refuses to
    answer. k is capped at 2: the doubly released cell is the highest
    dimension the half-space reduction keeps exact.
    """
    if isinstance(k, bool) or not isinstance(k, int) or k not in (1, 2):
        raise ValueError(f"k must be 1 or 2 for the divergence quadrature, got {k!r}")
    if not sigma > 0:
        raise ValueError(f"sigma must be positive, got {sigma!r}")
    if not tau > 0:
        raise ValueError(f"tau must be positive, got {tau!r}")
    if not (math.isfinite(epsilon) and epsilon >= 0):
        raise ValueError(f"epsilon must be a non-negative finite real, got {epsilon!r}")
    counts_p, counts_q = _neighbor_pair(k, neighbor_case)
    quad = _Quadrature(sigma, sigma * k**-0.25, 1.0 + tau, epsilon)
    support_p = tuple(i for i, a in enumerate(counts_p) if a)
    support_q = {i for i, a in enumerate(counts_q) if a}

    total = max(0.0, quad.atom(counts_p) - quad.eps_factor * quad.atom(counts_q))
    for size in range(1, len(support_p) + 1):
        for released in itertools.combinations(support_p, size):
            if not set(released) <= support_q:
                # Q never shows these keys; the whole cell is P-mass
                total += quad.cell_mass(counts_p, released)
            elif size == 1:
                total += quad.one_key_cell(counts_p, counts_q, released[0])
            else:
                total += quad.both_keys_cell(counts_p, counts_q)
    err = math.fsum(quad.errors)
    if err > 1e-7:
        raise RuntimeError(
            f"quadrature error budget exceeded: accumulated estimate {err:.3g} > 1e-7"
        )
    return max(0.0, total)
