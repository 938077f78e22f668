"""Closed-form predictions for success rates, energy bias, eigenvalue spread,
their Gaussian-continuum counterparts, and resource-cost accounting.

These serve as independent oracles for the Monte Carlo engine. The weak-side
finite-k approximations are proved; the strong-side ones are conjectured
approximations, labelled as such in reports.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class PopulationProfile:
    """Eigenvalues and initial eigenbasis populations of one device."""

    eigenvalues: np.ndarray
    populations: np.ndarray

    def __post_init__(self):
        lam = np.asarray(self.eigenvalues, dtype=float)
        pop = np.asarray(self.populations, dtype=float)
        if lam.shape != pop.shape:
            raise ValueError("eigenvalues and populations must have matching shapes")
        if np.any(pop < -1e-12):
            raise ValueError("populations must be non-negative")
        if abs(pop.sum() - 1.0) > 1e-10:
            raise ValueError(f"populations must sum to 1, got {pop.sum()}")
        object.__setattr__(self, "eigenvalues", lam)
        object.__setattr__(self, "populations", np.clip(pop, 0.0, None))

    # Moment helpers shared by every closed form below.
    @property
    def p2(self) -> float:  # sum |c|^4
        return float(np.sum(self.populations**2))

    def moment(self, power: int, weight: int = 1) -> float:
        """sum lambda^power * |c|^(2*weight)."""
        return float(np.sum(self.eigenvalues**power * self.populations**weight))


@dataclass(frozen=True)
class GaussianSpec:
    """Gaussian continuum model: density of states ~ N(0, sigma2), initial
    population envelope ~ exp(-(lambda-mu)^2 / (2 xi2))."""

    mu: float
    xi2: float
    sigma2: float

    def __post_init__(self):
        if self.xi2 <= 0 or self.sigma2 <= 0:
            raise ValueError("variances must be positive")


def profile_from_amplitudes(eigenvalues: np.ndarray, amplitudes: np.ndarray) -> PopulationProfile:
    return PopulationProfile(eigenvalues=np.asarray(eigenvalues, dtype=float),
                             populations=np.abs(np.asarray(amplitudes)) ** 2)


# -- Success rates ------------------------------------------------------------

def weak_success_rate(p: PopulationProfile, k: int) -> float:
    """Cumulative success probability of weak postselection after k iterations."""
    if k < 0:
        raise ValueError("k must be >= 0")
    cross = 1.0 - p.p2  # sum_{j != j'} |c_j|^2 |c_j'|^2
    return p.p2 + (0.75**k) * cross


def strong_success_rate(p: PopulationProfile, k: int) -> float:
    """Cumulative success probability of strong postselection after k iterations."""
    if k < 0:
        raise ValueError("k must be >= 0")
    cross = 1.0 - p.p2
    return (0.75**k) * p.p2 + (0.5**k) * cross


def multi_weak_floor(p: PopulationProfile, s: int) -> float:
    """Large-k floor of the s-device weak cumulative success rate: sum |c|^(2s)."""
    if s < 2:
        raise ValueError("s must be >= 2")
    return float(np.sum(p.populations**s))


# -- Energy and spread limits -------------------------------------------------

def energy_limit(p: PopulationProfile) -> float:
    """Asymptotic postselected mean energy: sum lambda |c|^4 / sum |c|^4."""
    return p.moment(1, 2) / p.p2


def spread_limit(p: PopulationProfile) -> float:
    """Asymptotic eigenvalue spread of the postselected ensemble."""
    e = energy_limit(p)
    return p.moment(2, 2) / p.p2 - e**2


def _finite_k_ratio(p: PopulationProfile, growth: float, K: int, power: int) -> float:
    w = growth**K - 1.0
    return (w * p.moment(power, 2) + p.moment(power, 1)) / (w * p.p2 + 1.0)


def weak_energy_approx(p: PopulationProfile, K: int) -> float:
    """Finite-k mean energy under weak postselection ((4/3)^K interpolation)."""
    if K < 0:
        raise ValueError("K must be >= 0")
    return _finite_k_ratio(p, 4.0 / 3.0, K, 1)


def strong_energy_approx(p: PopulationProfile, K: int) -> float:
    """Finite-k mean energy under strong postselection ((3/2)^K interpolation).

    Conjectured approximation; the weak-side counterpart is proved.
    """
    if K < 0:
        raise ValueError("K must be >= 0")
    return _finite_k_ratio(p, 1.5, K, 1)


def spread_approx_weak(p: PopulationProfile, K: int) -> float:
    return _finite_k_ratio(p, 4.0 / 3.0, K, 2) - weak_energy_approx(p, K) ** 2


def spread_approx_strong(p: PopulationProfile, K: int) -> float:
    """Conjectured approximation (same caveat as strong_energy_approx)."""
    return _finite_k_ratio(p, 1.5, K, 2) - strong_energy_approx(p, K) ** 2


# -- Gaussian continuum -------------------------------------------------------

def gaussian_normalization(g: GaussianSpec) -> float:
    """Envelope prefactor A making the continuum populations integrate to 1."""
    return math.exp(g.mu**2 / (2 * (g.xi2 + g.sigma2))) * math.sqrt(g.xi2 + g.sigma2) / math.sqrt(g.xi2)


def _gauss_exp(g: GaussianSpec) -> float:
    return math.exp(g.mu**2 / (g.xi2 + g.sigma2) - g.mu**2 / (g.xi2 + 2 * g.sigma2))


def gaussian_c4(g: GaussianSpec) -> float:
    """Continuum estimate of sum |c|^4."""
    return _gauss_exp(g) * (g.xi2 + g.sigma2) / (math.sqrt(g.xi2) * math.sqrt(g.xi2 + 2 * g.sigma2))


def _gaussian_moments(g: GaussianSpec):
    xi2, s2, mu = g.xi2, g.sigma2, g.mu
    xi = math.sqrt(xi2)
    e = _gauss_exp(g)
    c4 = e * (xi2 + s2) / (xi * math.sqrt(xi2 + 2 * s2))
    lam_c4 = 2 * e * mu * s2 * (xi2 + s2) / (xi * (xi2 + 2 * s2) ** 1.5)
    lam2_c4 = e * s2 * (xi2 + s2) * (xi2**2 + 4 * mu**2 * s2 + 2 * xi2 * s2) / (xi * (xi2 + 2 * s2) ** 2.5)
    lam_c2 = mu * s2 / (xi2 + s2)
    lam2_c2 = s2 * (xi2**2 + mu**2 * s2 + xi2 * s2) / (xi2 + s2) ** 2
    return c4, lam_c4, lam2_c4, lam_c2, lam2_c2


def gaussian_energy(g: GaussianSpec, K: int) -> float:
    """Continuum weak-postselected mean energy after K iterations."""
    if K < 0:
        raise ValueError("K must be >= 0")
    c4, lam_c4, _, lam_c2, _ = _gaussian_moments(g)
    w = (4.0 / 3.0) ** K - 1.0
    return (w * lam_c4 + lam_c2) / (w * c4 + 1.0)


def gaussian_spread(g: GaussianSpec, K: int) -> float:
    """Continuum eigenvalue spread after K iterations (weak postselection)."""
    c4, _, lam2_c4, _, lam2_c2 = _gaussian_moments(g)
    w = (4.0 / 3.0) ** K - 1.0
    return (w * lam2_c4 + lam2_c2) / (w * c4 + 1.0) - gaussian_energy(g, K) ** 2


def gaussian_spread_drop(g: GaussianSpec) -> float:
    """V(0) - V(infinity) = xi^2 / ((xi2/sigma2 + 1)(xi2/sigma2 + 2))."""
    r = g.xi2 / g.sigma2
    return g.xi2 / ((r + 1.0) * (r + 2.0))


def gaussian_bias(g: GaussianSpec) -> float:
    """Asymptotic energy bias magnitude |E(0) - E(infinity)|."""
    r = g.xi2 / g.sigma2
    return abs(g.mu) * abs(1.0 / (r / 2.0 + 1.0) - 1.0 / (r + 1.0))


MAX_GAUSSIAN_BIAS_COEFF = 1.0 / (2.0 * math.sqrt(2.0) + 3.0)  # ~0.1716, at xi2/sigma2 = sqrt(2)


def fit_gaussian_spec(p: PopulationProfile) -> GaussianSpec:
    """Fit (mu, xi2, sigma2) from a discrete profile.

    mu and xi2 are the weighted mean/variance of the population distribution
    over energy; sigma2 is the plain variance of the eigenvalue distribution.
    """
    lam, pop = p.eigenvalues, p.populations
    mu = float(np.sum(lam * pop))
    xi2 = float(np.sum(pop * (lam - mu) ** 2))
    sigma2 = float(np.var(lam))
    return GaussianSpec(mu=mu, xi2=xi2, sigma2=sigma2)


# -- Resource accounting ------------------------------------------------------

def bell_pairs_per_iteration(s: int) -> int:
    """Bell pairs consumed per attempted iteration: s - 1 (0 for one device)."""
    if s < 1:
        raise ValueError("s must be >= 1")
    return s - 1


def expected_cost(survival_curve: np.ndarray, s: int, K: int | None = None):
    """Expected cumulative resources under restart semantics.

    ``survival_curve[k]`` is the cumulative success probability through
    iteration k (entry 0 must be 1). On failure the protocol restarts from
    scratch, so the expected number of attempted iterations to first reach k
    accepted iterations is sum_{i<k} S(i) / S(k). Returns a dict of arrays:
    total and per-output-state controlled evolutions and Bell pairs (the
    protocol yields s identical states, hence the 1/s normalization).
    """
    surv = np.asarray(survival_curve, dtype=float)
    if surv.size == 0 or abs(surv[0] - 1.0) > 1e-12:
        raise ValueError("survival curve must start at 1")
    if K is None:
        K = surv.size - 1
    attempts = np.zeros(K + 1)
    prefix = np.cumsum(surv)
    for k in range(1, K + 1):
        attempts[k] = prefix[k - 1] / surv[k] if surv[k] > 0 else np.nan
    ctrl = s * attempts
    bell = (s - 1) * attempts
    return {
        "ctrl_evolutions": ctrl,
        "bell_pairs": bell,
        "ctrl_evolutions_per_state": ctrl / s,
        "bell_pairs_per_state": bell / s,
    }
