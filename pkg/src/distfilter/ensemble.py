"""Ensemble orchestration: many trajectories, aggregated per-iteration
statistics with standard errors, decay-rate fits and resource accounting.

Trajectories are embarrassingly parallel: trajectory i draws from its own
generator seeded by (master_seed, i), so survivor counts are bit-identical
for any shard split of the same trial range.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from . import analytics
from .engine import PostselectionPolicy, run_trajectory
from .spectral import HamiltonianSpec, InitialStateSpec, SpectralModel, build_model, project_initial


@dataclass(frozen=True)
class ProtocolConfig:
    """Full description of one Monte Carlo experiment."""

    hamiltonian: HamiltonianSpec
    initial: InitialStateSpec
    devices: int = 2
    iterations: int = 25
    policy: PostselectionPolicy = PostselectionPolicy("weak")
    phase_mode: str = "iid-uniform"
    window: tuple[float, float] | None = None
    trials: int = 10_000
    seed: int = 0
    restart_mode: str = "survival"
    max_restarts: int = 1_000_000

    def __post_init__(self):
        if self.trials < 1:
            raise ValueError("trials must be >= 1")
        if self.iterations < 0:
            raise ValueError("iterations must be >= 0")
        if self.devices < 1:
            raise ValueError("devices must be >= 1")
        if self.restart_mode not in ("restart", "survival"):
            raise ValueError(f"unknown restart mode {self.restart_mode!r}")
        if self.phase_mode == "time-window" and self.window is None:
            raise ValueError("time-window phase mode requires a window")


@dataclass
class EnsembleSummary:
    """Per-iteration aggregates. Raw count/sum/sum-of-squares accumulators are
    kept so that shard summaries merge exactly."""

    config: ProtocolConfig
    trials: int
    count: np.ndarray  # survivors through k
    sum_var: np.ndarray
    sumsq_var: np.ndarray
    sum_energy: np.ndarray
    sumsq_energy: np.ndarray
    sum_h2: np.ndarray
    sumsq_h2: np.ndarray
    sum_attempts: np.ndarray  # restart mode: attempted iterations to first reach k
    aborted: int = 0

    @classmethod
    def empty(cls, config: ProtocolConfig, K: int | None = None) -> "EnsembleSummary":
        K = config.iterations if K is None else K
        z = lambda: np.zeros(K + 1)
        return cls(config=config, trials=0, count=np.zeros(K + 1, dtype=np.int64),
                   sum_var=z(), sumsq_var=z(), sum_energy=z(), sumsq_energy=z(),
                   sum_h2=z(), sumsq_h2=z(), sum_attempts=z())

    # -- derived statistics ---------------------------------------------------

    def _mean(self, total: np.ndarray) -> np.ndarray:
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.count > 0, total / np.maximum(self.count, 1), np.nan)

    def _sd(self, total: np.ndarray, totalsq: np.ndarray) -> np.ndarray:
        n = self.count.astype(float)
        with np.errstate(invalid="ignore", divide="ignore"):
            var = (totalsq - total**2 / np.maximum(n, 1)) / np.maximum(n - 1, 1)
        var = np.clip(var, 0.0, None)
        return np.where(self.count > 1, np.sqrt(var), np.nan)

    def _se(self, total: np.ndarray, totalsq: np.ndarray) -> np.ndarray:
        return self._sd(total, totalsq) / np.sqrt(np.maximum(self.count, 1))

    @property
    def mean_var(self) -> np.ndarray:
        return self._mean(self.sum_var)

    @property
    def se_var(self) -> np.ndarray:
        return self._se(self.sum_var, self.sumsq_var)

    @property
    def sd_var(self) -> np.ndarray:
        return self._sd(self.sum_var, self.sumsq_var)

    @property
    def mean_energy(self) -> np.ndarray:
        return self._mean(self.sum_energy)

    @property
    def se_energy(self) -> np.ndarray:
        return self._se(self.sum_energy, self.sumsq_energy)

    @property
    def sd_energy(self) -> np.ndarray:
        return self._sd(self.sum_energy, self.sumsq_energy)

    @property
    def mean_h2(self) -> np.ndarray:
        return self._mean(self.sum_h2)

    @property
    def se_h2(self) -> np.ndarray:
        return self._se(self.sum_h2, self.sumsq_h2)

    @property
    def success_rate(self) -> np.ndarray:
        return self.count / max(self.trials, 1)

    @property
    def spread_v(self) -> np.ndarray:
        """Eigenvalue spread of the survivor ensemble: mean<H^2> - (mean E)^2."""
        return self.mean_h2 - self.mean_energy**2

    def se_spread(self) -> np.ndarray:
        """First-order error propagation for the spread estimate."""
        return np.sqrt(self.se_h2**2 + (2.0 * self.mean_energy * self.se_energy) ** 2)

    def costs(self) -> dict:
        """Per-k expected cumulative resources.

        Survival mode converts the empirical survival curve through the
        geometric restart model; restart mode averages the recorded attempt
        counters directly.
        """
        s = self.config.devices
        K = self.count.size - 1
        if self.config.restart_mode == "restart":
            attempts = self._mean(self.sum_attempts)
            return {
                "ctrl_evolutions": s * attempts,
                "bell_pairs": (s - 1) * attempts,
                "ctrl_evolutions_per_state": s * attempts / s,
                "bell_pairs_per_state": (s - 1) * attempts / s,
            }
        return analytics.expected_cost(self.success_rate, s, K)


def merge_summaries(a: EnsembleSummary, b: EnsembleSummary) -> EnsembleSummary:
    """Exact associative/commutative merge of two shard summaries."""
    if a.trials == 0:
        base = b
    elif b.trials == 0:
        base = a
    else:
        base = None
    if base is not None:
        return EnsembleSummary(config=a.config if a.trials else b.config, trials=base.trials,
                               count=base.count.copy(), sum_var=base.sum_var.copy(),
                               sumsq_var=base.sumsq_var.copy(), sum_energy=base.sum_energy.copy(),
                               sumsq_energy=base.sumsq_energy.copy(), sum_h2=base.sum_h2.copy(),
                               sumsq_h2=base.sumsq_h2.copy(), sum_attempts=base.sum_attempts.copy(),
                               aborted=base.aborted)
    if replace(a.config, trials=b.config.trials) != b.config:
        raise ValueError("can only merge summaries with identical configs (up to trial partition)")
    if a.count.size != b.count.size:
        raise ValueError("summaries cover different iteration ranges")
    return EnsembleSummary(
        config=a.config, trials=a.trials + b.trials, count=a.count + b.count,
        sum_var=a.sum_var + b.sum_var, sumsq_var=a.sumsq_var + b.sumsq_var,
        sum_energy=a.sum_energy + b.sum_energy, sumsq_energy=a.sumsq_energy + b.sumsq_energy,
        sum_h2=a.sum_h2 + b.sum_h2, sumsq_h2=a.sumsq_h2 + b.sumsq_h2,
        sum_attempts=a.sum_attempts + b.sum_attempts, aborted=a.aborted + b.aborted,
    )


def _run_shard(config: ProtocolConfig, model: SpectralModel, initial: np.ndarray,
               start: int, stop: int) -> EnsembleSummary:
    out = EnsembleSummary.empty(config)
    out.trials = stop - start
    for i in range(start, stop):
        rng = np.random.default_rng([config.seed, i])
        rec = run_trajectory(config, model, rng, initial_amplitudes=initial)
        if rec.status == "aborted-max-restarts":
            out.aborted += 1
            continue
        kmax = rec.accepted_iterations
        e = np.asarray(rec.energies)
        h2 = np.asarray(rec.second_moments)
        v = np.asarray(rec.variances)
        sl = slice(0, kmax + 1)
        out.count[sl] += 1
        out.sum_var[sl] += v
        out.sumsq_var[sl] += v**2
        out.sum_energy[sl] += e
        out.sumsq_energy[sl] += e**2
        out.sum_h2[sl] += h2
        out.sumsq_h2[sl] += h2**2
        if config.restart_mode == "restart":
            out.sum_attempts[sl] += np.asarray(rec.attempts_at_k, dtype=float)
    return out


def run_ensemble(config: ProtocolConfig, shards: int = 1,
                 model: SpectralModel | None = None) -> EnsembleSummary:
    """Run the full ensemble. Results are deterministic in (seed, trials) and
    independent of the shard count."""
    if model is None:
        model = build_model(config.hamiltonian)
    initial = project_initial(config.initial, model)
    shards = max(1, min(shards, config.trials))
    bounds = np.linspace(0, config.trials, shards + 1).astype(int)
    total = EnsembleSummary.empty(config)
    for a, b in zip(bounds[:-1], bounds[1:]):
        total = merge_summaries(total, _run_shard(config, model, initial, int(a), int(b)))
    return total


def fit_decay(series: np.ndarray, k_values: np.ndarray, k_min: int, k_max: int) -> tuple[float, float]:
    """Exponential decay rate eta of series ~ exp(-eta k) over [k_min, k_max].

    Least-squares slope of log(series); returns (eta, rms residual of the
    log-linear fit). Raises on non-positive values in the window.
    """
    series = np.asarray(series, dtype=float)
    k_values = np.asarray(k_values)
    mask = (k_values >= k_min) & (k_values <= k_max)
    if mask.sum() < 2:
        raise ValueError(f"fit window [{k_min}, {k_max}] selects fewer than two points")
    y = series[mask]
    k = k_values[mask].astype(float)
    if np.any(~np.isfinite(y)) or np.any(y <= 0):
        raise ValueError("series must be positive and finite inside the fit window")
    logy = np.log(y)
    slope, intercept = np.polyfit(k, logy, 1)
    resid = logy - (slope * k + intercept)
    return -float(slope), float(np.sqrt(np.mean(resid**2)))
