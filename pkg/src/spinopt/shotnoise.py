"""Monte Carlo and Fisher-information validation of the ensemble law.

Each sensor is a Poisson channel whose mean photon count per interrogation
depends on the field offset delta_B.  The Fisher information of a Poisson
channel is (d lambda / d delta_B)^2 / lambda; pooling unresolved sensors sums
the means first, which is what makes the ensemble sensitivity differ from the
naive sum of per-sensor informations.  The Monte Carlo uses a linear
estimator, valid in the small-offset regime, and checks its spread against
1/sqrt(F_ens) and against the closed-form ensemble sensitivity.
"""

from dataclasses import dataclass

import numpy as np

from .errors import SpinoptError
from .protocols import RamseyParams, ramsey_signal


@dataclass(frozen=True)
class PoissonChannel:
    """Mean photon count per interrogation as a function of the field offset."""

    mean_fn: callable
    lambda0: float

    @classmethod
    def from_function(cls, fn):
        return cls(mean_fn=fn, lambda0=float(fn(0.0)))


def ramsey_channel(eps, params: RamseyParams, phase: float = 0.0) -> PoissonChannel:
    """Poisson channel of a Ramsey sensor with pulse error eps at max slope."""
    def mean_fn(delta_b):
        return ramsey_signal(eps, phase, delta_b, params)

    return PoissonChannel.from_function(mean_fn)


def default_fd_step(params: RamseyParams) -> float:
    """Finite-difference step, 1e-4 of the signal period in delta_B."""
    return 1e-4 * 2 * np.pi / (params.gamma_e * params.tau)


@dataclass(frozen=True)
class MCConfig:
    shots: int = 100_000
    seed: int = 0
    delta_b: float = 0.0
    fd_step: float = 1e-9

    def __post_init__(self):
        if self.shots < 1000:
            raise ValueError("need at least 1000 shots for stable statistics")
        if self.fd_step <= 0:
            raise ValueError("finite-difference step must be positive")


def _slope(channel: PoissonChannel, delta_b: float, step: float):
    return (channel.mean_fn(delta_b + step) - channel.mean_fn(delta_b - step)) / (2 * step)


def fisher_information(channel: PoissonChannel, delta_b: float = 0.0, step: float = 1e-9) -> float:
    """F = (d lambda)^2 / lambda for one Poisson channel, per interrogation."""
    lam = float(channel.mean_fn(delta_b))
    if lam <= 0:
        raise SpinoptError("Poisson mean must be positive")
    return float(_slope(channel, delta_b, step) ** 2 / lam)


def ensemble_fisher(channels, delta_b: float = 0.0, step: float = 1e-9) -> float:
    """Pooled-signal Fisher information (sum of slopes)^2 / (sum of means)."""
    slopes = sum(_slope(ch, delta_b, step) for ch in channels)
    total = sum(float(ch.mean_fn(delta_b)) for ch in channels)
    if total <= 0:
        raise SpinoptError("pooled Poisson mean must be positive")
    return float(slopes**2 / total)


@dataclass(frozen=True)
class EstimatorStats:
    mean: float
    std: float
    se: float
    shots: int
    fisher_pred: float  # 1/sqrt(F_ens), the predicted single-shot spread

    @property
    def ratio(self) -> float:
        """Measured spread over the Fisher prediction."""
        return self.std / self.fisher_pred


def simulate_estimator(channels, config: MCConfig, true_delta_b: float | None = None) -> EstimatorStats:
    """Poisson-sample the pooled signal and apply the linear estimator.

    Per shot, k ~ Poisson(Lambda(delta_b)); the estimate is
    (k - Lambda(0)) / Lambda'(0).  Returns the estimator mean, spread,
    standard error, and the 1/sqrt(F_ens) prediction.
    """
    if true_delta_b is None:
        true_delta_b = config.delta_b
    lam_true = sum(float(ch.mean_fn(true_delta_b)) for ch in channels)
    lam0 = sum(ch.lambda0 for ch in channels)
    slope0 = sum(_slope(ch, 0.0, config.fd_step) for ch in channels)
    if slope0 == 0:
        raise SpinoptError("pooled signal has zero slope: nothing to estimate")
    rng = np.random.default_rng(config.seed)
    counts = rng.poisson(lam_true, size=config.shots)
    estimates = (counts - lam0) / slope0
    fisher = ensemble_fisher(channels, 0.0, config.fd_step)
    return EstimatorStats(
        mean=float(estimates.mean()),
        std=float(estimates.std()),
        se=float(estimates.std() / np.sqrt(config.shots)),
        shots=config.shots,
        fisher_pred=float(1 / np.sqrt(fisher)),
    )


def subset_vs_full_mc(eps_values, subset_mask, params: RamseyParams, config: MCConfig):
    """Estimator spread on the optimal subset versus the full ensemble.

    eps_values are the per-sensor pulse errors; subset_mask flags subset
    membership.  Returns (subset_stats, full_stats, variance_ratio) with
    variance_ratio = var_subset / var_full.
    """
    eps_values = np.asarray(eps_values, dtype=float).ravel()
    subset_mask = np.asarray(subset_mask, dtype=bool).ravel()
    if subset_mask.shape != eps_values.shape:
        raise ValueError("subset mask must match eps values")
    full = [ramsey_channel(e, params) for e in eps_values]
    subset = [ch for ch, m in zip(full, subset_mask) if m]
    if not subset:
        raise SpinoptError("subset is empty")
    stats_subset = simulate_estimator(subset, config)
    full_cfg = MCConfig(config.shots, config.seed + 1, config.delta_b, config.fd_step)
    stats_full = simulate_estimator(full, full_cfg)
    return stats_subset, stats_full, (stats_subset.std / stats_full.std) ** 2
