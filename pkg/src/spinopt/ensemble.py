"""Ensemble sensitivity law, sensitivity threshold, and optimal subsets.

For N pooled, individually unresolved shot-noise-limited sensors the ensemble
sensitivity obeys 1/eta_ens(N) = (1/sqrt(N)) * sum_i 1/eta_i.  Sorting sensors
from best to worst and evaluating every prefix exposes a sensitivity threshold
eta_th: sensors worse than eta_th add more photon shot noise than signal, so
the optimal subset is exactly the sorted prefix up to the curve's argmin.
"""

from dataclasses import dataclass

import numpy as np

from .errors import EmptyRegionError, SpinoptError
from .fields import ScalarField2D
from .protocols import RamseyParams, ramsey_signal


@dataclass(frozen=True)
class SensorEnsemble:
    """Sensors with individual sensitivities; +inf marks excluded sensors."""

    etas: np.ndarray
    positions: np.ndarray | None = None  # flat indices into the source map
    weights: np.ndarray | None = None  # per-sensor photon weight

    def __post_init__(self):
        etas = np.asarray(self.etas, dtype=float).ravel()
        if etas.size == 0:
            raise ValueError("ensemble must contain at least one sensor")
        if np.isnan(etas).any() or (etas <= 0).any():
            raise ValueError("sensitivities must be positive (or +inf)")
        object.__setattr__(self, "etas", etas)
        if self.positions is not None:
            pos = np.asarray(self.positions).ravel()
            if pos.shape != etas.shape:
                raise ValueError("positions must match etas")
            object.__setattr__(self, "positions", pos)
        if self.weights is not None:
            w = np.asarray(self.weights, dtype=float).ravel()
            if w.shape != etas.shape or (w <= 0).any():
                raise ValueError("weights must be positive and match etas")
            object.__setattr__(self, "weights", w)


@dataclass(frozen=True)
class EnsembleCurve:
    """eta_ens over sorted prefixes, its argmin, and the implied threshold."""

    eta_sorted: np.ndarray  # finite sensitivities, ascending
    inv_prefix: np.ndarray  # S_N = sum of 1/eta over the first N sensors
    curve: np.ndarray  # eta_ens(N) = sqrt(N)/S_N
    order: np.ndarray  # indices of the sorted finite sensors in the input
    n_star: int

    @property
    def eta_threshold(self) -> float:
        return float(self.eta_sorted[self.n_star - 1])

    @property
    def eta_ens_optimal(self) -> float:
        return float(self.curve[self.n_star - 1])


def ensemble_sensitivity(ens: SensorEnsemble) -> EnsembleCurve:
    """Sort sensors by eta and evaluate eta_ens for every prefix.

    Infinite-eta sensors are dropped (they would add noise and no signal and
    can never improve a prefix).  Ties in the argmin resolve to the smallest
    N; ties in eta resolve by input position, making the output deterministic.
    """
    etas = ens.etas
    finite = np.isfinite(etas)
    if not finite.any():
        raise SpinoptError("all sensors are excluded (infinite sensitivity)")
    idx = np.nonzero(finite)[0]
    order = idx[np.argsort(etas[idx], kind="stable")]
    eta_sorted = etas[order]
    if ens.weights is not None:
        w = ens.weights[order]
        inv_prefix = np.cumsum(np.sqrt(w) / eta_sorted)
        n_eff = np.cumsum(w)
    else:
        inv_prefix = np.cumsum(1.0 / eta_sorted)
        n_eff = np.arange(1, eta_sorted.size + 1, dtype=float)
    curve = np.sqrt(n_eff) / inv_prefix
    n_star = int(np.argmin(curve)) + 1
    return EnsembleCurve(eta_sorted, inv_prefix, curve, order, n_star)


def marginal_gain_test(s_n: float, n: int, eta_next: float) -> bool:
    """True iff adding a sensor with eta_next strictly improves eta_ens.

    s_n is the inverse-sensitivity sum of the current N sensors.
    """
    if s_n <= 0 or n < 1:
        raise ValueError("need S_N > 0 and N >= 1")
    if not np.isfinite(eta_next):
        return False
    return (s_n + 1.0 / eta_next) / np.sqrt(n + 1) > s_n / np.sqrt(n)


@dataclass(frozen=True)
class SubsetMask:
    """Optimal-subset membership over the sensor grid."""

    mask: np.ndarray  # boolean, sensor grid shape
    eta_threshold: float

    @property
    def size(self) -> int:
        return int(self.mask.sum())


def optimal_subset(eta_map: ScalarField2D):
    """Optimal sensor subset of a sensitivity map.

    Returns (SubsetMask, EnsembleCurve).  The mask holds the N* best pixels;
    membership coincides with eta <= eta_th up to exact ties at the threshold.
    """
    ens = SensorEnsemble(eta_map.values.ravel())
    curve = ensemble_sensitivity(ens)
    mask = np.zeros(eta_map.values.size, dtype=bool)
    mask[curve.order[: curve.n_star]] = True
    return (
        SubsetMask(mask.reshape(eta_map.values.shape), curve.eta_threshold),
        curve,
    )


def eta_ens_of_mask(eta_map: ScalarField2D, mask) -> float:
    """eta_ens of all sensors inside a fixed mask.

    Excluded sensors (eta = +inf) still count toward N: they emit photons and
    contribute shot noise, just no signal.
    """
    mask = np.asarray(mask, dtype=bool)
    vals = eta_map.values[mask] if mask.shape == eta_map.values.shape else eta_map.values.ravel()[mask]
    if vals.size == 0:
        raise EmptyRegionError("mask selects no sensors")
    inv = np.where(np.isfinite(vals), 1.0 / vals, 0.0)
    total = inv.sum()
    if total == 0:
        raise SpinoptError("mask contains only excluded sensors")
    return float(np.sqrt(vals.size) / total)


def metrology_gain(
    eta_map: ScalarField2D,
    baseline_mask,
    optimal_mask,
    db_convention: str = "20log10",
) -> float:
    """Gain of the optimal subset over a baseline region, in dB.

    Sensitivity is amplitude-like, so the default convention is
    20*log10(eta_baseline/eta_optimal); a 10*log10 variant is available.
    """
    base = eta_ens_of_mask(eta_map, baseline_mask)
    opt = eta_ens_of_mask(eta_map, optimal_mask)
    factor = {"20log10": 20.0, "10log10": 10.0}.get(db_convention)
    if factor is None:
        raise ValueError(f"unknown dB convention {db_convention!r}")
    return float(factor * np.log10(base / opt))


def threshold_consistency(curve: EnsembleCurve) -> float:
    """Residual of the continuum marginal condition eta_N* = 2 sqrt(N*) eta_ens.

    Small for smooth sensitivity distributions; degenerate (all-equal)
    ensembles report a large residual because the condition never binds.
    """
    if curve.n_star < 10:
        raise SpinoptError("threshold consistency needs N* >= 10")
    eta_n = curve.eta_sorted[curve.n_star - 1]
    return float(
        abs(eta_n - 2 * np.sqrt(curve.n_star) * curve.curve[curve.n_star - 1]) / eta_n
    )


def ensemble_signal_scan(
    eps_values,
    params: RamseyParams,
    delta_b_grid,
    phase: float = 0.0,
):
    """Summed Ramsey signal of an ensemble over a grid of field offsets.

    Returns an array S_ens(delta_b) = sum_i S(eps_i, delta_b); the sum of
    same-frequency sinusoids stays sinusoidal in delta_b.
    """
    eps_values = np.asarray(eps_values, dtype=float).ravel()
    delta_b_grid = np.asarray(delta_b_grid, dtype=float)
    out = np.empty(delta_b_grid.shape, dtype=float)
    for i, db in enumerate(delta_b_grid.ravel()):
        out.ravel()[i] = float(np.sum(ramsey_signal(eps_values, phase, db, params)))
    return out
