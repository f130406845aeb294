"""Poisson Fisher information and Monte Carlo estimator validation."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from spinopt.ensemble import SensorEnsemble, ensemble_sensitivity, optimal_subset
from spinopt.errors import SpinoptError
from spinopt.fields import GridSpec, ScalarField2D
from spinopt.protocols import RamseyParams, ramsey_sensitivity, sensitivity_map
from spinopt.shotnoise import (
    MCConfig,
    PoissonChannel,
    default_fd_step,
    ensemble_fisher,
    fisher_information,
    ramsey_channel,
    simulate_estimator,
    subset_vs_full_mc,
)

PAR = RamseyParams(n_avg=1e4)
STEP = default_fd_step(PAR)


def linear_channel(lam0, slope):
    return PoissonChannel.from_function(lambda db: lam0 * (1.0 + slope * db))


class TestFisherInformation:
    def test_linear_channel(self):
        lam0, c = 50.0, 3.0
        ch = linear_channel(lam0, c)
        assert fisher_information(ch, 0.0, 1e-6) == pytest.approx(lam0 * c**2, rel=1e-8)

    def test_constant_channel_zero_information(self):
        ch = PoissonChannel.from_function(lambda db: 7.0)
        assert fisher_information(ch, 0.0, 1e-6) == 0.0

    def test_ramsey_channel_matches_sensitivity(self):
        # per unit time F/tau = 1/eta^2 at eps = 0 where lambda(0) = n_avg
        ch = ramsey_channel(0.0, PAR)
        fisher = fisher_information(ch, 0.0, STEP)
        eta = ramsey_sensitivity(0.0, PAR)
        assert fisher / PAR.tau == pytest.approx(1.0 / eta**2, rel=1e-4)

    def test_nonpositive_mean_rejected(self):
        ch = PoissonChannel.from_function(lambda db: -1.0)
        with pytest.raises(SpinoptError):
            fisher_information(ch, 0.0, 1e-6)


class TestEnsembleFisher:
    def test_identical_channels_add(self):
        chans = [linear_channel(50.0, 3.0) for _ in range(7)]
        single = fisher_information(chans[0], 0.0, 1e-6)
        assert ensemble_fisher(chans, 0.0, 1e-6) == pytest.approx(7 * single, rel=1e-8)

    def test_opposite_slopes_cancel(self):
        chans = [linear_channel(50.0, 3.0), linear_channel(50.0, -3.0)]
        assert ensemble_fisher(chans, 0.0, 1e-6) == pytest.approx(0.0, abs=1e-10)

    def test_matches_ensemble_law_on_random_ensembles(self):
        # 1/sqrt(F_ens) == eta_ens from the closed-form law when all channels
        # share lambda(0); per-shot sensitivities eta_i = sqrt(lambda0)/|slope|
        rng = np.random.default_rng(4)
        for _ in range(100):
            n = rng.integers(2, 30)
            lam0 = 500.0
            slopes = rng.uniform(0.5, 4.0, n)
            chans = [linear_channel(lam0, c) for c in slopes]
            f_ens = ensemble_fisher(chans, 0.0, 1e-8)
            etas = np.sqrt(lam0) / (lam0 * slopes)
            eta_ens = np.sqrt(n) / np.sum(1.0 / etas)
            assert 1.0 / np.sqrt(f_ens) == pytest.approx(eta_ens, rel=1e-6)

    def test_pooling_never_beats_separate_readout(self):
        rng = np.random.default_rng(5)
        for _ in range(200):
            n = rng.integers(2, 20)
            chans = [
                linear_channel(rng.uniform(10, 1000), rng.uniform(-4, 4))
                for _ in range(n)
            ]
            pooled = ensemble_fisher(chans, 0.0, 1e-8)
            separate = sum(fisher_information(c, 0.0, 1e-8) for c in chans)
            assert pooled <= separate * (1 + 1e-10)


class TestSimulateEstimator:
    def test_unbiased_within_three_sigma(self):
        chans = [ramsey_channel(e, PAR) for e in (0.0, 0.2, -0.3)]
        true_db = 2e-8
        stats = simulate_estimator(
            chans, MCConfig(shots=100_000, seed=1, fd_step=STEP), true_db
        )
        assert abs(stats.mean - true_db) < 3 * stats.se

    def test_spread_matches_fisher_prediction(self):
        chans = [ramsey_channel(e, PAR) for e in (0.0, 0.4, -0.2, 0.1)]
        stats = simulate_estimator(chans, MCConfig(shots=100_000, seed=2, fd_step=STEP))
        assert stats.std == pytest.approx(stats.fisher_pred, rel=0.03)

    def test_seeded_runs_reproducible(self):
        chans = [ramsey_channel(0.1, PAR)]
        cfg = MCConfig(shots=10_000, seed=42, fd_step=STEP)
        s1 = simulate_estimator(chans, cfg)
        s2 = simulate_estimator(chans, cfg)
        assert s1 == s2

    def test_zero_slope_rejected(self):
        ch = PoissonChannel.from_function(lambda db: 10.0)
        with pytest.raises(SpinoptError):
            simulate_estimator([ch], MCConfig(shots=1000, seed=0, fd_step=1e-6))


class TestSubsetVsFull:
    def _eta_field(self, values):
        grid = GridSpec(1.0, 1.0, values.shape[1], values.shape[0])
        return ScalarField2D(grid, values, unit="relative")

    def test_constant_map_ratio_one(self):
        eps = np.zeros(16)
        mask = np.ones(16, bool)
        sub, full, ratio = subset_vs_full_mc(
            eps, mask, PAR, MCConfig(shots=20_000, seed=3, fd_step=STEP)
        )
        # subset equals the full ensemble up to the independent RNG stream
        assert ratio == pytest.approx(1.0, rel=0.05)

    def test_dead_block_hurts_full_ensemble(self):
        rng = np.random.default_rng(6)
        field = self._eta_field(np.abs(rng.uniform(0.9, 1.1, (6, 6))))
        eps_map = np.pi * (field.values - 1.0) / 2.0
        # a block of nearly dead sensors (eps close to pi/2)
        eps_map[4:, 4:] = np.pi / 2 - 1e-3
        eta_map = sensitivity_map(
            self._eta_field(1.0 + 2 * eps_map / np.pi), "ramsey", PAR, omega0=1.0
        )
        subset, _ = optimal_subset(eta_map)
        cfg = MCConfig(shots=60_000, seed=7, fd_step=STEP)
        sub, full, ratio = subset_vs_full_mc(
            eps_map.ravel(), subset.mask.ravel(), PAR, cfg
        )
        assert not subset.mask[4:, 4:].any()
        # subset variance clearly below the full-ensemble variance
        assert ratio < 1.0
        assert sub.std < full.std

    def test_variance_ratio_matches_ensemble_law(self):
        rng = np.random.default_rng(8)
        eps = rng.uniform(-1.0, 1.0, 40)
        etas = np.array([ramsey_sensitivity(e, PAR) for e in eps])
        curve = ensemble_sensitivity(SensorEnsemble(etas))
        mask = np.zeros(40, bool)
        mask[curve.order[: curve.n_star]] = True
        eta_sub = curve.eta_ens_optimal
        eta_full = np.sqrt(40) / np.sum(1.0 / etas)
        predicted = (eta_sub / eta_full) ** 2
        cfg = MCConfig(shots=100_000, seed=9, fd_step=STEP)
        _, _, ratio = subset_vs_full_mc(eps, mask, PAR, cfg)
        assert ratio == pytest.approx(predicted, rel=0.05)
