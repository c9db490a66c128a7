"""Classical randomization, density reconstruction, baseline training."""

import numpy as np
import pytest
from scipy import stats

from qperc.baselines import (
    BaselineMethod,
    DensityGrid,
    NoisyDensityEstimator,
    RandomizedBaselinePerceptron,
    UniformNoise,
    distort,
    empirical_grid,
    noise_model,
    reconstruct_1d,
    reconstruct_2d,
    train_baseline,
)
from qperc.data import generate_set2, generate_set3
from qperc.noise import GRID
from qperc.privacy import privacy_amount_uniform


def rng(seed=0):
    return np.random.default_rng(seed)


class TestDistort:
    def test_zero_delta_is_identity_up_to_rounding(self):
        tset = generate_set2(32, rng(1))
        dist = distort(tset, 0.0, "uniform", rng(2))
        assert np.array_equal(dist.X, tset.X)
        assert np.array_equal(dist.labels, tset.labels)

    def test_uniform_noise_is_flat(self):
        tset = generate_set2(2048, rng(3))
        delta = 2.0
        dist = distort(tset, delta, "uniform", rng(4))
        noise = (dist.X - tset.X).reshape(-1)
        assert np.all(np.abs(noise) <= delta + 1 / GRID)
        counts, _ = np.histogram(noise, bins=8, range=(-delta, delta))
        assert stats.chisquare(counts).pvalue > 0.001

    def test_normal_noise_scale(self):
        tset = generate_set2(4096, rng(5))
        dist = distort(tset, 2.0, "normal", rng(6))
        noise = (dist.X - tset.X).reshape(-1)
        assert abs(noise.std() - 0.484 * 2.0) < 0.03

    def test_privacy_amount(self):
        # the published uniform method carries 1.9 delta at 95%
        assert privacy_amount_uniform(2.0, 95) == pytest.approx(3.8)

    def test_values_on_grid(self):
        tset = generate_set3(64, rng(7))
        dist = distort(tset, 0.7, "uniform", rng(8))
        assert np.all(dist.X * GRID == np.floor(dist.X * GRID))


class TestReconstruct1D:
    def test_zero_noise_reproduces_histogram(self):
        samples = rng(9).uniform(0.0, 4.0, size=500)
        edges = np.linspace(-0.5, 4.5, 21)
        grid = reconstruct_1d(samples, UniformNoise(0.0), L=20, edges=edges)
        hist = empirical_grid(samples.reshape(-1, 1), [edges])
        assert np.allclose(grid.masses, hist.masses)

    def test_recovers_half_range_uniform(self):
        # truth: uniform on [0, 4] inside range [0, 8]; noise delta = 1
        r = rng(10)
        n = 10000
        clean = r.uniform(0.0, 4.0, size=n)
        noisy = clean + r.uniform(-1.0, 1.0, size=n)
        edges = np.linspace(-1.0, 9.0, 21)
        grid = reconstruct_1d(noisy, UniformNoise(1.0), L=20, edges=edges,
                              iterations=200)
        truth, _ = np.histogram(r.uniform(0.0, 4.0, size=200000), bins=edges)
        l1 = np.abs(grid.masses - truth / truth.sum()).sum()
        assert l1 < 0.15

    def test_order_invariant(self):
        samples = rng(11).normal(3.0, 1.0, size=400)
        noise = UniformNoise(0.5)
        edges = np.linspace(0.0, 6.0, 16)
        a = reconstruct_1d(samples, noise, L=15, edges=edges)
        b = reconstruct_1d(samples[::-1].copy(), noise, L=15, edges=edges)
        assert np.allclose(a.masses, b.masses)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            reconstruct_1d(np.array([]), UniformNoise(1.0))


class TestReconstruct2D:
    def test_zero_noise_reproduces_2d_histogram(self):
        samples = rng(12).uniform(0.0, 4.0, size=(300, 2))
        edges = [np.linspace(-0.5, 4.5, 11)] * 2
        grid = reconstruct_2d(samples, UniformNoise(0.0), L=10, edges=edges)
        hist = empirical_grid(samples, edges)
        assert np.allclose(grid.masses, hist.masses)

    def test_correlated_data_favors_joint_reconstruction(self):
        # band data: per-axis marginals miss the correlation entirely
        r = rng(13)
        n = 1024
        x2 = r.uniform(0.0, 8.0, size=n)
        clean = np.column_stack([x2 + r.uniform(0.0, 0.5, size=n), x2])
        noisy = clean + r.uniform(-1.0, 1.0, size=clean.shape)
        edges = [np.linspace(-3.0, 11.5, 21), np.linspace(-3.0, 11.0, 21)]
        truth = empirical_grid(
            np.column_stack([
                (t2 := rng(14).uniform(0.0, 8.0, size=200000))
                + rng(15).uniform(0.0, 0.5, size=200000), t2]), edges)
        joint = reconstruct_2d(noisy, UniformNoise(1.0), L=20, edges=edges)
        marginals = [reconstruct_1d(noisy[:, a], UniformNoise(1.0), L=20,
                                    edges=edges[a]) for a in range(2)]
        product = np.outer(marginals[0].masses, marginals[1].masses)
        err_joint = np.abs(joint.masses - truth.masses).sum()
        err_product = np.abs(product - truth.masses).sum()
        assert err_joint < err_product

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            reconstruct_2d(np.zeros((4, 3)), UniformNoise(1.0))


class TestDensityGrid:
    def test_masses_validated(self):
        with pytest.raises(ValueError):
            DensityGrid([np.linspace(0, 1, 3)], np.array([0.7, 0.7]))

    def test_sampling_respects_cells(self):
        edges = np.linspace(0.0, 2.0, 3)
        grid = DensityGrid([edges], np.array([1.0, 0.0]))
        pts = grid.sample(200, rng(16))
        assert np.all(pts < 1.0)

    def test_csv_rows(self):
        grid = DensityGrid([np.linspace(0, 1, 3), np.linspace(0, 1, 3)],
                           np.full((2, 2), 0.25))
        rows = grid.to_rows()
        assert len(rows) == 4 and rows[0] == (0, 0, 0.25)


class TestTrainBaseline:
    def test_tiny_noise_succeeds(self):
        tset = generate_set2(64, rng(17))
        method = BaselineMethod("uniform", 1.0 / GRID)
        records = train_baseline(tset, method, rng(18), reps=3)
        assert all(r.success for r in records)

    def test_huge_noise_fails_where_quantum_succeeds(self):
        from qperc.noise import parse_generator
        from qperc.perceptron import train_quantum
        tset = generate_set2(64, rng(19))
        delta = 64.0
        records = train_baseline(tset, BaselineMethod("uniform", delta),
                                 rng(20), T=2000, reps=3)
        classical_rate = np.mean([r.success for r in records])
        _, qrecord, _ = train_quantum(tset, parse_generator(f"R0:delta={delta}"),
                                      alice_rng=rng(21), bob_rng=rng(22))
        assert qrecord.success
        assert classical_rate < 1.0

    def test_normal_and_uniform_comparable_apis(self):
        tset = generate_set2(32, rng(23))
        for kind in ("uniform", "normal"):
            records = train_baseline(tset, BaselineMethod(kind, 0.01),
                                     rng(24), reps=2)
            assert len(records) == 2

    def test_reconstruction_methods_run(self):
        tset = generate_set3(64, rng(25))
        for kind in ("recon1d", "recon2d"):
            records = train_baseline(tset, BaselineMethod(kind, 0.25,
                                                          grid_size=12),
                                     rng(26), T=3000, reps=2)
            assert len(records) == 2


class TestEstimators:
    def test_baseline_estimator(self):
        tset = generate_set2(64, rng(27))
        model = RandomizedBaselinePerceptron(method="uniform", delta=0.001,
                                             random_state=1)
        model.fit(tset.X, tset.labels)
        assert np.array_equal(model.predict(tset.X), tset.labels)

    def test_density_estimator_1d(self):
        samples = rng(28).normal(2.0, 0.5, size=(800, 1))
        est = NoisyDensityEstimator(noise="uniform", delta=0.2, grid_size=15)
        est.fit(samples)
        assert est.grid_.masses.shape == (15,)
        pts = est.sample(50, random_state=0)
        assert pts.shape == (50, 1)

    def test_density_estimator_2d(self):
        samples = rng(29).normal(2.0, 0.5, size=(400, 2))
        est = NoisyDensityEstimator(noise="uniform", delta=0.2, grid_size=10)
        est.fit(samples)
        assert est.grid_.masses.shape == (10, 10)

    def test_rejects_high_dimensions(self):
        with pytest.raises(ValueError):
            NoisyDensityEstimator().fit(np.zeros((10, 3)))
