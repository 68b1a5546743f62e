import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedqp.data import (
    ClientPartition,
    PartitionSpec,
    SyntheticSpec,
    class_means,
    generate,
    heterogeneity_report,
    load_dataset_csv,
    load_partition,
    partition,
    save_partition,
    train_test_split,
)
from fedqp.rng import RandomSource

from oracles import total_variation

BALANCED_10C = np.repeat(np.arange(10), 1000)


class TestGenerate:
    def test_near_zero_noise_collapses_to_class_means(self):
        spec = SyntheticSpec(3, 4, 10, class_separation=2.0, noise_std=1e-12)
        X, y = generate(spec, RandomSource(0, "gen"))
        means = class_means(spec)
        assert np.allclose(X, means[y], atol=1e-9)

    def test_label_histogram_exact(self):
        spec = SyntheticSpec(4, 6, 25, class_separation=1.0, noise_std=0.5)
        _, y = generate(spec, RandomSource(1, "gen"))
        assert np.bincount(y).tolist() == [25, 25, 25, 25]

    def test_deterministic(self):
        spec = SyntheticSpec(3, 5, 20, class_separation=3.0, noise_std=1.0)
        X1, y1 = generate(spec, RandomSource(9, "gen"))
        X2, y2 = generate(spec, RandomSource(9, "gen"))
        assert np.array_equal(X1, X2) and np.array_equal(y1, y2)

    def test_means_pairwise_separation_exact(self):
        spec = SyntheticSpec(5, 8, 1, class_separation=3.5, noise_std=1.0)
        means = class_means(spec)
        for i in range(5):
            for j in range(i + 1, 5):
                assert np.linalg.norm(means[i] - means[j]) == pytest.approx(3.5, rel=1e-12)

    def test_spec_validation(self):
        with pytest.raises(ValueError, match="input_dim"):
            SyntheticSpec(10, 4, 5, class_separation=1.0, noise_std=1.0)
        with pytest.raises(ValueError):
            SyntheticSpec(1, 4, 5, class_separation=1.0, noise_std=1.0)
        with pytest.raises(ValueError):
            SyntheticSpec(2, 4, 5, class_separation=0.0, noise_std=1.0)
        with pytest.raises(ValueError):
            SyntheticSpec(2, 4, 5, class_separation=1.0, noise_std=0.0)


def assert_true_partition(part: ClientPartition, n: int):
    merged = np.sort(np.concatenate(part.assignments))
    assert np.array_equal(merged, np.arange(n))
    assert all(size >= 1 for size in part.client_sizes)


class TestPartition:
    def test_iid_exact_division(self):
        labels = np.zeros(100, dtype=int)
        labels[50:] = 1
        part = partition(labels, PartitionSpec(10, "iid"), RandomSource(0, "p"))
        assert part.client_sizes == (10,) * 10
        assert_true_partition(part, 100)

    def test_iid_remainder_spread_one_per_client(self):
        part = partition(np.zeros(23, dtype=int), PartitionSpec(5, "iid"), RandomSource(0, "p"))
        assert sorted(part.client_sizes, reverse=True) == [5, 5, 5, 4, 4]

    def test_dirichlet_large_beta_near_uniform(self):
        # 10 clients x ~1000 samples keeps empirical class fractions tight
        worst = 0.0
        for seed in range(10):
            part = partition(
                BALANCED_10C, PartitionSpec(10, "dirichlet", 1000.0), RandomSource(seed, "p")
            )
            rep = heterogeneity_report(part, BALANCED_10C)
            dist = rep.client_histograms / rep.client_histograms.sum(axis=1, keepdims=True)
            worst = max(worst, float(np.abs(dist - 0.1).max()))
        assert worst < 0.05

    @pytest.mark.parametrize("mode,beta", [("iid", 1.0), ("dirichlet", 0.1),
                                           ("dirichlet", 0.5), ("dirichlet", 1.0),
                                           ("dirichlet", 1000.0)])
    def test_true_partition_across_modes_and_seeds(self, mode, beta):
        labels = np.repeat(np.arange(10), 50)
        for seed in range(5):
            part = partition(labels, PartitionSpec(20, mode, beta), RandomSource(seed, "p"))
            assert_true_partition(part, 500)

    def test_skewed_dirichlet_repairs_empty_clients(self):
        labels = np.repeat(np.arange(3), 40)
        for seed in range(10):
            part = partition(labels, PartitionSpec(60, "dirichlet", 0.05), RandomSource(seed, "p"))
            assert_true_partition(part, 120)

    def test_deterministic(self):
        labels = np.repeat(np.arange(5), 40)
        spec = PartitionSpec(7, "dirichlet", 0.3)
        a = partition(labels, spec, RandomSource(4, "p"))
        b = partition(labels, spec, RandomSource(4, "p"))
        assert all(np.array_equal(x, y) for x, y in zip(a.assignments, b.assignments))

    def test_fewer_samples_than_clients_rejected(self):
        with pytest.raises(ValueError, match="partition"):
            partition(np.zeros(3, dtype=int), PartitionSpec(5, "iid"), RandomSource(0, "p"))

    def test_monotonic_heterogeneity_in_beta(self):
        labels = np.repeat(np.arange(10), 500)
        means = {}
        for beta in (0.1, 1.0, 1000.0):
            divs = []
            for seed in range(10):
                part = partition(
                    labels, PartitionSpec(20, "dirichlet", beta), RandomSource(seed, "p")
                )
                divs.append(heterogeneity_report(part, labels).divergence)
            means[beta] = float(np.mean(divs))
        assert means[0.1] > means[1.0] > means[1000.0]

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000), st.sampled_from([0.1, 0.5, 1.0, 1000.0]))
    def test_partition_property(self, seed, beta):
        labels = np.repeat(np.arange(4), 30)
        part = partition(labels, PartitionSpec(9, "dirichlet", beta), RandomSource(seed, "p"))
        assert_true_partition(part, 120)

    def test_spec_validation(self):
        with pytest.raises(ValueError):
            PartitionSpec(0, "iid")
        with pytest.raises(ValueError):
            PartitionSpec(5, "random")
        with pytest.raises(ValueError):
            PartitionSpec(5, "dirichlet", beta=0.0)


class TestHeterogeneityReport:
    def test_iid_balanced_near_zero(self):
        part = partition(BALANCED_10C, PartitionSpec(10, "iid"), RandomSource(2, "p"))
        rep = heterogeneity_report(part, BALANCED_10C)
        assert rep.divergence < 0.05

    def test_one_class_per_client_analytic(self):
        labels = np.repeat(np.arange(5), 100)
        assignments = tuple(np.flatnonzero(labels == c) for c in range(5))
        rep = heterogeneity_report(ClientPartition(assignments), labels)
        assert rep.divergence == pytest.approx((5 - 1) / 5, abs=1e-12)

    def test_single_client_zero(self):
        labels = np.repeat(np.arange(3), 10)
        part = ClientPartition((np.arange(30),))
        assert heterogeneity_report(part, labels).divergence == 0.0

    def test_histograms_count_labels(self):
        labels = np.array([0, 0, 1, 2, 2, 2])
        part = ClientPartition((np.array([0, 2]), np.array([1, 3, 4, 5])))
        rep = heterogeneity_report(part, labels)
        assert rep.client_histograms.tolist() == [[1, 1, 0], [1, 0, 3]]

    def test_matches_independent_tv_oracle(self):
        labels = np.repeat(np.arange(4), 25)
        part = partition(labels, PartitionSpec(5, "dirichlet", 0.4), RandomSource(8, "p"))
        rep = heterogeneity_report(part, labels)
        global_dist = np.bincount(labels) / labels.size
        tvs = []
        for idx in part.assignments:
            hist = np.bincount(labels[idx], minlength=4)
            tvs.append(total_variation(hist / hist.sum(), global_dist))
        assert rep.divergence == pytest.approx(float(np.mean(tvs)), abs=1e-12)


class TestSplitAndFiles:
    def test_train_test_split_sizes_and_disjoint(self):
        X = np.arange(200, dtype=float).reshape(100, 2)
        y = np.arange(100) % 4
        train, test = train_test_split(X, y, 0.1, RandomSource(0, "s"))
        assert len(test) == 10 and len(train) == 90
        seen = np.vstack([train.features, test.features])
        assert np.array_equal(np.sort(seen[:, 0]), X[:, 0])

    def test_split_deterministic(self):
        X = np.random.default_rng(0).normal(size=(50, 3))
        y = np.arange(50) % 2
        a_train, a_test = train_test_split(X, y, 0.2, RandomSource(1, "s"))
        b_train, b_test = train_test_split(X, y, 0.2, RandomSource(1, "s"))
        assert np.array_equal(a_train.features, b_train.features)
        assert np.array_equal(a_test.labels, b_test.labels)

    def test_dataset_csv_round_trip(self, tmp_path):
        path = tmp_path / "data.csv"
        path.write_text(
            "# x0,x1,label\n"
            "1.5,-2.25,0\n"
            "0.0,3.5,2\n",
            encoding="utf-8",
        )
        X, y = load_dataset_csv(path)
        assert X.tolist() == [[1.5, -2.25], [0.0, 3.5]]
        assert y.tolist() == [0, 2]

    def test_dataset_csv_rejects_fractional_labels(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("1.0,0.5\n", encoding="utf-8")
        with pytest.raises(ValueError, match="integer"):
            load_dataset_csv(path)

    def test_partition_export_round_trip(self, tmp_path):
        labels = np.repeat(np.arange(3), 20)
        part = partition(labels, PartitionSpec(4, "dirichlet", 0.5), RandomSource(3, "p"))
        path = tmp_path / "partition.txt"
        save_partition(path, part)
        loaded = load_partition(path)
        assert all(
            np.array_equal(a, b) for a, b in zip(part.assignments, loaded.assignments)
        )
