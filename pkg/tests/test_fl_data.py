import numpy as np
import pytest

from fednetsim.errors import InvalidArgs, ValidationError
from fednetsim.fl import (
    IID,
    Dirichlet,
    Shards,
    make_synthetic_dataset,
    partition,
    train_eval_split,
)


class TestSyntheticDataset:
    def test_balanced_labels(self):
        ds = make_synthetic_dataset(seed=1, n=100, n_classes=2, dim=2, class_sep=5.0)
        assert len(ds) == 100
        counts = np.bincount(ds.labels)
        assert list(counts) == [50, 50]

    def test_deterministic(self):
        a = make_synthetic_dataset(seed=3, n=60, n_classes=3, dim=4, class_sep=2.0)
        b = make_synthetic_dataset(seed=3, n=60, n_classes=3, dim=4, class_sep=2.0)
        assert np.array_equal(a.features, b.features)
        assert np.array_equal(a.labels, b.labels)

    def test_uneven_counts_differ_by_at_most_one(self):
        ds = make_synthetic_dataset(seed=2, n=103, n_classes=4, dim=3, class_sep=1.0)
        counts = np.bincount(ds.labels)
        assert counts.max() - counts.min() <= 1

    def test_class_means_on_sphere(self):
        ds = make_synthetic_dataset(seed=5, n=4000, n_classes=2, dim=2, class_sep=5.0)
        for c in range(2):
            mean = ds.features[ds.labels == c].mean(axis=0)
            assert np.linalg.norm(mean) == pytest.approx(5.0, abs=0.2)

    def test_invalid_args(self):
        with pytest.raises(InvalidArgs):
            make_synthetic_dataset(seed=1, n=1, n_classes=2, dim=2, class_sep=1.0)
        with pytest.raises(InvalidArgs):
            make_synthetic_dataset(seed=1, n=10, n_classes=2, dim=1, class_sep=1.0)

    def test_split_sizes(self):
        ds = make_synthetic_dataset(seed=1, n=100, n_classes=2, dim=2, class_sep=5.0)
        train, held = train_eval_split(ds, 0.2)
        assert len(train) == 80 and len(held) == 20
        assert train.n_classes == held.n_classes == 2


def assert_disjoint_cover(assignments, n):
    merged = np.sort(np.concatenate(list(assignments.values())))
    assert np.array_equal(merged, np.arange(n))


class TestPartition:
    def test_iid_even_split(self):
        ds = make_synthetic_dataset(seed=1, n=10, n_classes=2, dim=2, class_sep=1.0)
        parts = partition(ds, IID(), 2, seed=0)
        assert sorted(len(v) for v in parts.values()) == [5, 5]
        assert_disjoint_cover(parts, 10)

    def test_iid_sizes_differ_by_at_most_one(self):
        ds = make_synthetic_dataset(seed=1, n=103, n_classes=2, dim=2, class_sep=1.0)
        parts = partition(ds, IID(), 4, seed=0)
        sizes = [len(v) for v in parts.values()]
        assert max(sizes) - min(sizes) <= 1
        assert_disjoint_cover(parts, 103)

    def test_shards_label_bound(self):
        ds = make_synthetic_dataset(seed=2, n=600, n_classes=10, dim=2, class_sep=1.0)
        for seed in range(5):
            parts = partition(ds, Shards(2), 15, seed=seed)
            assert_disjoint_cover(parts, 600)
            for idx in parts.values():
                assert len(np.unique(ds.labels[idx])) <= 2
                assert len(idx) >= 1

    def test_shards_all_classes_degenerate_bound(self):
        ds = make_synthetic_dataset(seed=2, n=40, n_classes=4, dim=2, class_sep=1.0)
        parts = partition(ds, Shards(4), 2, seed=1)
        assert_disjoint_cover(parts, 40)
        for idx in parts.values():
            assert len(np.unique(ds.labels[idx])) <= 4

    def test_shards_divisibility_enforced(self):
        ds = make_synthetic_dataset(seed=2, n=60, n_classes=4, dim=2, class_sep=1.0)
        with pytest.raises(ValidationError):
            partition(ds, Shards(3), 3, seed=0)  # 9 shards not divisible by 4 classes
        with pytest.raises(ValidationError):
            partition(ds, Shards(5), 4, seed=0)  # classes_per_client > n_classes

    def test_dirichlet_disjoint_cover_and_nonempty(self):
        ds = make_synthetic_dataset(seed=3, n=500, n_classes=5, dim=2, class_sep=1.0)
        for seed in range(10):
            for alpha in (0.1, 1.0, 100.0):
                parts = partition(ds, Dirichlet(alpha), 8, seed=seed)
                assert_disjoint_cover(parts, 500)
                assert all(len(v) >= 1 for v in parts.values())

    def test_dirichlet_large_alpha_near_uniform(self):
        # Dir(1000) concentrates at uniform: per-class proportions ~= 1/n_classes,
        # checked as a Monte Carlo mean over seeds
        ds = make_synthetic_dataset(seed=4, n=10000, n_classes=10, dim=2, class_sep=1.0)
        sums = np.zeros((5, 10))
        n_seeds = 30
        for seed in range(n_seeds):
            parts = partition(ds, Dirichlet(1000.0), 5, seed=seed)
            for client, idx in parts.items():
                counts = np.bincount(ds.labels[idx], minlength=10)
                sums[client] += counts / len(idx)
        mean_props = sums / n_seeds
        assert np.all(np.abs(mean_props - 0.1) <= 0.005)

    def test_dirichlet_expected_sizes_symmetric(self):
        ds = make_synthetic_dataset(seed=5, n=400, n_classes=4, dim=2, class_sep=1.0)
        totals = np.zeros(4)
        n_seeds = 200
        for seed in range(n_seeds):
            parts = partition(ds, Dirichlet(0.5), 4, seed=seed)
            for client, idx in parts.items():
                totals[client] += len(idx)
        means = totals / n_seeds
        assert np.all(np.abs(means - 100.0) / 100.0 <= 0.05)

    def test_too_many_clients_rejected(self):
        ds = make_synthetic_dataset(seed=1, n=10, n_classes=2, dim=2, class_sep=1.0)
        with pytest.raises(ValidationError):
            partition(ds, IID(), 11, seed=0)

    def test_deterministic(self):
        ds = make_synthetic_dataset(seed=1, n=200, n_classes=4, dim=2, class_sep=1.0)
        for spec in (IID(), Shards(2), Dirichlet(0.3)):
            a = partition(ds, spec, 4, seed=9)
            b = partition(ds, spec, 4, seed=9)
            assert all(np.array_equal(a[i], b[i]) for i in a)
