import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedimb.dataset import make_synthetic_blobs
from fedimb.errors import EmptyShardError, InfeasiblePartitionError, InvalidParameterError
from fedimb.partition import (
    ClientShards,
    PartitionSpec,
    client_label_distribution,
    dirichlet_partition,
    homogeneous_partition,
    largest_remainder,
    read_manifest,
    shard_class_matrix,
    sorted_mean_distribution,
    write_manifest,
)


def assert_valid(shards, n):
    allidx = np.concatenate([s for s in shards.shards if len(s)])
    assert allidx.size == n
    assert np.array_equal(np.sort(allidx), np.arange(n))


@pytest.fixture(scope="module")
def balanced():
    return make_synthetic_blobs(100, 10, 2, 0.0, seed=0)


def test_spec_validation():
    with pytest.raises(InvalidParameterError):
        PartitionSpec(0, 1.0)
    with pytest.raises(InvalidParameterError, match="alpha"):
        PartitionSpec(3, -1.0)
    with pytest.raises(InvalidParameterError):
        PartitionSpec(3, float("inf"))
    with pytest.raises(InvalidParameterError):
        PartitionSpec(3, 1.0, scheme="bogus")


@pytest.mark.parametrize("scheme", ["client", "class"])
def test_huge_alpha_is_homogeneous(balanced, scheme):
    shards = dirichlet_partition(balanced, PartitionSpec(10, 1e15, seed=4, scheme=scheme))
    for c in range(10):
        p = client_label_distribution(shards, balanced, c)
        assert np.max(np.abs(p - 0.1)) <= 0.01


@pytest.mark.parametrize("scheme", ["client", "class"])
def test_single_client_gets_everything(balanced, scheme):
    shards = dirichlet_partition(balanced, PartitionSpec(1, 0.05, seed=1, scheme=scheme))
    np.testing.assert_array_equal(shards.shards[0], np.arange(len(balanced)))


@pytest.mark.parametrize("scheme", ["client", "class"])
def test_tiny_alpha_one_class_per_client(scheme):
    ds = make_synthetic_blobs(500, 10, 2, 0.0, seed=0)
    first = np.mean(
        [sorted_mean_distribution(dirichlet_partition(ds, PartitionSpec(100, 0.01, s, scheme)), ds)[0] for s in range(5)]
    )
    assert first > 0.9


def test_client_scheme_equal_sizes(balanced):
    shards = dirichlet_partition(balanced, PartitionSpec(7, 0.1, seed=2))
    sizes = shards.sizes()
    assert sizes.max() - sizes.min() <= 1


def test_too_many_clients(balanced):
    with pytest.raises(InfeasiblePartitionError):
        dirichlet_partition(balanced, PartitionSpec(len(balanced) + 1, 1.0))


def test_deterministic(balanced):
    a = dirichlet_partition(balanced, PartitionSpec(13, 0.3, seed=9))
    b = dirichlet_partition(balanced, PartitionSpec(13, 0.3, seed=9))
    assert all(x.tobytes() == y.tobytes() for x, y in zip(a.shards, b.shards))


@settings(max_examples=200, deadline=None)
@given(
    alpha=st.floats(1e-3, 1e3),
    n_clients=st.integers(1, 60),
    seed=st.integers(0, 2**32 - 1),
    scheme=st.sampled_from(["client", "class"]),
)
def test_partition_disjoint_and_covering(balanced, alpha, n_clients, seed, scheme):
    shards = dirichlet_partition(balanced, PartitionSpec(n_clients, alpha, seed, scheme))
    assert len(shards) == n_clients
    assert_valid(shards, len(balanced))


def test_largest_remainder_sums_and_ties():
    assert largest_remainder(np.array([0.5, 0.5]), 3).tolist() == [2, 1]
    w = np.random.default_rng(0).dirichlet(np.ones(17))
    assert largest_remainder(w, 1001).sum() == 1001


def test_homogeneous_exact(balanced):
    shards = homogeneous_partition(balanced, 10, seed=0)
    counts = shard_class_matrix(shards, balanced)
    assert (counts == 10).all()
    np.testing.assert_allclose(client_label_distribution(shards, balanced, 3), np.full(10, 0.1))


def test_homogeneous_single_client(balanced):
    shards = homogeneous_partition(balanced, 1, seed=0)
    np.testing.assert_array_equal(shards.shards[0], np.arange(len(balanced)))


def test_homogeneous_remainder_round_robin(tiny_labels):
    ds = tiny_labels([0] * 101 + [1] * 100, 2)
    counts = shard_class_matrix(homogeneous_partition(ds, 10, seed=5), ds)
    assert sorted(counts[:, 0].tolist()) == [10] * 9 + [11]
    assert (counts[:, 1] == 10).all()


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 40), min_size=2, max_size=6), st.integers(1, 12), st.integers(0, 1000))
def test_homogeneous_within_one(class_sizes, n_clients, seed):
    from fedimb.dataset import LabeledDataset

    labels = np.repeat(np.arange(len(class_sizes)), class_sizes)
    ds = LabeledDataset(np.zeros((labels.size, 2)), labels, len(class_sizes))
    shards = homogeneous_partition(ds, n_clients, seed)
    counts = shard_class_matrix(shards, ds)
    assert (counts.max(axis=0) - counts.min(axis=0) <= 1).all()
    sizes = shards.sizes()
    assert sizes.max() - sizes.min() <= 1
    assert_valid(shards, labels.size) if labels.size else None


def test_client_distribution_direct(tiny_labels):
    ds = tiny_labels([1, 1, 3, 0], 4)
    shards = ClientShards([np.array([0, 1, 2]), np.array([3]), np.array([], dtype=np.int64)], 4)
    np.testing.assert_allclose(client_label_distribution(shards, ds, 0), [0, 2 / 3, 0, 1 / 3])
    with pytest.raises(EmptyShardError):
        client_label_distribution(shards, ds, 2)


def test_sorted_mean_two_clients(tiny_labels):
    ds = tiny_labels([0] * 2 + [1] * 8 + [0] * 9 + [1] * 1, 2)
    shards = ClientShards([np.arange(10), np.arange(10, 20)], 2)
    np.testing.assert_allclose(sorted_mean_distribution(shards, ds), [0.85, 0.15], atol=1e-12)


def test_sorted_mean_homogeneous(balanced):
    np.testing.assert_allclose(sorted_mean_distribution(homogeneous_partition(balanced, 5, 0), balanced), 0.1)


def test_sorted_mean_skips_empty_and_errors_when_all_empty(tiny_labels):
    ds = tiny_labels([0, 1], 2)
    shards = ClientShards([np.array([0, 1]), np.array([], dtype=np.int64)], 2)
    np.testing.assert_allclose(sorted_mean_distribution(shards, ds), [0.5, 0.5])
    with pytest.raises(EmptyShardError):
        sorted_mean_distribution(ClientShards([np.array([], dtype=np.int64)], 2), ds)


@settings(max_examples=30, deadline=None)
@given(st.floats(1e-3, 1e3), st.integers(1, 50), st.integers(0, 10_000))
def test_sorted_mean_non_increasing(balanced, alpha, n, seed):
    p = sorted_mean_distribution(dirichlet_partition(balanced, PartitionSpec(n, alpha, seed)), balanced)
    assert np.all(np.diff(p) <= 1e-12)
    assert abs(p.sum() - 1) <= 1e-9


@pytest.mark.slow
def test_skew_monotone_in_alpha():
    ds = make_synthetic_blobs(500, 10, 2, 0.0, seed=0)
    firsts = []
    for alpha in (0.01, 0.1, 1.0, 1e15):
        firsts.append(
            np.mean([sorted_mean_distribution(dirichlet_partition(ds, PartitionSpec(100, alpha, s)), ds)[0]
                     for s in range(50)])
        )
    assert all(a >= b for a, b in zip(firsts, firsts[1:])), firsts


def test_manifest_round_trip(tmp_path, balanced):
    shards = dirichlet_partition(balanced, PartitionSpec(6, 0.5, seed=3))
    path = tmp_path / "manifest.csv"
    write_manifest(shards, path)
    text = path.read_bytes()
    assert text.startswith(b"client_id,sample_index\n") and b"\r" not in text
    back = read_manifest(path, n_clients=6, num_classes=10)
    assert all(np.array_equal(a, b) for a, b in zip(shards.shards, back.shards))
