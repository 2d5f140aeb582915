import os

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fedimb.dataset import class_counts, load_cifar10_binary, make_synthetic_blobs
from fedimb.errors import CorruptRecordError, InvalidParameterError, MalformedFileError


def write_records(path, records):
    with open(path, "wb") as fh:
        for label, pixels in records:
            fh.write(bytes([label]))
            fh.write(bytes(pixels))


def test_single_max_pixel_record(tmp_path):
    p = tmp_path / "b.bin"
    write_records(p, [(7, [255] * 3072)])
    ds = load_cifar10_binary([p])
    assert len(ds) == 1 and ds.dim == 3072 and ds.num_classes == 10
    assert ds.labels.tolist() == [7]
    assert np.all(ds.features == 1.0)


def test_truncated_file_is_malformed(tmp_path):
    p = tmp_path / "b.bin"
    p.write_bytes(bytes(3072))
    with pytest.raises(MalformedFileError):
        load_cifar10_binary([p])


def test_bad_label_names_record(tmp_path):
    p = tmp_path / "b.bin"
    write_records(p, [(1, [0] * 3072), (12, [0] * 3072)])
    with pytest.raises(CorruptRecordError, match="record 1") as info:
        load_cifar10_binary([p])
    assert info.value.record_index == 1


def test_files_concatenate_in_order(tmp_path):
    a, b = tmp_path / "a.bin", tmp_path / "b.bin"
    write_records(a, [(3, [0] * 3072)])
    write_records(b, [(5, [10] * 3072), (0, [20] * 3072)])
    ds = load_cifar10_binary([b, a])
    assert ds.labels.tolist() == [5, 0, 3]


@settings(max_examples=25, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 9), st.binary(min_size=3072, max_size=3072)), min_size=1, max_size=4))
def test_loader_round_trip(tmp_path_factory, records):
    p = tmp_path_factory.mktemp("cifar") / "data.bin"
    write_records(p, [(lab, list(px)) for lab, px in records])
    ds = load_cifar10_binary([p])
    assert ds.labels.tolist() == [lab for lab, _ in records]
    expected = np.array([list(px) for _, px in records], dtype=np.float64) / 255.0
    assert np.max(np.abs(ds.features - expected)) <= 1e-9


CIFAR_DIR = os.environ.get("CIFAR10_DIR")


@pytest.mark.skipif(not CIFAR_DIR, reason="set CIFAR10_DIR to the cifar-10-batches-bin directory")
def test_real_cifar_training_batches_are_balanced():
    paths = [os.path.join(CIFAR_DIR, f"data_batch_{i}.bin") for i in range(1, 6)]
    ds = load_cifar10_binary(paths)
    assert len(ds) == 50_000
    assert class_counts(ds).tolist() == [5000] * 10


def test_blobs_zero_noise_sit_on_centers():
    ds = make_synthetic_blobs(1, 2, 4, 0.0, seed=0)
    assert len(ds) == 2
    assert not np.array_equal(ds.features[0], ds.features[1])
    again = make_synthetic_blobs(1, 2, 4, 0.0, seed=99)
    np.testing.assert_array_equal(ds.features, again.features)


def test_blobs_balanced_and_in_range():
    ds = make_synthetic_blobs(100, 10, 16, 0.1, seed=1)
    assert len(ds) == 1000
    assert class_counts(ds).tolist() == [100] * 10
    assert ds.features.min() >= 0.0 and ds.features.max() <= 1.0


def test_blobs_bitwise_reproducible():
    a = make_synthetic_blobs(20, 5, 8, 0.3, seed=42)
    b = make_synthetic_blobs(20, 5, 8, 0.3, seed=42)
    assert a.features.tobytes() == b.features.tobytes()


def test_blob_centers_distinct_when_classes_exceed_dim():
    ds = make_synthetic_blobs(1, 10, 3, 0.0, seed=0)
    assert len({row.tobytes() for row in ds.features}) == 10


def test_negative_spread_rejected():
    with pytest.raises(InvalidParameterError):
        make_synthetic_blobs(1, 2, 2, -0.1, seed=0)


def test_class_counts_basic(tiny_labels):
    ds = tiny_labels([0, 0, 1, 2], 3)
    assert class_counts(ds, [0, 1, 2, 3]).tolist() == [2, 1, 1]
    assert class_counts(ds, []).tolist() == [0, 0, 0]


def test_class_counts_out_of_range(tiny_labels):
    ds = tiny_labels([0, 1], 2)
    with pytest.raises(IndexError, match="7"):
        class_counts(ds, [0, 7])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.integers(0, 4), min_size=1, max_size=60), st.data())
def test_class_counts_additive_over_partition(labels, data):
    from fedimb.dataset import LabeledDataset

    ds = LabeledDataset(np.zeros((len(labels), 2)), np.array(labels), 5)
    owner = data.draw(st.lists(st.integers(0, 3), min_size=len(labels), max_size=len(labels)))
    owner = np.array(owner)
    parts = [class_counts(ds, np.flatnonzero(owner == g)) for g in range(4)]
    np.testing.assert_array_equal(np.sum(parts, axis=0), class_counts(ds))
