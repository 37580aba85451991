import gzip
import struct

import numpy as np
import pytest

from conftest import _pair
from lmul_lab.nn.idx import IMAGES_MAGIC, LABELS_MAGIC, IdxFormatError, load_idx, read_idx, write_idx


@pytest.fixture
def fixture_files(tmp_path):
    rng = np.random.default_rng(0)
    images = rng.integers(0, 256, (4, 28, 28), dtype=np.uint8)
    labels = np.array([3, 1, 4, 1], dtype=np.uint8)
    write_idx(tmp_path / "img", images)
    write_idx(tmp_path / "lab.gz", labels)
    return tmp_path / "img", tmp_path / "lab.gz", images, labels


def test_four_image_fixture(fixture_files):
    ip, lp, images, labels = fixture_files
    ds = load_idx(ip, lp)
    assert len(ds) == 4 and ds.n_features == 784
    assert ds.images.dtype == np.float32
    assert np.array_equal(ds.images, images.reshape(4, -1).astype(np.float32) / np.float32(255))
    assert ds.images.min() >= 0 and ds.images.max() <= 1
    assert ds.labels.tolist() == [3, 1, 4, 1]


def test_header_bytes(fixture_files):
    ip, lp, *_ = fixture_files
    raw = ip.read_bytes()
    assert struct.unpack(">IIII", raw[:16]) == (IMAGES_MAGIC, 4, 28, 28)
    assert struct.unpack(">II", gzip.decompress(lp.read_bytes())[:8]) == (LABELS_MAGIC, 4)


def test_wrong_magic(fixture_files):
    ip, lp, *_ = fixture_files
    with pytest.raises(IdxFormatError, match="magic"):
        load_idx(ip, ip)  # image file where labels are expected
    with pytest.raises(IdxFormatError, match="magic"):
        read_idx(lp, IMAGES_MAGIC)


def test_truncated(tmp_path, fixture_files):
    ip, *_ = fixture_files
    bad = tmp_path / "short"
    bad.write_bytes(ip.read_bytes()[:-1])
    with pytest.raises(IdxFormatError, match="truncated"):
        read_idx(bad)
    bad.write_bytes(ip.read_bytes()[:6])
    with pytest.raises(IdxFormatError, match="truncated"):
        read_idx(bad)
    bad.write_bytes(ip.read_bytes() + b"\0")
    with pytest.raises(IdxFormatError, match="trailing"):
        read_idx(bad)


def test_count_mismatch(tmp_path, fixture_files):
    ip, *_ = fixture_files
    write_idx(tmp_path / "three", np.array([1, 2, 3], dtype=np.uint8))
    with pytest.raises(IdxFormatError, match="count mismatch"):
        load_idx(ip, tmp_path / "three")


@pytest.mark.parametrize("dtype", [np.uint8, np.int8, np.int16, np.int32, np.float32, np.float64])
def test_round_trip_dtypes(tmp_path, dtype):
    a = (np.arange(24).reshape(2, 3, 4) - 5).astype(dtype)
    write_idx(tmp_path / "a.idx", a)
    assert np.array_equal(read_idx(tmp_path / "a.idx"), a)


def test_bundled_subset(mnist_train, mnist_test):
    assert (len(mnist_train), len(mnist_test)) == (4000, 1000)
    assert mnist_test.n_features == 784
    assert np.bincount(mnist_test.labels).tolist() == [100] * 10
    assert np.bincount(mnist_train.labels).tolist() == [400] * 10


def test_standard_t10k(full_mnist_dir):
    ds = load_idx(*_pair(full_mnist_dir, "test"))
    assert len(ds) == 10_000 and ds.n_features == 784
    raw = read_idx(_pair(full_mnist_dir, "test")[0], IMAGES_MAGIC)
    assert raw.shape == (10_000, 28, 28)
