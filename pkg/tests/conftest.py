import os
import struct
from pathlib import Path

import numpy as np
import pytest

from elmkit import synth_gaussian
from elmkit.dataio import IDX_IMAGE_MAGIC, IDX_LABEL_MAGIC, write_idx_images, write_idx_labels


def pytest_configure(config):
    config.addinivalue_line("markers", "mnist: needs the real MNIST files (slow)")


def mnist_dir() -> Path | None:
    """Real MNIST location: $ELMKIT_MNIST_DIR, else <repo>/data/mnist."""
    env = os.environ.get("ELMKIT_MNIST_DIR")
    candidates = [Path(env)] if env else []
    candidates.append(Path(__file__).resolve().parent.parent / "data" / "mnist")
    for d in candidates:
        if any(d.glob("train-images-idx3-ubyte*")):
            return d
    return None


@pytest.fixture(scope="session")
def mnist_data_dir():
    d = mnist_dir()
    if d is None:
        pytest.skip("MNIST files not available (set ELMKIT_MNIST_DIR or run `elmkit fetch-data`)")
    return d


# Byte fixtures from the IDX format definition: 2 images of 2x2 pixels 0..7,
# and the labels {5, 0, 9}.
IMAGE_FIXTURE = struct.pack(">IIII", IDX_IMAGE_MAGIC, 2, 2, 2) + bytes(range(8))
IMAGE_FIXTURE_MATRIX = np.array([[0.0, 4.0], [1.0, 5.0], [2.0, 6.0], [3.0, 7.0]])
LABEL_FIXTURE = struct.pack(">II", IDX_LABEL_MAGIC, 3) + bytes([5, 0, 9])


@pytest.fixture
def idx_fixture_dir(tmp_path):
    (tmp_path / "images.idx3").write_bytes(IMAGE_FIXTURE)
    (tmp_path / "labels.idx1").write_bytes(LABEL_FIXTURE)
    return tmp_path


def make_gaussian_task(num_classes=10, num_features=16, k_train=600, k_test=400, radius=4.0, seed=5):
    """Separable-but-noisy Gaussian blobs for harness and estimator tests."""
    rng = np.random.default_rng(seed)
    means = rng.normal(0, 1, size=(num_classes, num_features))
    means = radius * means / np.linalg.norm(means, axis=1, keepdims=True)
    priors = [1.0 / num_classes] * num_classes
    train = synth_gaussian(means, np.eye(num_features), priors, k_train, seed=11)
    test = synth_gaussian(means, np.eye(num_features), priors, k_test, seed=12)
    return train, test


def write_idx_dataset(dirpath: Path, train, test, rows: int, cols: int):
    """Store two Datasets in the MNIST file layout (byte-quantized features)."""
    lo = min(train.x.min(), test.x.min())
    hi = max(train.x.max(), test.x.max())

    def to_bytes(x):
        return np.rint(255 * (x - lo) / (hi - lo))

    write_idx_images(dirpath / "train-images-idx3-ubyte", to_bytes(train.x), rows=rows, cols=cols)
    write_idx_labels(dirpath / "train-labels-idx1-ubyte", train.labels)
    write_idx_images(dirpath / "t10k-images-idx3-ubyte", to_bytes(test.x), rows=rows, cols=cols)
    write_idx_labels(dirpath / "t10k-labels-idx1-ubyte", test.labels)


@pytest.fixture(scope="session")
def toy_idx_dir(tmp_path_factory):
    """A 10-class, 16-feature dataset in MNIST file layout."""
    d = tmp_path_factory.mktemp("toyidx")
    train, test = make_gaussian_task()
    write_idx_dataset(d, train, test, rows=4, cols=4)
    return d
