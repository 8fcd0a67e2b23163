"""Dataset ingestion: IDX (MNIST) files, CSV, preprocessing, synthetic data.

Feature matrices are (num_features x num_samples); sample k lives in column
k everywhere in this package.
"""

from __future__ import annotations

import csv
import gzip
import hashlib
import struct
import urllib.request
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .linalg import as_matrix, check_finite
from .seeding import make_rng

# IDX binary layout (big endian):
#   images: u32 magic 0x00000803 | u32 items | u32 rows | u32 cols | u8 pixels,
#           row-major within each image
#   labels: u32 magic 0x00000801 | u32 items | u8 labels
IDX_IMAGE_MAGIC = 0x00000803
IDX_LABEL_MAGIC = 0x00000801


class DataError(ValueError):
    """A dataset file could not be read or failed validation."""


class IdxFormatError(DataError):
    """Malformed IDX file; the message names the offending byte offset."""


@dataclass(frozen=True)
class Dataset:
    x: np.ndarray          # (num_features, num_samples)
    labels: np.ndarray     # (num_samples,)
    num_classes: int

    def __post_init__(self):
        object.__setattr__(self, "x", as_matrix(self.x, "features"))
        object.__setattr__(self, "labels", np.asarray(self.labels, dtype=np.int64).ravel())
        if self.labels.size != self.x.shape[1]:
            raise ValueError(f"{self.labels.size} labels for {self.x.shape[1]} samples")
        if self.labels.size and (self.labels.min() < 0 or self.labels.max() >= self.num_classes):
            raise ValueError(f"labels outside [0, {self.num_classes})")
        check_finite(self.x, "features")
        self.x.setflags(write=False)
        self.labels.setflags(write=False)

    @property
    def num_features(self) -> int:
        return self.x.shape[0]

    @property
    def num_samples(self) -> int:
        return self.x.shape[1]


def _read_bytes(path) -> bytes:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "rb") as f:
        return f.read()


def load_idx_images(path) -> np.ndarray:
    """Images as a (rows*cols x items) float64 matrix of raw 0..255 values."""
    blob = _read_bytes(path)
    if len(blob) < 16:
        raise IdxFormatError(f"{path}: header truncated at byte {len(blob)}, need 16")
    magic, items, rows, cols = struct.unpack_from(">IIII", blob)
    if magic != IDX_IMAGE_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{IDX_IMAGE_MAGIC:08x}")
    pixels = items * rows * cols
    if pixels > len(blob) - 16:
        raise IdxFormatError(
            f"{path}: truncated at byte {len(blob)}; header at byte 4 promises {pixels} pixel bytes"
        )
    if pixels < len(blob) - 16:
        raise IdxFormatError(f"{path}: {len(blob) - 16 - pixels} trailing bytes after byte {16 + pixels}")
    raw = np.frombuffer(blob, dtype=np.uint8, offset=16).reshape(items, rows * cols)
    return np.ascontiguousarray(raw.T, dtype=np.float64)


def load_idx_labels(path, max_label: int | None = None) -> np.ndarray:
    """Label vector; pass max_label=9 to enforce MNIST's digit range."""
    blob = _read_bytes(path)
    if len(blob) < 8:
        raise IdxFormatError(f"{path}: header truncated at byte {len(blob)}, need 8")
    magic, items = struct.unpack_from(">II", blob)
    if magic != IDX_LABEL_MAGIC:
        raise IdxFormatError(f"{path}: bad magic 0x{magic:08x} at byte 0, expected 0x{IDX_LABEL_MAGIC:08x}")
    if items != len(blob) - 8:
        raise IdxFormatError(
            f"{path}: {len(blob) - 8} label bytes after byte 8, header at byte 4 promises {items}"
        )
    labels = np.frombuffer(blob, dtype=np.uint8, offset=8).astype(np.int64)
    if max_label is not None and labels.size and labels.max() > max_label:
        bad = int(np.flatnonzero(labels > max_label)[0])
        raise IdxFormatError(f"{path}: label {labels[bad]} at byte {8 + bad} exceeds {max_label}")
    return labels


def write_idx_images(path, x: np.ndarray, rows: int, cols: int) -> None:
    """Inverse of load_idx_images, for fixtures; x must hold integers 0..255."""
    x = as_matrix(x, "images")
    if x.shape[0] != rows * cols:
        raise ValueError(f"{x.shape[0]} pixel rows but rows*cols = {rows * cols}")
    vals = np.rint(x).astype(np.int64)
    if (vals < 0).any() or (vals > 255).any():
        raise ValueError("pixel values must lie in [0, 255]")
    payload = np.ascontiguousarray(vals.T, dtype=np.uint8).tobytes()
    blob = struct.pack(">IIII", IDX_IMAGE_MAGIC, x.shape[1], rows, cols) + payload
    _write_bytes(path, blob)


def write_idx_labels(path, labels) -> None:
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if labels.size and ((labels < 0) | (labels > 255)).any():
        raise ValueError("labels must lie in [0, 255]")
    blob = struct.pack(">II", IDX_LABEL_MAGIC, labels.size) + labels.astype(np.uint8).tobytes()
    _write_bytes(path, blob)


def _write_bytes(path, blob: bytes) -> None:
    path = str(path)
    opener = gzip.open if path.endswith(".gz") else open
    with opener(path, "wb") as f:
        f.write(blob)


NORMALIZE_MODES = ("none", "scale01", "standardize")


def normalize(x: np.ndarray, mode: str = "none") -> np.ndarray:
    """Feature preprocessing applied per row (per feature).

    scale01 divides by 255 (byte images to [0, 1]); standardize centers and
    scales each feature, mapping zero-variance features to all zeros.
    """
    x = as_matrix(x, "x")
    if mode == "none":
        return x
    if mode == "scale01":
        return x / 255.0
    if mode == "standardize":
        mean = x.mean(axis=1, keepdims=True)
        std = x.std(axis=1, keepdims=True)
        out = np.zeros_like(x)
        np.divide(x - mean, std, out=out, where=std > 0)
        return out
    raise ValueError(f"unknown normalize mode {mode!r}, expected one of {NORMALIZE_MODES}")


def synth_gaussian(means, cov, priors, k: int, seed: int) -> Dataset:
    """Sample a shared-covariance Gaussian mixture, one class per mean.

    Class labels are drawn from the priors, then features from the class
    Gaussian via the Cholesky factor of cov. Fully determined by the seed.
    """
    means = np.atleast_2d(np.asarray(means, dtype=np.float64))
    n, num_features = means.shape
    cov = as_matrix(cov, "cov")
    if cov.shape != (num_features, num_features):
        raise ValueError(f"cov is {cov.shape}, means need {num_features}x{num_features}")
    priors = np.asarray(priors, dtype=np.float64).ravel()
    if priors.size != n or (priors <= 0).any() or abs(priors.sum() - 1.0) > 1e-9:
        raise ValueError("priors must be positive, one per class, and sum to 1")
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as e:
        raise ValueError("covariance must be symmetric positive definite") from e
    rng = make_rng(seed)
    labels = rng.choice(n, size=k, p=priors / priors.sum())
    noise = rng.standard_normal((k, num_features))
    x = means[labels] + noise @ chol.T
    return Dataset(x=np.ascontiguousarray(x.T), labels=labels.astype(np.int64), num_classes=n)


def load_csv_dataset(path) -> Dataset:
    """CSV with a header row; all columns but the last are features, the last
    is an integer class label."""
    with open(path, newline="") as f:
        reader = csv.reader(f)
        try:
            header = next(reader)
        except StopIteration:
            raise DataError(f"{path}: empty file") from None
        if len(header) < 2:
            raise DataError(f"{path}: need at least one feature column plus the label column")
        features, labels = [], []
        for lineno, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}:{lineno}: {len(row)} fields, header has {len(header)}")
            try:
                features.append([float(v) for v in row[:-1]])
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-numeric feature value") from None
            try:
                labels.append(int(row[-1]))
            except ValueError:
                raise DataError(f"{path}:{lineno}: non-integer label {row[-1]!r}") from None
    if not labels:
        raise DataError(f"{path}: no data rows")
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0:
        raise DataError(f"{path}: negative class label")
    x = np.ascontiguousarray(np.asarray(features, dtype=np.float64).T)
    return Dataset(x=check_finite(x, "features"), labels=labels, num_classes=int(labels.max()) + 1)


# --- MNIST fetching ----------------------------------------------------------

DEFAULT_MIRROR = "https://ossci-datasets.s3.amazonaws.com/mnist/"

MNIST_FILES = {
    "train_images": "train-images-idx3-ubyte.gz",
    "train_labels": "train-labels-idx1-ubyte.gz",
    "test_images": "t10k-images-idx3-ubyte.gz",
    "test_labels": "t10k-labels-idx1-ubyte.gz",
}

# SHA-256 of the canonical gzipped distribution files.
MNIST_SHA256 = {
    "train-images-idx3-ubyte.gz": "440fcabf73cc546fa21475e81ea370265605f56be210a4024d2ca8f203523609",
    "train-labels-idx1-ubyte.gz": "3552534a0a558bbed6aed32b30c495cca23d567ec52cac8be1a0730e8010255c",
    "t10k-images-idx3-ubyte.gz": "8d422c7b0a1c1c79245a5bcf07fe86e33eeafee792b84584aec276f5a2dbc4e6",
    "t10k-labels-idx1-ubyte.gz": "f7ae60f92e00ec6debd23a6088c31dbd2371eca3ffa0defaefb259924204aec6",
}


def _sha256(path: Path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def fetch_mnist(data_dir, mirror_url: str = DEFAULT_MIRROR, force: bool = False) -> dict[str, Path]:
    """Download the four MNIST files into data_dir, verifying checksums.

    Files already present with a good checksum are kept. Returns a mapping
    of logical name (train_images, ...) to local path.
    """
    data_dir = Path(data_dir)
    data_dir.mkdir(parents=True, exist_ok=True)
    if not mirror_url.endswith("/"):
        mirror_url += "/"
    out = {}
    for key, fname in MNIST_FILES.items():
        dest = data_dir / fname
        want = MNIST_SHA256[fname]
        if dest.exists() and not force and _sha256(dest) == want:
            out[key] = dest
            continue
        tmp = dest.with_suffix(dest.suffix + ".part")
        with urllib.request.urlopen(mirror_url + fname, timeout=120) as resp, open(tmp, "wb") as f:
            while True:
                chunk = resp.read(1 << 20)
                if not chunk:
                    break
                f.write(chunk)
        got = _sha256(tmp)
        if got != want:
            tmp.unlink()
            raise DataError(f"{fname}: checksum mismatch: got {got}, expected {want}")
        tmp.replace(dest)
        out[key] = dest
    return out


def find_mnist(data_dir) -> dict[str, Path] | None:
    """Local MNIST files if all four are present (gzipped or not), else None."""
    data_dir = Path(data_dir)
    out = {}
    for key, fname in MNIST_FILES.items():
        plain = data_dir / fname.removesuffix(".gz")
        gz = data_dir / fname
        if gz.exists():
            out[key] = gz
        elif plain.exists():
            out[key] = plain
        else:
            return None
    return out


def load_mnist(data_dir, normalize_mode: str = "scale01") -> tuple[Dataset, Dataset]:
    """Train and test datasets from a directory of MNIST-layout IDX files.

    The class count is inferred from the labels (10 for real MNIST; smaller
    toy fixtures using the same file names also load).
    """
    paths = find_mnist(data_dir)
    if paths is None:
        raise FileNotFoundError(
            f"MNIST files not found under {data_dir}; run fetch-data or point --data-dir at them"
        )
    train_labels = load_idx_labels(paths["train_labels"], max_label=9)
    test_labels = load_idx_labels(paths["test_labels"], max_label=9)
    num_classes = int(max(train_labels.max(), test_labels.max())) + 1
    train = Dataset(
        x=normalize(load_idx_images(paths["train_images"]), normalize_mode),
        labels=train_labels,
        num_classes=num_classes,
    )
    test = Dataset(
        x=normalize(load_idx_images(paths["test_images"]), normalize_mode),
        labels=test_labels,
        num_classes=num_classes,
    )
    return train, test
