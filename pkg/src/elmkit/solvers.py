"""Hidden-to-output weight solvers, scoring, and posterior probabilities.

Two closed-form trainings of the linear output stage are provided, both
operating on the same activation matrix ``a`` (hidden units x samples):

* ``solve_pi``  -- least squares. W = T A^T (A A^T)^-1 minimizes the squared
  error between network outputs and one-hot targets; an optional ridge term
  regularizes the normal equations.
* ``solve_lda`` -- linear discriminant analysis. Class-conditional densities
  of the activations are modelled as Gaussians with per-class means and one
  pooled covariance, estimated by maximum likelihood; the resulting class
  log-posteriors (up to a shared constant) are linear in ``a``, giving an
  output weight matrix with an extra bias column.

Scores from either solver feed ``posteriors`` (columnwise softmax) and
``classify`` (argmax). Since softmax is monotone, both give the same
decisions; posteriors matter for ensembling.
"""

from __future__ import annotations

import json
import struct
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

from . import hidden
from .hidden import HiddenLayer, hidden_layer_from_dims
from .linalg import (
    NotPositiveDefiniteError,
    as_matrix,
    check_finite,
    gram,
    spd_inverse,
    spd_solve,
)

PI = "pi"
LDA = "lda"

UNIFORM = "uniform"
EMPIRICAL = "empirical"


def build_targets(labels, num_classes: int) -> np.ndarray:
    """One-hot target matrix, one column per sample."""
    labels = np.asarray(labels, dtype=np.int64).ravel()
    if num_classes < 1:
        raise ValueError(f"num_classes must be >= 1, got {num_classes}")
    bad = np.flatnonzero((labels < 0) | (labels >= num_classes))
    if bad.size:
        i = int(bad[0])
        raise ValueError(
            f"label {labels[i]} at index {i} is outside [0, {num_classes})"
        )
    t = np.zeros((num_classes, labels.size))
    t[labels, np.arange(labels.size)] = 1.0
    return t


@dataclass(frozen=True)
class ClassStats:
    """Per-class means, pooled covariance, priors, and class counts."""

    means: np.ndarray       # (num_classes, num_hidden)
    pooled_cov: np.ndarray  # (num_hidden, num_hidden)
    priors: np.ndarray      # (num_classes,)
    counts: np.ndarray      # (num_classes,)
    total: int

    def __post_init__(self):
        for arr in (self.means, self.pooled_cov, self.priors, self.counts):
            arr.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return self.means.shape[0]

    @property
    def num_hidden(self) -> int:
        return self.means.shape[1]


def _resolve_priors(priors, counts: np.ndarray, total: int) -> np.ndarray:
    n = counts.size
    if isinstance(priors, str):
        if priors == UNIFORM:
            return np.full(n, 1.0 / n)
        if priors == EMPIRICAL:
            return counts / total
        raise ValueError(f"unknown priors policy {priors!r}; use 'uniform', 'empirical', or a sequence")
    p = np.asarray(priors, dtype=np.float64).ravel()
    if p.size != n:
        raise ValueError(f"expected {n} priors, got {p.size}")
    if (p <= 0).any():
        raise ValueError("explicit priors must all be positive")
    total_p = p.sum()
    if abs(total_p - 1.0) > 1e-9:
        raise ValueError(f"explicit priors sum to {total_p!r}, not 1")
    return p / total_p


def class_stats(
    a: np.ndarray,
    labels,
    priors=EMPIRICAL,
    num_classes: int | None = None,
    unbiased: bool = False,
) -> ClassStats:
    """Maximum-likelihood Gaussian statistics of activations, per class.

    Means are per-class averages; the pooled covariance accumulates
    class-centered outer products over all samples and divides by the total
    sample count (the ML estimator; ``unbiased=True`` divides by
    samples - classes instead). Centering is done explicitly in a second
    pass rather than via the E[aa^T] - mu mu^T shortcut, which cancels
    catastrophically for activations saturated near 1.
    """
    a = as_matrix(a, "activations")
    labels = np.asarray(labels, dtype=np.int64).ravel()
    m, k = a.shape
    if k == 0:
        raise ValueError("need at least one sample")
    if labels.size != k:
        raise ValueError(f"{labels.size} labels for {k} activation columns")
    n = int(num_classes) if num_classes is not None else int(labels.max()) + 1
    if n < 1:
        raise ValueError("need at least one class")
    if ((labels < 0) | (labels >= n)).any():
        bad = int(np.flatnonzero((labels < 0) | (labels >= n))[0])
        raise ValueError(f"label {labels[bad]} at index {bad} is outside [0, {n})")
    counts = np.bincount(labels, minlength=n)
    if (counts == 0).any():
        raise ValueError(f"class {int(np.flatnonzero(counts == 0)[0])} has no samples")
    if k - n < m:
        warnings.warn(
            f"pooled covariance may be rank deficient: samples - classes = {k - n} < {m} hidden units",
            stacklevel=2,
        )
    denominator = k - n if unbiased else k
    if denominator < 1:
        raise ValueError(f"unbiased covariance needs more than {n} samples, got {k}")
    indicator = build_targets(labels, n)
    means_mn = (a @ indicator.T) / counts            # (m, n)
    centered = means_mn.take(labels, axis=1)         # gather class mean per column
    np.subtract(a, centered, out=centered)
    pooled = gram(centered)
    pooled /= denominator
    return ClassStats(
        means=np.ascontiguousarray(means_mn.T),
        pooled_cov=pooled,
        priors=_resolve_priors(priors, counts, k),
        counts=counts,
        total=int(k),
    )


@dataclass(frozen=True)
class OutputWeights:
    """Trained hidden-to-output weights.

    ``kind == "pi"``: shape (num_classes, num_hidden), no bias.
    ``kind == "lda"``: shape (num_classes, num_hidden + 1); column 0 holds
    the per-class bias log(prior) - mu^T Sigma^-1 mu / 2 and the remaining
    columns hold mu^T Sigma^-1.
    """

    kind: str
    w: np.ndarray

    def __post_init__(self):
        if self.kind not in (PI, LDA):
            raise ValueError(f"unknown weight kind {self.kind!r}")
        if not np.isfinite(self.w).all():
            raise ValueError("output weights contain non-finite entries")
        self.w.setflags(write=False)

    @property
    def num_classes(self) -> int:
        return self.w.shape[0]

    @property
    def num_hidden(self) -> int:
        return self.w.shape[1] - (1 if self.kind == LDA else 0)


def solve_pi(a: np.ndarray, t: np.ndarray, ridge: float = 0.0) -> OutputWeights:
    """Least-squares output weights via the Gram-matrix normal equations.

    Solves W (A A^T + ridge I) = T A^T with a Cholesky factorization; with
    ridge 0 this is the pseudo-inverse solution. Jitter escalation inside
    the SPD solve is the safety net for nearly singular Gram matrices.
    """
    a = as_matrix(a, "activations")
    t = as_matrix(t, "targets")
    if t.shape[1] != a.shape[1]:
        raise ValueError(f"targets have {t.shape[1]} columns but activations have {a.shape[1]}")
    if ridge < 0:
        raise ValueError(f"ridge must be >= 0, got {ridge}")
    if a.shape[0] > a.shape[1]:
        warnings.warn(
            f"{a.shape[0]} hidden units exceed {a.shape[1]} samples; "
            "the Gram matrix is singular and regularization will decide the solution",
            stacklevel=2,
        )
    g = gram(a)
    if ridge:
        g.flat[:: g.shape[0] + 1] += ridge
    bt = a @ t.T
    try:
        x = spd_solve(g, bt, 0.0)
    except NotPositiveDefiniteError as e:
        raise NotPositiveDefiniteError(
            f"Gram matrix not positive definite even after jitter escalation ({e}); "
            "increase ridge"
        ) from e
    return OutputWeights(kind=PI, w=np.ascontiguousarray(x.T))


def solve_lda(stats: ClassStats, jitter: float = 0.0) -> OutputWeights:
    """Discriminant-analysis output weights from class statistics.

    Row n is [log(prior_n) - mu_n^T Sigma^-1 mu_n / 2, mu_n^T Sigma^-1]; the
    pooled covariance is inverted once and shared across classes.
    """
    sigma_inv = spd_inverse(stats.pooled_cov, jitter)
    lin = stats.means @ sigma_inv                                  # (n, m)
    bias = np.log(stats.priors) - 0.5 * np.einsum("nm,nm->n", lin, stats.means)
    w = np.concatenate([bias[:, None], lin], axis=1)
    return OutputWeights(kind=LDA, w=w)


def score(weights: OutputWeights, a: np.ndarray) -> np.ndarray:
    """Network outputs for a batch of activations, one column per sample.

    For LDA weights the constant-1 bias input is handled here; callers never
    build augmented activation matrices.
    """
    a = as_matrix(a, "activations")
    if weights.kind == PI:
        if weights.w.shape[1] != a.shape[0]:
            raise ValueError(
                f"weights expect {weights.w.shape[1]} hidden units, activations have {a.shape[0]}"
            )
        return weights.w @ a
    if weights.w.shape[1] != a.shape[0] + 1:
        raise ValueError(
            f"weights expect {weights.w.shape[1] - 1} hidden units, activations have {a.shape[0]}"
        )
    return weights.w[:, 1:] @ a + weights.w[:, :1]


def posteriors(y: np.ndarray) -> np.ndarray:
    """Columnwise softmax with max subtraction, so huge scores cannot overflow."""
    y = as_matrix(y, "scores")
    check_finite(y, "scores")
    shifted = y - y.max(axis=0, keepdims=True)
    p = np.exp(shifted)
    p /= p.sum(axis=0, keepdims=True)
    return p


def classify(y: np.ndarray) -> np.ndarray:
    """Per-column argmax; ties go to the lowest class index."""
    y = as_matrix(y, "scores")
    return y.argmax(axis=0)


def log_likelihood(stats: ClassStats, a: np.ndarray, labels) -> float:
    """Joint Gaussian log-likelihood of activations under the class model.

    Includes the sum of count_n * log(prior_n). Used to validate that the
    closed-form mean/covariance estimates are in fact maximizers; never part
    of training.
    """
    a = as_matrix(a, "activations")
    labels = np.asarray(labels, dtype=np.int64).ravel()
    m = stats.num_hidden
    if a.shape[0] != m:
        raise ValueError(f"activations have {a.shape[0]} rows, stats expect {m}")
    if labels.size != a.shape[1]:
        raise ValueError(f"{labels.size} labels for {a.shape[1]} activation columns")
    if ((labels < 0) | (labels >= stats.num_classes)).any():
        raise ValueError("labels outside the class range of the statistics")
    cov = (stats.pooled_cov + stats.pooled_cov.T) / 2.0
    try:
        factor = cho_factor(cov, lower=True)
    except LinAlgError as e:
        raise NotPositiveDefiniteError("pooled covariance is singular; log-likelihood undefined") from e
    log_det = 2.0 * float(np.sum(np.log(np.diagonal(factor[0]))))
    centered = stats.means.T.take(labels, axis=1)
    np.subtract(a, centered, out=centered)
    solved = cho_solve(factor, centered)
    quad = float(np.einsum("mk,mk->", centered, solved))
    k = labels.size
    counts = np.bincount(labels, minlength=stats.num_classes)
    prior_term = float(counts @ np.log(stats.priors))
    return -0.5 * k * m * np.log(2.0 * np.pi) - 0.5 * k * log_det - 0.5 * quad + prior_term


# --- model persistence -----------------------------------------------------
#
# Binary container, little-endian throughout:
#   magic      4 bytes  b"ELMW"
#   version    u32      1
#   kind       u8       0 = pi, 1 = lda
#   activation u8       0 = sigmoid, 1 = tanh, 2 = relu
#   reserved   u16      0
#   n_classes  u32
#   n_hidden   u32
#   n_inputs   u32
#   seed       u64      hidden-layer seed
#   weight_low f64      hidden-layer uniform range
#   weight_high f64
# followed by the output-weight matrix as row-major float64. A JSON sidecar
# (<path>.json) mirrors the header for inspection. The hidden layer itself is
# not stored: (n_hidden, n_inputs, range, seed, activation) reconstruct it
# bitwise via the documented generator.

MAGIC = b"ELMW"
FORMAT_VERSION = 1
_HEADER = struct.Struct("<4sIBBHIIIQdd")
_KIND_CODES = {PI: 0, LDA: 1}
_KIND_NAMES = {v: k for k, v in _KIND_CODES.items()}
_ACT_CODES = {hidden.SIGMOID: 0, hidden.TANH: 1, hidden.RELU: 2}
_ACT_NAMES = {v: k for k, v in _ACT_CODES.items()}


def _header_dict(layer: HiddenLayer, weights: OutputWeights) -> dict:
    return {
        "magic": MAGIC.decode(),
        "version": FORMAT_VERSION,
        "kind": weights.kind,
        "activation": layer.activation,
        "num_classes": weights.num_classes,
        "num_hidden": layer.num_hidden,
        "num_inputs": layer.num_inputs,
        "seed": layer.seed,
        "weight_low": layer.weight_low,
        "weight_high": layer.weight_high,
    }


def save_model(path, layer: HiddenLayer, weights: OutputWeights) -> None:
    """Write the binary weight container plus its JSON sidecar."""
    if weights.num_hidden != layer.num_hidden:
        raise ValueError(
            f"weights were trained on {weights.num_hidden} hidden units, layer has {layer.num_hidden}"
        )
    path = str(path)
    header = _HEADER.pack(
        MAGIC,
        FORMAT_VERSION,
        _KIND_CODES[weights.kind],
        _ACT_CODES[layer.activation],
        0,
        weights.num_classes,
        layer.num_hidden,
        layer.num_inputs,
        layer.seed,
        layer.weight_low,
        layer.weight_high,
    )
    with open(path, "wb") as f:
        f.write(header)
        f.write(np.ascontiguousarray(weights.w, dtype="<f8").tobytes())
    with open(path + ".json", "w") as f:
        json.dump(_header_dict(layer, weights), f, indent=2)
        f.write("\n")


def load_model(path) -> tuple[HiddenLayer, OutputWeights]:
    """Read a weight container and rebuild the hidden layer from its seed."""
    with open(path, "rb") as f:
        blob = f.read()
    if len(blob) < _HEADER.size:
        raise ValueError(f"weight file truncated: {len(blob)} bytes, header needs {_HEADER.size}")
    magic, version, kind_code, act_code, _, n_classes, n_hidden, n_inputs, seed, low, high = _HEADER.unpack_from(blob)
    if magic != MAGIC:
        raise ValueError(f"bad magic {magic!r} at byte 0, expected {MAGIC!r}")
    if version != FORMAT_VERSION:
        raise ValueError(f"unsupported weight-file version {version}")
    if kind_code not in _KIND_NAMES:
        raise ValueError(f"unknown weight kind code {kind_code}")
    if act_code not in _ACT_NAMES:
        raise ValueError(f"unknown activation code {act_code}")
    kind = _KIND_NAMES[kind_code]
    cols = n_hidden + (1 if kind == LDA else 0)
    expected = _HEADER.size + 8 * n_classes * cols
    if len(blob) != expected:
        raise ValueError(f"weight file has {len(blob)} bytes, expected {expected}")
    w = np.frombuffer(blob, dtype="<f8", offset=_HEADER.size).reshape(n_classes, cols)
    w = check_finite(np.ascontiguousarray(w, dtype=np.float64), "output weights")
    layer = hidden_layer_from_dims(n_hidden, n_inputs, low, high, _ACT_NAMES[act_code], seed)
    return layer, OutputWeights(kind=kind, w=w)
