"""Dense float64 linear-algebra kernels shared by both output-weight solvers.

Everything here is a thin, contract-enforcing layer over numpy/BLAS and
scipy's Cholesky routines. All inputs and outputs are C-contiguous float64
arrays; results of ``gram`` and ``spd_inverse`` are exactly symmetric
(mirrored entries are bitwise equal). Functions are pure and safe to call
concurrently; BLAS-internal parallelism is reproducible for a fixed thread
count.
"""

from __future__ import annotations

import logging

import numpy as np
from scipy.linalg import LinAlgError, cho_factor, cho_solve

log = logging.getLogger(__name__)

# Relative tolerance on max|S - S^T| before an "SPD" input is rejected.
# Gram matrices are symmetric only up to accumulation order.
SYMMETRY_RTOL = 1e-8


class NotPositiveDefiniteError(np.linalg.LinAlgError):
    """Cholesky factorization failed at every jitter level tried."""


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Coerce to a 2-D C-contiguous float64 array."""
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    return out


def check_finite(a: np.ndarray, name: str = "matrix") -> np.ndarray:
    """Reject NaN/Inf. Applied on I/O boundaries, not inside hot loops."""
    if not np.isfinite(a).all():
        raise ValueError(f"{name} contains non-finite entries")
    return a


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.shape[0]}x{a.shape[1]} times {b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def gram(a: np.ndarray) -> np.ndarray:
    """a @ a.T with the upper triangle mirrored onto the lower.

    The mirror makes the result exactly symmetric, which the SPD solvers
    rely on; plain GEMM output differs across the diagonal in the last bits.
    """
    a = as_matrix(a, "a")
    if a.size == 0:
        raise ValueError(f"gram of an empty matrix (shape {a.shape})")
    g = a @ a.T
    lower = np.tril_indices(g.shape[0], -1)
    g[lower] = g.T[lower]
    return g


def _check_spd_input(s: np.ndarray) -> np.ndarray:
    """Validate symmetry within tolerance, then symmetrize exactly."""
    s = as_matrix(s, "s")
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"SPD solve needs a square matrix, got {s.shape[0]}x{s.shape[1]}")
    scale = np.abs(s).max() if s.size else 0.0
    skew = np.abs(s - s.T).max() if s.size else 0.0
    if skew > SYMMETRY_RTOL * scale:
        raise ValueError(
            f"matrix is not symmetric: max|S - S^T| = {skew:.3e} exceeds "
            f"{SYMMETRY_RTOL:.0e} * max|S| = {SYMMETRY_RTOL * scale:.3e}"
        )
    return (s + s.T) / 2.0


def _jitter_levels(jitter: float, diag_mean: float):
    """Escalation ladder: caller's jitter, then max(1e-10, jitter) * 10^k.

    Capped at 1e-2 * mean(diag(S)); a zero or negative cap (e.g. the
    all-zero covariance of identical samples) disables escalation, leaving
    only the caller-provided level.
    """
    yield jitter
    cap = 1e-2 * diag_mean
    level = max(1e-10, jitter)
    if level > jitter and level <= cap:
        yield level
    while level < cap:
        level *= 10.0
        if level <= cap:
            yield level


def _spd_solve_ex(s: np.ndarray, b: np.ndarray, jitter: float) -> tuple[np.ndarray, float]:
    """Solve (S + jitter*I) X = B, escalating jitter on factorization failure.

    Returns (X, jitter_actually_used).
    """
    if jitter < 0:
        raise ValueError(f"jitter must be >= 0, got {jitter}")
    s = _check_spd_input(s)
    b = as_matrix(b, "b")
    if s.shape[0] != b.shape[0]:
        raise ValueError(
            f"solve dimension mismatch: {s.shape[0]}x{s.shape[1]} system, "
            f"{b.shape[0]}x{b.shape[1]} right-hand side"
        )
    n = s.shape[0]
    diag_mean = float(np.mean(np.diagonal(s))) if n else 0.0
    tried = []
    for level in _jitter_levels(float(jitter), diag_mean):
        mat = s.copy()
        if level:
            mat.flat[:: n + 1] += level
        try:
            factor = cho_factor(mat, lower=True, overwrite_a=True, check_finite=False)
        except LinAlgError:
            tried.append(level)
            continue
        if level != jitter:
            log.warning("Cholesky needed jitter escalation: %.3e -> %.3e", jitter, level)
        return cho_solve(factor, b, check_finite=False), level
    raise NotPositiveDefiniteError(
        f"matrix is not positive definite at any jitter level tried "
        f"(levels {tried}, cap 1e-2*mean(diag) = {1e-2 * diag_mean:.3e})"
    )


def spd_solve(s: np.ndarray, b: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Solve (S + jitter*I) X = B for symmetric positive definite S.

    Uses a Cholesky factorization with the documented jitter-escalation
    schedule; the level actually used is logged when it differs from the
    caller's.
    """
    return _spd_solve_ex(s, b, jitter)[0]


def spd_inverse(s: np.ndarray, jitter: float = 0.0) -> np.ndarray:
    """Explicit inverse of a symmetric positive definite matrix.

    Solves against the identity, then symmetrizes the result so downstream
    quadratic forms see an exactly symmetric inverse.
    """
    s = as_matrix(s, "s")
    inv = spd_solve(s, np.eye(s.shape[0]), jitter)
    return (inv + inv.T) / 2.0
