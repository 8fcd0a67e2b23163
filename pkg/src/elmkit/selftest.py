"""Self-contained property suites over synthetic data; no dataset downloads.

Each suite checks one contract of the solvers against an independent oracle
(direct normal-equations residuals, true-parameter Bayes decisions, the
quadratic-form posterior, a brute-force likelihood probe, byte-level IDX
fixtures). ``run_suites`` returns (name, passed, detail) triples; the CLI
prints one line per suite.
"""

from __future__ import annotations

import tempfile
from pathlib import Path

import numpy as np

from . import dataio
from .seeding import make_rng, spawn_seed
from .solvers import (
    ClassStats,
    build_targets,
    class_stats,
    classify,
    log_likelihood,
    posteriors,
    score,
    solve_lda,
    solve_pi,
)

BASE_SEED = 20240501


def pi_normal_equations(instances: int = 100) -> tuple[bool, str]:
    """Least-squares weights satisfy W (A A^T) = T A^T to 1e-8 relative."""
    worst = 0.0
    for i in range(instances):
        rng = make_rng(spawn_seed(BASE_SEED, 1, i))
        k = int(rng.integers(50, 501))
        m = int(rng.integers(2, 41))
        n = int(rng.integers(2, 11))
        a = rng.uniform(0.0, 1.0, size=(m, k))
        t = build_targets(rng.integers(0, n, size=k), n)
        w = solve_pi(a, t, ridge=0.0).w
        g = a @ a.T
        rhs = t @ a.T
        residual = np.linalg.norm(w @ g - rhs) / np.linalg.norm(rhs)
        worst = max(worst, residual)
    ok = worst < 1e-8
    return ok, f"worst relative residual {worst:.3e} over {instances} instances (limit 1e-8)"


def _bayes_decisions(x, means, cov, priors):
    """True-parameter Bayes classifier via per-class quadratic forms."""
    scores = np.empty((means.shape[0], x.shape[1]))
    for n in range(means.shape[0]):
        centered = x - means[n][:, None]
        scores[n] = -0.5 * np.einsum("mk,mk->k", centered, np.linalg.solve(cov, centered)) + np.log(priors[n])
    return scores.argmax(axis=0)


def _separated_means(rng, n: int, m: int, radius: float) -> np.ndarray:
    """Class means on a sphere, resampled until pairwise distances >= radius."""
    while True:
        means = rng.normal(size=(n, m))
        means = radius * means / np.linalg.norm(means, axis=1, keepdims=True)
        dists = np.linalg.norm(means[:, None] - means[None, :], axis=2)
        if dists[np.triu_indices(n, 1)].min() >= radius:
            return means


def lda_matches_bayes(seeds: int = 20, test_points: int = 10_000) -> tuple[bool, str]:
    """Fitted LDA agrees with the true-parameter Bayes rule on >= 99% of
    fresh points when the data really is shared-covariance Gaussian.

    Separation is chosen so classes overlap (Bayes error up to ~2%) yet the
    boundary region is thin enough that estimates from 100 samples per
    dimension pin it down.
    """
    worst = 1.0
    for i in range(seeds):
        rng = make_rng(spawn_seed(BASE_SEED, 2, i))
        m = int(rng.integers(2, 9))
        n = int(rng.integers(2, 6))
        k = 100 * m
        means = _separated_means(rng, n, m, radius=4.5)
        basis = rng.normal(0.0, 1.0, size=(m, m))
        cov = np.eye(m) + 0.1 * (basis @ basis.T) / m
        priors = rng.dirichlet(np.full(n, 8.0))
        train = dataio.synth_gaussian(means, cov, priors, k, seed=spawn_seed(BASE_SEED, 2, i, 0))
        test = dataio.synth_gaussian(means, cov, priors, test_points, seed=spawn_seed(BASE_SEED, 2, i, 1))
        stats = class_stats(train.x, train.labels, priors="empirical", num_classes=n)
        fitted = classify(score(solve_lda(stats), test.x))
        oracle = _bayes_decisions(test.x, means, cov, priors)
        agreement = float(np.mean(fitted == oracle))
        worst = min(worst, agreement)
    ok = worst >= 0.99
    return ok, f"worst agreement {100 * worst:.2f}% over {seeds} seeds (limit 99%)"


def posterior_properties(columns: int = 100_000) -> tuple[bool, str]:
    """Columns sum to 1 (1e-12), argmax matches the raw scores, and a
    per-column score shift changes nothing (1e-12)."""
    rng = make_rng(spawn_seed(BASE_SEED, 3))
    y = rng.uniform(-50.0, 50.0, size=(10, columns))
    y[:, 0] = 0.0
    y[0, 1] = 1000.0  # overflow guard: must not produce NaN
    p = posteriors(y)
    sum_err = float(np.abs(p.sum(axis=0) - 1.0).max())
    argmax_ok = bool(np.array_equal(classify(p), classify(y)))
    shifts = rng.uniform(-100.0, 100.0, size=(1, columns))
    shift_err = float(np.abs(posteriors(y + shifts) - p).max())
    ok = sum_err <= 1e-12 and argmax_ok and shift_err <= 1e-12 and np.isfinite(p).all()
    return ok, (
        f"column-sum error {sum_err:.2e}, shift error {shift_err:.2e} (limits 1e-12), "
        f"argmax invariant: {argmax_ok}"
    )


def _with_means(stats: ClassStats, means: np.ndarray) -> ClassStats:
    return ClassStats(
        means=means, pooled_cov=stats.pooled_cov.copy(), priors=stats.priors.copy(),
        counts=stats.counts.copy(), total=stats.total,
    )


def _with_cov(stats: ClassStats, cov: np.ndarray) -> ClassStats:
    return ClassStats(
        means=stats.means.copy(), pooled_cov=cov, priors=stats.priors.copy(),
        counts=stats.counts.copy(), total=stats.total,
    )


def likelihood_maximality(datasets: int = 20, directions: int = 50) -> tuple[bool, str]:
    """The closed-form mean/covariance estimates beat every tested
    perturbation of the means and every diagonal inflation of the
    covariance, dataset by dataset."""
    epsilons = (1e-3, 1e-2)
    failures = 0
    min_margin = np.inf
    for i in range(datasets):
        rng = make_rng(spawn_seed(BASE_SEED, 4, i))
        m = int(rng.integers(1, 6))
        n = int(rng.integers(2, 5))
        k = int(rng.integers(max(60, 10 * m), 160))
        centers = rng.normal(0.0, 2.0, size=(n, m))
        labels = rng.integers(0, n, size=k)
        while np.bincount(labels, minlength=n).min() < max(m + 1, 2):
            labels = rng.integers(0, n, size=k)
        a = centers[labels].T + rng.normal(0.0, 1.0, size=(m, k))
        stats = class_stats(a, labels, priors="empirical", num_classes=n)
        best = log_likelihood(stats, a, labels)
        for eps in epsilons:
            for _ in range(directions):
                cls = int(rng.integers(0, n))
                direction = rng.normal(size=m)
                direction /= np.linalg.norm(direction)
                means = stats.means.copy()
                means[cls] += eps * direction
                perturbed = log_likelihood(_with_means(stats, means), a, labels)
                min_margin = min(min_margin, best - perturbed)
                if perturbed >= best:
                    failures += 1
            inflated = stats.pooled_cov + eps * np.eye(m)
            perturbed = log_likelihood(_with_cov(stats, inflated), a, labels)
            min_margin = min(min_margin, best - perturbed)
            if perturbed >= best:
                failures += 1
    ok = failures == 0
    return ok, f"{failures} perturbations won (min margin {min_margin:.3e}) over {datasets} datasets"


def quadratic_linear_equivalence(instances: int = 50) -> tuple[bool, str]:
    """Posteriors from the linear scores equal posteriors computed straight
    from the Gaussian quadratic form, to 1e-10."""
    worst = 0.0
    for i in range(instances):
        rng = make_rng(spawn_seed(BASE_SEED, 5, i))
        m = int(rng.integers(1, 6))
        n = int(rng.integers(2, 5))
        k = 30 * n + int(rng.integers(0, 20))
        centers = rng.normal(0.0, 1.0, size=(n, m))
        labels = rng.integers(0, n, size=k)
        while np.bincount(labels, minlength=n).min() < 2:
            labels = rng.integers(0, n, size=k)
        a = centers[labels].T + rng.normal(0.0, 1.0, size=(m, k))
        stats = class_stats(a, labels, priors="uniform", num_classes=n)
        x = rng.normal(0.0, 1.0, size=(m, 20))
        via_linear = posteriors(score(solve_lda(stats), x))
        quad = np.empty((n, x.shape[1]))
        for cls in range(n):
            centered = x - stats.means[cls][:, None]
            solved = np.linalg.solve(stats.pooled_cov, centered)
            quad[cls] = -0.5 * np.einsum("mk,mk->k", centered, solved) + np.log(stats.priors[cls])
        shifted = quad - quad.max(axis=0, keepdims=True)
        via_quadratic = np.exp(shifted)
        via_quadratic /= via_quadratic.sum(axis=0, keepdims=True)
        worst = max(worst, float(np.abs(via_linear - via_quadratic).max()))
    ok = worst <= 1e-10
    return ok, f"worst posterior difference {worst:.3e} over {instances} instances (limit 1e-10)"


def idx_fixtures() -> tuple[bool, str]:
    """Hand-built IDX byte fixtures parse to the documented matrices and
    survive a byte-identical round trip."""
    import struct

    with tempfile.TemporaryDirectory() as tmp:
        tmp = Path(tmp)
        image_blob = struct.pack(">IIII", dataio.IDX_IMAGE_MAGIC, 2, 2, 2) + bytes(range(8))
        (tmp / "img.idx3").write_bytes(image_blob)
        images = dataio.load_idx_images(tmp / "img.idx3")
        expected = np.array([[0.0, 4.0], [1.0, 5.0], [2.0, 6.0], [3.0, 7.0]])
        images_ok = bool(np.array_equal(images, expected))

        label_blob = struct.pack(">II", dataio.IDX_LABEL_MAGIC, 3) + bytes([5, 0, 9])
        (tmp / "lab.idx1").write_bytes(label_blob)
        labels_ok = bool(np.array_equal(dataio.load_idx_labels(tmp / "lab.idx1"), [5, 0, 9]))

        dataio.write_idx_images(tmp / "round.idx3", images, rows=2, cols=2)
        dataio.write_idx_labels(tmp / "round.idx1", [5, 0, 9])
        round_ok = (tmp / "round.idx3").read_bytes() == image_blob and (
            tmp / "round.idx1"
        ).read_bytes() == label_blob
    ok = images_ok and labels_ok and round_ok
    return ok, f"images={images_ok} labels={labels_ok} round_trip={round_ok}"


SUITES = {
    "pi-normal-equations": pi_normal_equations,
    "lda-matches-bayes": lda_matches_bayes,
    "posterior-properties": posterior_properties,
    "likelihood-maximality": likelihood_maximality,
    "quadratic-linear-equivalence": quadratic_linear_equivalence,
    "idx-fixtures": idx_fixtures,
}


def run_suites(names=None) -> list[tuple[str, bool, str]]:
    if names is None:
        names = list(SUITES)
    unknown = [n for n in names if n not in SUITES]
    if unknown:
        raise ValueError(f"unknown suites {unknown}; available: {list(SUITES)}")
    return [(name, *SUITES[name]()) for name in names]
