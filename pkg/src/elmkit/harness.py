"""Benchmark harness: paired solver comparison across fan-outs, ensembles.

The central design rule is pairing: within a trial, one hidden layer is
drawn and both solvers consume the *same* activation matrix, so the error
difference isolates the solver. Trial seeds derive from
(base_seed, fan_out, trial_index), making every trial reproducible in
isolation; a CRC of the activation matrix is logged per trial as evidence
of pairing.

Artifacts (all CSV, written to the configured output directory):

* trials.csv           one row per trial, errors and per-solver train times
* summary.csv          per fan-out means/stddevs plus percent improvement
* plot_fanout.csv      fan-out vs mean error per solver
* ensemble_trials.csv  one row per (ensemble size, repeat)
* plot_ensemble.csv    ensemble size vs mean error
"""

from __future__ import annotations

import csv
import json
import time
import zlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from .dataio import NORMALIZE_MODES, Dataset
from .ensemble import combine_posteriors
from .hidden import ACTIVATIONS, forward_hidden, init_hidden_layer
from .seeding import spawn_seed
from .solvers import (
    build_targets,
    class_stats,
    classify,
    posteriors,
    score,
    solve_lda,
    solve_pi,
)


class ConfigError(ValueError):
    """Invalid experiment configuration."""


@dataclass(frozen=True)
class ExperimentConfig:
    data_dir: str = "data/mnist"
    mirror_url: str = ""
    normalize: str = "scale01"
    activation: str = "sigmoid"
    weight_low: float = -0.5
    weight_high: float = 0.5
    fan_outs: tuple = (1, 2, 3)
    repeats: int = 10
    base_seed: int = 0
    priors: object = "uniform"
    ridge: float = 0.0
    jitter: float = 0.0
    ensemble_sizes: tuple = (1, 2, 5)
    ensemble_repeats: int = 10
    out_dir: str = "results"

    def __post_init__(self):
        if self.normalize not in NORMALIZE_MODES:
            raise ConfigError(f"normalize must be one of {NORMALIZE_MODES}, got {self.normalize!r}")
        if self.activation not in ACTIVATIONS:
            raise ConfigError(f"activation must be one of {sorted(ACTIVATIONS)}, got {self.activation!r}")
        if not self.weight_low < self.weight_high:
            raise ConfigError(f"weight range is empty: [{self.weight_low}, {self.weight_high}]")
        object.__setattr__(self, "fan_outs", tuple(int(f) for f in self.fan_outs))
        object.__setattr__(self, "ensemble_sizes", tuple(int(e) for e in self.ensemble_sizes))
        if not self.fan_outs or min(self.fan_outs) < 1:
            raise ConfigError(f"fan_outs must be >= 1, got {self.fan_outs}")
        if self.repeats < 1 or self.ensemble_repeats < 1:
            raise ConfigError("repeats must be >= 1")
        if not self.ensemble_sizes or min(self.ensemble_sizes) < 1:
            raise ConfigError(f"ensemble_sizes must be >= 1, got {self.ensemble_sizes}")
        if int(self.base_seed) != self.base_seed or self.base_seed < 0:
            raise ConfigError(f"base_seed must be a non-negative integer, got {self.base_seed!r}")
        if self.ridge < 0 or self.jitter < 0:
            raise ConfigError("ridge and jitter must be >= 0")
        if isinstance(self.priors, str):
            if self.priors not in ("uniform", "empirical"):
                raise ConfigError(f"priors must be 'uniform', 'empirical', or a list, got {self.priors!r}")
        else:
            object.__setattr__(self, "priors", tuple(float(p) for p in self.priors))


_CONFIG_FIELDS = {f.name for f in fields(ExperimentConfig)}


def config_from_dict(d: dict) -> ExperimentConfig:
    unknown = set(d) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    try:
        return ExperimentConfig(**d)
    except TypeError as e:
        raise ConfigError(str(e)) from e


def load_config(path) -> ExperimentConfig:
    """Read a JSON or TOML key-value file mirroring ExperimentConfig."""
    path = Path(path)
    text = path.read_text()
    if path.suffix == ".toml":
        try:
            import tomllib  # py311+
        except ImportError:
            import tomli as tomllib
        try:
            data = tomllib.loads(text)
        except tomllib.TOMLDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    else:
        try:
            data = json.loads(text)
        except json.JSONDecodeError as e:
            raise ConfigError(f"{path}: {e}") from e
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: expected a key-value table at top level")
    return config_from_dict(data)


def apply_overrides(config: ExperimentConfig, **overrides) -> ExperimentConfig:
    """Replace config fields with CLI-provided values (None means keep)."""
    changes = {k: v for k, v in overrides.items() if v is not None}
    unknown = set(changes) - _CONFIG_FIELDS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    return replace(config, **changes) if changes else config


@dataclass(frozen=True)
class TrialResult:
    fan_out: int
    trial_index: int
    seed: int
    pi_error_pct: float
    lda_error_pct: float
    pi_train_seconds: float
    lda_train_seconds: float
    test_seconds: float
    activation_checksum: str


@dataclass(frozen=True)
class TrialFailure:
    fan_out: int
    trial_index: int
    seed: int
    error: str


@dataclass(frozen=True)
class SweepSummaryRow:
    fan_out: int
    pi_error_mean: float
    pi_error_std: float
    lda_error_mean: float
    lda_error_std: float
    improvement_pct: float
    pi_train_mean_seconds: float
    lda_train_mean_seconds: float
    test_mean_seconds: float
    trials_ok: int
    trials_failed: int


def error_rate(predicted, truth) -> float:
    """Percentage of mismatched labels."""
    predicted = np.asarray(predicted).ravel()
    truth = np.asarray(truth).ravel()
    if predicted.size != truth.size:
        raise ValueError(f"{predicted.size} predictions for {truth.size} labels")
    if predicted.size == 0:
        raise ValueError("need at least one prediction")
    return 100.0 * float(np.count_nonzero(predicted != truth)) / predicted.size


def trial_seed(config: ExperimentConfig, fan_out: int, trial_index: int) -> int:
    return spawn_seed(config.base_seed, fan_out, trial_index)


def run_trial(config: ExperimentConfig, train: Dataset, test: Dataset, fan_out: int, trial_index: int) -> TrialResult:
    """One paired trial: shared hidden layer, both solvers, full test set."""
    seed = trial_seed(config, fan_out, trial_index)
    layer = init_hidden_layer(
        train.num_features, fan_out, config.weight_low, config.weight_high, config.activation, seed
    )
    acts = forward_hidden(layer, train.x)
    checksum = f"{zlib.crc32(acts) & 0xFFFFFFFF:08x}"
    targets = build_targets(train.labels, train.num_classes)

    t0 = time.perf_counter()
    w_pi = solve_pi(acts, targets, config.ridge)
    pi_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    stats = class_stats(acts, train.labels, config.priors, train.num_classes)
    w_lda = solve_lda(stats, config.jitter)
    lda_seconds = time.perf_counter() - t0

    t0 = time.perf_counter()
    test_acts = forward_hidden(layer, test.x)
    pi_error = error_rate(classify(score(w_pi, test_acts)), test.labels)
    lda_error = error_rate(classify(score(w_lda, test_acts)), test.labels)
    test_seconds = time.perf_counter() - t0

    return TrialResult(
        fan_out=fan_out,
        trial_index=trial_index,
        seed=seed,
        pi_error_pct=pi_error,
        lda_error_pct=lda_error,
        pi_train_seconds=pi_seconds,
        lda_train_seconds=lda_seconds,
        test_seconds=test_seconds,
        activation_checksum=checksum,
    )


def summarize_trials(results: list[TrialResult], failures: list[TrialFailure], fan_outs) -> list[SweepSummaryRow]:
    """Aggregate per fan-out; a pure function of the trial rows."""
    rows = []
    for fo in fan_outs:
        ok = [r for r in results if r.fan_out == fo]
        failed = [f for f in failures if f.fan_out == fo]
        if not ok:
            rows.append(SweepSummaryRow(fo, *([float("nan")] * 8), 0, len(failed)))
            continue
        pi = np.array([r.pi_error_pct for r in ok])
        lda = np.array([r.lda_error_pct for r in ok])
        pi_mean = float(pi.mean())
        lda_mean = float(lda.mean())
        rows.append(
            SweepSummaryRow(
                fan_out=fo,
                pi_error_mean=pi_mean,
                pi_error_std=float(pi.std()),
                lda_error_mean=lda_mean,
                lda_error_std=float(lda.std()),
                improvement_pct=100.0 * (pi_mean - lda_mean) / pi_mean if pi_mean else float("nan"),
                pi_train_mean_seconds=float(np.mean([r.pi_train_seconds for r in ok])),
                lda_train_mean_seconds=float(np.mean([r.lda_train_seconds for r in ok])),
                test_mean_seconds=float(np.mean([r.test_seconds for r in ok])),
                trials_ok=len(ok),
                trials_failed=len(failed),
            )
        )
    return rows


def _write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(header)
        writer.writerows(rows)


def write_trials_csv(path, results: list[TrialResult], failures: list[TrialFailure]) -> None:
    keyed = {(r.fan_out, r.trial_index): r for r in results}
    keyed.update({(f.fan_out, f.trial_index): f for f in failures})
    rows = []
    for key in sorted(keyed):
        r = keyed[key]
        if isinstance(r, TrialFailure):
            rows.append([r.fan_out, r.trial_index, r.seed, f"error: {r.error}", "", "", "", "", "", ""])
        else:
            rows.append([
                r.fan_out, r.trial_index, r.seed, "ok",
                repr(r.pi_error_pct), repr(r.lda_error_pct),
                f"{r.pi_train_seconds:.6f}", f"{r.lda_train_seconds:.6f}", f"{r.test_seconds:.6f}",
                r.activation_checksum,
            ])
    _write_csv(path, [
        "fan_out", "trial_index", "seed", "status",
        "pi_error_pct", "lda_error_pct",
        "pi_train_seconds", "lda_train_seconds", "test_seconds",
        "activation_checksum",
    ], rows)


def write_summary_csv(path, rows: list[SweepSummaryRow]) -> None:
    _write_csv(path, [
        "fan_out", "pi_error_mean", "pi_error_std", "lda_error_mean", "lda_error_std",
        "improvement_pct", "pi_train_mean_seconds", "lda_train_mean_seconds",
        "test_mean_seconds", "trials_ok", "trials_failed",
    ], [
        [
            r.fan_out, repr(r.pi_error_mean), repr(r.pi_error_std),
            repr(r.lda_error_mean), repr(r.lda_error_std), repr(r.improvement_pct),
            f"{r.pi_train_mean_seconds:.6f}", f"{r.lda_train_mean_seconds:.6f}",
            f"{r.test_mean_seconds:.6f}", r.trials_ok, r.trials_failed,
        ]
        for r in rows
    ])


def run_fanout_sweep(config: ExperimentConfig, train: Dataset, test: Dataset):
    """All (fan_out, repeat) trials; returns (results, failures, summary rows).

    Failed trials are recorded in trials.csv with their cause and excluded
    from the aggregates. Trials run serially; BLAS supplies the parallelism,
    and each trial's seed is order-independent anyway.
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    results, failures = [], []
    for fo in config.fan_outs:
        for i in range(config.repeats):
            try:
                results.append(run_trial(config, train, test, fo, i))
            except Exception as e:  # noqa: BLE001 - a bad trial must not kill the sweep
                failures.append(TrialFailure(fo, i, trial_seed(config, fo, i), f"{type(e).__name__}: {e}"))
    summary = summarize_trials(results, failures, config.fan_outs)
    write_trials_csv(out_dir / "trials.csv", results, failures)
    write_summary_csv(out_dir / "summary.csv", summary)
    _write_csv(
        out_dir / "plot_fanout.csv",
        ["fan_out", "pi_error_mean", "lda_error_mean"],
        [[r.fan_out, repr(r.pi_error_mean), repr(r.lda_error_mean)] for r in summary],
    )
    return results, failures, summary


@dataclass(frozen=True)
class EnsembleTrialRow:
    ensemble_size: int
    repeat_index: int
    error_pct: float
    train_seconds: float


def member_seed(config: ExperimentConfig, fan_out: int, repeat_index: int, member_index: int) -> int:
    return spawn_seed(config.base_seed, fan_out, repeat_index, member_index)


def run_ensemble_sweep(config: ExperimentConfig, train: Dataset, test: Dataset):
    """Posterior-averaging sweep over ensemble sizes, LDA members only.

    Runs at the first configured fan-out. Within a repeat, the members for
    size E are the first E of the largest ensemble (seeds are per-member, so
    the marginal statistics match training each size separately, while the
    pairing across sizes removes between-size noise).
    """
    out_dir = Path(config.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    fan_out = config.fan_outs[0]
    sizes = sorted(set(config.ensemble_sizes))
    rows = []
    for rep in range(config.ensemble_repeats):
        member_posts, member_times = [], []
        for m in range(max(sizes)):
            seed = member_seed(config, fan_out, rep, m)
            t0 = time.perf_counter()
            layer = init_hidden_layer(
                train.num_features, fan_out, config.weight_low, config.weight_high, config.activation, seed
            )
            acts = forward_hidden(layer, train.x)
            stats = class_stats(acts, train.labels, config.priors, train.num_classes)
            weights = solve_lda(stats, config.jitter)
            member_times.append(time.perf_counter() - t0)
            member_posts.append(posteriors(score(weights, forward_hidden(layer, test.x))))
        for size in sizes:
            combined = combine_posteriors(member_posts[:size])
            rows.append(EnsembleTrialRow(
                ensemble_size=size,
                repeat_index=rep,
                error_pct=error_rate(classify(combined), test.labels),
                train_seconds=float(sum(member_times[:size])),
            ))
    _write_csv(
        out_dir / "ensemble_trials.csv",
        ["ensemble_size", "repeat_index", "error_pct", "train_seconds"],
        [[r.ensemble_size, r.repeat_index, repr(r.error_pct), f"{r.train_seconds:.6f}"] for r in rows],
    )
    means = [
        (size, float(np.mean([r.error_pct for r in rows if r.ensemble_size == size])))
        for size in sizes
    ]
    _write_csv(
        out_dir / "plot_ensemble.csv",
        ["ensemble_size", "error_mean"],
        [[size, repr(mean)] for size, mean in means],
    )
    return rows, means
