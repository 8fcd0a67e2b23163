"""Command-line interface.

Subcommands: fetch-data, sweep, ensemble-sweep, train, predict, selftest.
Every experiment option can come from a JSON/TOML config file (--config)
and be overridden by a flag. Exit codes: 0 success, 2 configuration error,
3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import sys
import time

import numpy as np

from . import __version__, dataio, harness, selftest
from .dataio import DataError
from .hidden import ACTIVATIONS, forward_hidden, init_hidden_layer
from .linalg import NotPositiveDefiniteError
from .solvers import (
    LDA,
    PI,
    build_targets,
    class_stats,
    classify,
    load_model,
    posteriors,
    save_model,
    score,
    solve_lda,
    solve_pi,
)

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4


def _parse_int_list(text: str) -> tuple:
    try:
        return tuple(int(v) for v in text.split(","))
    except ValueError:
        raise harness.ConfigError(f"expected comma-separated integers, got {text!r}") from None


def _parse_priors(text: str):
    if text in ("uniform", "empirical"):
        return text
    try:
        return tuple(float(v) for v in text.split(","))
    except ValueError:
        raise harness.ConfigError(
            f"--priors takes 'uniform', 'empirical', or comma-separated floats, got {text!r}"
        ) from None


def _add_experiment_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON or TOML config file; flags override its keys")
    p.add_argument("--data-dir", help="directory with the IDX dataset files")
    p.add_argument("--out-dir", help="directory for CSV artifacts")
    p.add_argument("--seed", type=int, help="base seed for all derived random streams")
    p.add_argument("--fan-out", help="comma-separated fan-outs, e.g. 1,2,3")
    p.add_argument("--repeats", type=int, help="trials per fan-out")
    p.add_argument("--normalize", choices=dataio.NORMALIZE_MODES, help="input preprocessing")
    p.add_argument("--activation", choices=sorted(ACTIVATIONS), help="hidden nonlinearity")
    p.add_argument("--ridge", type=float, help="Tikhonov term for the least-squares solver")
    p.add_argument("--priors", help="'uniform', 'empirical', or comma-separated floats")
    p.add_argument("--jitter", type=float, help="starting diagonal loading for covariance solves")
    p.add_argument("--weight-low", type=float, help="lower bound of the input-weight range")
    p.add_argument("--weight-high", type=float, help="upper bound of the input-weight range")
    p.add_argument("--ensemble-sizes", help="comma-separated ensemble sizes, e.g. 1,2,5")
    p.add_argument("--ensemble-repeats", type=int, help="seed sets per ensemble size")


def _config_from_args(args) -> harness.ExperimentConfig:
    config = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    return harness.apply_overrides(
        config,
        data_dir=args.data_dir,
        out_dir=args.out_dir,
        base_seed=args.seed,
        fan_outs=_parse_int_list(args.fan_out) if args.fan_out else None,
        repeats=args.repeats,
        normalize=args.normalize,
        activation=args.activation,
        ridge=args.ridge,
        priors=_parse_priors(args.priors) if args.priors else None,
        jitter=args.jitter,
        weight_low=args.weight_low,
        weight_high=args.weight_high,
        ensemble_sizes=_parse_int_list(args.ensemble_sizes) if args.ensemble_sizes else None,
        ensemble_repeats=args.ensemble_repeats,
    )


def cmd_fetch_data(args) -> int:
    config = harness.load_config(args.config) if args.config else harness.ExperimentConfig()
    mirror = args.mirror or config.mirror_url or dataio.DEFAULT_MIRROR
    data_dir = args.data_dir or config.data_dir
    paths = dataio.fetch_mnist(data_dir, mirror, force=args.force)
    for key, path in paths.items():
        print(f"{key}: {path}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _config_from_args(args)
    train, test = dataio.load_mnist(config.data_dir, config.normalize)
    print(
        f"sweep: fan-outs {list(config.fan_outs)}, {config.repeats} repeats, "
        f"{train.num_samples} train / {test.num_samples} test samples"
    )
    results, failures, summary = harness.run_fanout_sweep(config, train, test)
    print(f"{'fan_out':>7} {'pi_err%':>8} {'lda_err%':>8} {'improve%':>8} {'ok':>4} {'fail':>4}")
    for row in summary:
        print(
            f"{row.fan_out:>7} {row.pi_error_mean:>8.3f} {row.lda_error_mean:>8.3f} "
            f"{row.improvement_pct:>8.2f} {row.trials_ok:>4} {row.trials_failed:>4}"
        )
    if results:
        ratio = float(np.mean([r.lda_train_seconds / r.pi_train_seconds for r in results]))
        flag = "  [FLAGGED: above 1.25, hardware-dependent]" if ratio > 1.25 else ""
        print(f"mean train-time ratio (lda/pi): {ratio:.3f}{flag}")
    print(f"artifacts in {config.out_dir}: trials.csv summary.csv plot_fanout.csv")
    if failures:
        print(f"warning: {len(failures)} trial(s) failed; see trials.csv", file=sys.stderr)
    if not results:
        print("error: every trial failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_ensemble_sweep(args) -> int:
    config = _config_from_args(args)
    train, test = dataio.load_mnist(config.data_dir, config.normalize)
    print(
        f"ensemble sweep: fan-out {config.fan_outs[0]}, sizes {sorted(set(config.ensemble_sizes))}, "
        f"{config.ensemble_repeats} repeats"
    )
    _, means = harness.run_ensemble_sweep(config, train, test)
    print(f"{'size':>5} {'err%':>8}")
    for size, mean in means:
        print(f"{size:>5} {mean:>8.3f}")
    print(f"artifacts in {config.out_dir}: ensemble_trials.csv plot_ensemble.csv")
    return EXIT_OK


def cmd_train(args) -> int:
    config = _config_from_args(args)
    train, test = dataio.load_mnist(config.data_dir, config.normalize)
    fan_out = config.fan_outs[0]
    layer = init_hidden_layer(
        train.num_features, fan_out, config.weight_low, config.weight_high,
        config.activation, config.base_seed,
    )
    t0 = time.perf_counter()
    acts = forward_hidden(layer, train.x)
    if args.solver == PI:
        weights = solve_pi(acts, build_targets(train.labels, train.num_classes), config.ridge)
    else:
        weights = solve_lda(class_stats(acts, train.labels, config.priors, train.num_classes), config.jitter)
    elapsed = time.perf_counter() - t0
    save_model(args.output, layer, weights)
    err = harness.error_rate(classify(score(weights, forward_hidden(layer, test.x))), test.labels)
    print(f"trained {args.solver} model: fan-out {fan_out}, {layer.num_hidden} hidden units, {elapsed:.2f}s")
    print(f"test error: {err:.3f}%")
    print(f"wrote {args.output} (+ .json sidecar)")
    return EXIT_OK


def cmd_predict(args) -> int:
    try:
        layer, weights = load_model(args.model)
    except ValueError as e:
        raise DataError(f"{args.model}: {e}") from e
    if args.csv:
        ds = dataio.load_csv_dataset(args.csv)
        x, truth = ds.x, ds.labels
    else:
        x = dataio.load_idx_images(args.images)
        truth = dataio.load_idx_labels(args.labels) if args.labels else None
    x = dataio.normalize(x, args.normalize)
    if x.shape[0] != layer.num_inputs:
        raise DataError(f"input has {x.shape[0]} features, model expects {layer.num_inputs}")
    scores = score(weights, forward_hidden(layer, x))
    predicted = classify(scores)
    probs = posteriors(scores) if args.posteriors else None
    out = args.output or "-"
    stream = sys.stdout if out == "-" else open(out, "w", newline="")
    try:
        writer = csv.writer(stream)
        header = ["sample_index", "predicted_label"]
        if probs is not None:
            header += [f"posterior_{n}" for n in range(weights.num_classes)]
        writer.writerow(header)
        for k in range(x.shape[1]):
            row = [k, int(predicted[k])]
            if probs is not None:
                row += [repr(float(p)) for p in probs[:, k]]
            writer.writerow(row)
    finally:
        if stream is not sys.stdout:
            stream.close()
    if truth is not None:
        print(f"error rate: {harness.error_rate(predicted, truth):.3f}%", file=sys.stderr)
    return EXIT_OK


def cmd_selftest(args) -> int:
    names = args.suite or None
    results = selftest.run_suites(names)
    failed = 0
    for name, ok, detail in results:
        print(f"[{'PASS' if ok else 'FAIL'}] {name}: {detail}")
        failed += 0 if ok else 1
    if failed:
        print(f"{failed} suite(s) failed", file=sys.stderr)
        return EXIT_NUMERICAL
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="elmkit", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fetch-data", help="download the MNIST IDX files with checksum verification")
    p.add_argument("--config", help="JSON or TOML config file; flags override its keys")
    p.add_argument("--data-dir", help="target directory (default data/mnist)")
    p.add_argument("--mirror", help=f"base URL (default {dataio.DEFAULT_MIRROR})")
    p.add_argument("--force", action="store_true", help="re-download even if files verify")
    p.set_defaults(func=cmd_fetch_data)

    p = sub.add_parser("sweep", help="paired least-squares vs discriminant sweep across fan-outs")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_sweep)

    p = sub.add_parser("ensemble-sweep", help="posterior-averaging sweep over ensemble sizes")
    _add_experiment_flags(p)
    p.set_defaults(func=cmd_ensemble_sweep)

    p = sub.add_parser("train", help="train one model and save it to a weight file")
    _add_experiment_flags(p)
    p.add_argument("--solver", choices=[PI, LDA], default=LDA)
    p.add_argument("--output", required=True, help="weight file to write")
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="classify inputs with a saved weight file")
    p.add_argument("--model", required=True, help="weight file from `train`")
    src = p.add_mutually_exclusive_group(required=True)
    src.add_argument("--images", help="IDX image file")
    src.add_argument("--csv", help="CSV dataset (features..., label)")
    p.add_argument("--labels", help="IDX label file; prints the error rate when given")
    p.add_argument("--normalize", choices=dataio.NORMALIZE_MODES, default="scale01")
    p.add_argument("--posteriors", action="store_true", help="include posterior columns")
    p.add_argument("--output", help="output CSV path (default: stdout)")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("selftest", help="run the synthetic-data property suites")
    p.add_argument("--suite", action="append", choices=list(selftest.SUITES), help="run only this suite (repeatable)")
    p.set_defaults(func=cmd_selftest)

    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except harness.ConfigError as e:
        print(f"config error: {e}", file=sys.stderr)
        return EXIT_CONFIG
    except (DataError, FileNotFoundError, OSError) as e:
        print(f"data error: {e}", file=sys.stderr)
        return EXIT_DATA
    except (NotPositiveDefiniteError, np.linalg.LinAlgError, FloatingPointError) as e:
        print(f"numerical failure: {e}", file=sys.stderr)
        return EXIT_NUMERICAL


if __name__ == "__main__":
    sys.exit(main())
