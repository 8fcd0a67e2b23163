"""elmkit: extreme learning machine classifiers with two closed-form output
solvers (least squares and linear discriminant analysis), posterior-averaging
ensembles, and a reproducible benchmark harness."""

__version__ = "0.1.0"

from .dataio import Dataset, load_csv_dataset, load_idx_images, load_idx_labels, normalize, synth_gaussian
from .ensemble import EnsembleModel, combine_posteriors, ensemble_predict, load_ensemble, save_ensemble
from .estimators import ELMClassifier, ELMEnsembleClassifier
from .hidden import HiddenLayer, apply_activation, forward_hidden, init_hidden_layer
from .linalg import NotPositiveDefiniteError, gram, matmul, spd_inverse, spd_solve
from .solvers import (
    ClassStats,
    OutputWeights,
    build_targets,
    class_stats,
    classify,
    load_model,
    log_likelihood,
    posteriors,
    save_model,
    score,
    solve_lda,
    solve_pi,
)

__all__ = [
    "__version__",
    "Dataset",
    "load_csv_dataset",
    "load_idx_images",
    "load_idx_labels",
    "normalize",
    "synth_gaussian",
    "EnsembleModel",
    "combine_posteriors",
    "ensemble_predict",
    "load_ensemble",
    "save_ensemble",
    "ELMClassifier",
    "ELMEnsembleClassifier",
    "HiddenLayer",
    "apply_activation",
    "forward_hidden",
    "init_hidden_layer",
    "NotPositiveDefiniteError",
    "gram",
    "matmul",
    "spd_inverse",
    "spd_solve",
    "ClassStats",
    "OutputWeights",
    "build_targets",
    "class_stats",
    "classify",
    "load_model",
    "log_likelihood",
    "posteriors",
    "save_model",
    "score",
    "solve_lda",
    "solve_pi",
]
