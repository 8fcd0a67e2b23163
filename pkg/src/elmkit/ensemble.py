"""Posterior-averaging ensembles of independently initialized networks.

Each member is a (hidden layer, output weights) pair trained on its own
random projection of the same data. Member posterior matrices are combined
by an unweighted entrywise mean, which keeps every column on the probability
simplex; the averaged posteriors are then classified as usual.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .hidden import forward_hidden
from .linalg import as_matrix
from .solvers import LDA, classify, load_model, posteriors, save_model, score


@dataclass(frozen=True)
class EnsembleModel:
    """Members share the class count and input dimension, with distinct seeds.

    Only discriminant-analysis members produce calibrated posteriors; pure
    least-squares members are admitted (their scores go through the same
    softmax) only when ``allow_least_squares`` is set.
    """

    members: tuple  # of (HiddenLayer, OutputWeights)
    allow_least_squares: bool = False

    def __post_init__(self):
        if len(self.members) < 1:
            raise ValueError("an ensemble needs at least one member")
        if not self.allow_least_squares:
            kinds = {w.kind for _, w in self.members}
            if kinds - {LDA}:
                raise ValueError(
                    "ensembles combine posterior probabilities, which least-squares "
                    "members do not produce; pass allow_least_squares=True to average "
                    "their softmaxed scores anyway"
                )
        n_classes = {w.num_classes for _, w in self.members}
        n_inputs = {layer.num_inputs for layer, _ in self.members}
        if len(n_classes) != 1:
            raise ValueError(f"members disagree on class count: {sorted(n_classes)}")
        if len(n_inputs) != 1:
            raise ValueError(f"members disagree on input dimension: {sorted(n_inputs)}")
        seeds = [layer.seed for layer, _ in self.members]
        if len(set(seeds)) != len(seeds):
            raise ValueError("member hidden-layer seeds must be pairwise distinct")

    @property
    def num_classes(self) -> int:
        return self.members[0][1].num_classes

    @property
    def num_inputs(self) -> int:
        return self.members[0][0].num_inputs


def combine_posteriors(per_member: list[np.ndarray]) -> np.ndarray:
    """Unweighted entrywise mean of member posterior matrices.

    Members are summed in list order, so the result is deterministic for a
    given member ordering (and permutation-invariant up to float
    reassociation).
    """
    if len(per_member) == 0:
        raise ValueError("cannot combine an empty list of posteriors")
    first = as_matrix(per_member[0], "posteriors[0]")
    total = first.copy()
    for i, p in enumerate(per_member[1:], start=1):
        p = as_matrix(p, f"posteriors[{i}]")
        if p.shape != first.shape:
            raise ValueError(f"posteriors[{i}] has shape {p.shape}, expected {first.shape}")
        total += p
    total /= len(per_member)
    return total


def ensemble_predict(model: EnsembleModel, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Averaged posteriors and predicted labels for a batch of inputs."""
    x = as_matrix(x, "x")
    if x.shape[0] != model.num_inputs:
        raise ValueError(f"input has {x.shape[0]} features, ensemble expects {model.num_inputs}")
    per_member = [posteriors(score(w, forward_hidden(layer, x))) for layer, w in model.members]
    combined = combine_posteriors(per_member)
    return combined, classify(combined)


# --- manifest --------------------------------------------------------------
# The manifest is a JSON file listing member weight-file paths (relative to
# the manifest's directory unless absolute) plus the shared metadata that
# every member must match.


def save_ensemble(manifest_path, model: EnsembleModel, weight_paths=None) -> list[str]:
    """Write member weight files plus the JSON manifest tying them together.

    Member files default to ``<manifest stem>.member<i>.elmw`` next to the
    manifest. Returns the member file paths.
    """
    manifest_path = Path(manifest_path)
    if weight_paths is None:
        weight_paths = [
            manifest_path.with_suffix("").name + f".member{i}.elmw"
            for i in range(len(model.members))
        ]
    if len(weight_paths) != len(model.members):
        raise ValueError(f"{len(weight_paths)} paths for {len(model.members)} members")
    resolved = []
    for rel, (layer, weights) in zip(weight_paths, model.members):
        p = Path(rel)
        full = p if p.is_absolute() else manifest_path.parent / p
        save_model(full, layer, weights)
        resolved.append(str(full))
    manifest = {
        "members": [str(p) for p in weight_paths],
        "num_classes": model.num_classes,
        "num_inputs": model.num_inputs,
        "allow_least_squares": model.allow_least_squares,
    }
    with open(manifest_path, "w") as f:
        json.dump(manifest, f, indent=2)
        f.write("\n")
    return resolved


def load_ensemble(manifest_path) -> EnsembleModel:
    manifest_path = Path(manifest_path)
    with open(manifest_path) as f:
        manifest = json.load(f)
    members = []
    for rel in manifest["members"]:
        p = Path(rel)
        full = p if p.is_absolute() else manifest_path.parent / p
        members.append(load_model(full))
    model = EnsembleModel(
        members=tuple(members),
        allow_least_squares=bool(manifest.get("allow_least_squares", False)),
    )
    for key, got in (("num_classes", model.num_classes), ("num_inputs", model.num_inputs)):
        if key in manifest and manifest[key] != got:
            raise ValueError(f"manifest says {key}={manifest[key]} but members have {got}")
    return model
