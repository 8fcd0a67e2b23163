"""Deterministic random-stream derivation.

All randomness in this package flows through numpy's PCG64 generator. Seeds
for sub-tasks (one hidden layer per trial, one per ensemble member) are
derived by hashing an integer key path through ``numpy.random.SeedSequence``,
so any trial of a sweep can be reproduced in isolation, independently of the
order in which trials run.

Key conventions used by the harness:

* sweep trial:        (base_seed, fan_out, trial_index)
* ensemble member:    (base_seed, fan_out, repeat_index, member_index)
"""

from __future__ import annotations

import numpy as np


def spawn_seed(*parts: int) -> int:
    """Derive a single 64-bit seed from a path of non-negative integers."""
    for p in parts:
        if int(p) != p or p < 0:
            raise ValueError(f"seed path parts must be non-negative integers, got {parts!r}")
    ss = np.random.SeedSequence([int(p) for p in parts])
    return int(ss.generate_state(1, np.uint64)[0])


def make_rng(seed: int) -> np.random.Generator:
    """PCG64 generator for ``seed``; the single entry point for randomness."""
    if int(seed) != seed or seed < 0:
        raise ValueError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.Generator(np.random.PCG64(int(seed)))
