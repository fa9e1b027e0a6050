"""Deterministic named random streams derived from one master seed.

Every stage of an experiment (data generation, parameter init, training
noise, sampling, evaluation) pulls from its own named stream so that any
stage can be replayed in isolation.  Streams are derived via
``numpy.random.SeedSequence(master_seed, spawn_key=(stream_id, index))``,
which is stable across processes and numpy versions.
"""

from __future__ import annotations

import numpy as np

# Fixed registry; never reorder or renumber, or replay breaks.
STREAM_IDS = {
    "data": 0,
    "init": 1,
    "train": 2,
    "sample": 3,
    "eval": 4,
    "val": 5,
    "predictor": 6,
}


def named_stream(master_seed: int, name: str, index: int = 0) -> np.random.Generator:
    """Return the generator for sub-stream `name` of `master_seed`.

    `index` distinguishes repeated uses of the same stream kind (e.g. one
    training stream per strategy).
    """
    try:
        stream_id = STREAM_IDS[name]
    except KeyError:
        raise ValueError(f"unknown stream name {name!r}; known: {sorted(STREAM_IDS)}")
    seq = np.random.SeedSequence(int(master_seed), spawn_key=(stream_id, int(index)))
    return np.random.default_rng(seq)
