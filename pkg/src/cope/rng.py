"""Deterministic random streams, one per concern, split from a master seed."""

from __future__ import annotations

import numpy as np

_CONCERNS = {
    "init": 0,
    "data": 1,
    "noise": 2,
    "diag": 3,
    "verify": 4,
    "probe": 5,
}


def stream(master_seed: int, concern: str, index: int = 0) -> np.random.Generator:
    """Generator for (`concern`, `index`), independent of every other stream.

    The spawn key acts as a counter: adding a new concern or index never
    perturbs draws from existing streams.
    """
    if concern not in _CONCERNS:
        raise ValueError(
            f"unknown rng concern '{concern}'; expected one of {sorted(_CONCERNS)}"
        )
    if not 0 <= int(master_seed) < 2**64:
        raise ValueError(f"master seed {master_seed} outside [0, 2**64)")
    ss = np.random.SeedSequence(
        int(master_seed), spawn_key=(_CONCERNS[concern], int(index))
    )
    return np.random.default_rng(ss)
