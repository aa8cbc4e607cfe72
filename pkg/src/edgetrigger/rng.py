"""Deterministic random streams keyed by (seed, node, purpose).

Streams come from ``numpy.random.SeedSequence`` spawn keys, so a node's noise
never depends on how many other nodes exist, in which order they are
simulated, or how many worker processes share the work.
"""

from __future__ import annotations

import numpy as np

PURPOSES = ("thermal", "emi_phase", "bursts", "events", "network", "training")


def derive_node_stream(
    seed: int,
    node_id: int,
    purpose: str,
    *subkey: int,
    node_count: int | None = None,
) -> np.random.Generator:
    """Return an independent generator for one (seed, node, purpose) triple.

    ``subkey`` further splits a purpose, e.g. per block of frames, so that
    random access into a long stream stays cheap.
    """
    if purpose not in PURPOSES:
        raise ValueError(f"unknown stream purpose {purpose!r}")
    if node_id < 0 or (node_count is not None and node_id >= node_count):
        raise ValueError(f"node_id {node_id} out of range")
    key = (int(node_id), PURPOSES.index(purpose), *(int(k) for k in subkey))
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))
