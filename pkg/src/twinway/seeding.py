"""Named, independently seeded RNG streams derived from one master seed.

Each sampling dimension gets its own generator so that changing, say, the
EV-parameter draws cannot perturb demand or speed jitter. Stream identity is
(master seed, namespace id, stream id), which is platform-stable.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

_STREAM_IDS = {
    "euro_class": 0,
    "ev_params": 1,
    "demand": 2,
    "jitter": 3,
    "assignment": 4,
    "noise": 5,
}

_NAMESPACE_IDS = {
    "": 0,
    "pidt": 1,
}


@dataclass(frozen=True)
class RngStreams:
    """One generator per sampling dimension."""

    euro_class: np.random.Generator
    ev_params: np.random.Generator
    demand: np.random.Generator
    jitter: np.random.Generator
    assignment: np.random.Generator
    noise: np.random.Generator


def stream(master_seed: int, name: str, namespace: str = "") -> np.random.Generator:
    ss = np.random.SeedSequence(
        (int(master_seed), _NAMESPACE_IDS[namespace], _STREAM_IDS[name]))
    return np.random.default_rng(ss)


def derive_streams(master_seed: int, namespace: str = "") -> RngStreams:
    return RngStreams(**{name: stream(master_seed, name, namespace)
                         for name in _STREAM_IDS})


def stream_seed_entropy(master_seed: int, namespace: str = "") -> dict[str, list[int]]:
    """Entropy tuples per stream, recorded in run manifests for reproducibility."""
    return {name: [int(master_seed), _NAMESPACE_IDS[namespace], sid]
            for name, sid in _STREAM_IDS.items()}
