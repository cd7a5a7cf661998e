"""Deterministic derivation of per-stage RNG seeds from one master seed.

Every randomized stage (plant generation, measurement noise, sketch
construction, ...) gets its own stream, keyed by a label and optional
indices, so changing one stage's draws never perturbs another's.
"""

import hashlib

import numpy as np


def derive_seed(master: int, *labels) -> int:
    """Hash ``(master, *labels)`` into a 63-bit seed.

    Labels may be strings or integers; the encoding is their repr, so the
    mapping is stable across runs and platforms.
    """
    text = repr((int(master),) + tuple(labels))
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big") & (2**63 - 1)


def make_generator(seed: int, rng: str = "philox") -> np.random.Generator:
    """Build the named counter-based generator for ``seed``.

    Only the Philox family is supported; the name is part of serialized
    experiment configs so results stay reproducible if alternatives are
    ever added.
    """
    if rng != "philox":
        raise ValueError(f"unsupported rng {rng!r}; expected 'philox'")
    return np.random.Generator(np.random.Philox(key=int(seed)))
