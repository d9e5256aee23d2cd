"""Per-utterance random streams derived from a global seed."""

import hashlib

import numpy as np


def derive_seed(global_seed: int, utterance_id: str) -> int:
    """64-bit seed from ``(global_seed, utterance_id)``, stable across processes and platforms."""
    digest = hashlib.blake2b(
        f"{int(global_seed)}\x1f{utterance_id}".encode("utf-8"), digest_size=8
    ).digest()
    return int.from_bytes(digest, "little")


def utterance_rng(global_seed: int, utterance_id: str) -> np.random.Generator:
    return np.random.default_rng(derive_seed(global_seed, utterance_id))
