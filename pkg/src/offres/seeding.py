"""Deterministic per-job seeds derived from a master seed."""
from __future__ import annotations

import hashlib


def derive_seed(master_seed: int, *job_key) -> int:
    """64-bit seed from a keyed BLAKE2b hash of ``job_key``.

    The master seed is the hash key, so distinct keys under one master seed
    (and one key under distinct master seeds) give independent seeds.  Key
    elements are serialized with ``repr`` and must be ints, floats or strings
    (or tuples of them).
    """
    master_seed = int(master_seed)
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    key = master_seed.to_bytes(max(1, (master_seed.bit_length() + 7) // 8), "little")
    if len(key) > 64:
        raise ValueError("master seed too large")
    h = hashlib.blake2b(repr(tuple(job_key)).encode(), digest_size=8, key=key, person=b"offres-seed")
    return int.from_bytes(h.digest(), "little")
