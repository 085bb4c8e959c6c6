"""Seed splitting: every random stream derives from one 64-bit root seed."""

from __future__ import annotations

import hashlib
import random


def derive_seed(seed: int, *labels: object) -> int:
    h = hashlib.blake2b(digest_size=8)
    h.update(str(int(seed) & 0xFFFFFFFFFFFFFFFF).encode())
    for label in labels:
        h.update(b"\x00" + str(label).encode())
    return int.from_bytes(h.digest(), "big")


def make_rng(seed: int, *labels: object) -> random.Random:
    return random.Random(derive_seed(seed, *labels))
