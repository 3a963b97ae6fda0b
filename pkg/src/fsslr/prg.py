"""Deterministic pseudorandomness: AES-128-CTR keyed by 16-byte seeds.

Expansion is a pure function of (seed, counter, length): the counter selects
a disjoint 2^64-block segment of the keystream, so distinct counters never
overlap. Sub-seeds for independent roles (dealer batches, key trees) are
derived by hashing, never by reusing counters.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np
from cryptography.hazmat.primitives.ciphers import Cipher, algorithms, modes

from .ring import FixedPointConfig, RingMatrix, DEFAULT_CONFIG

SEED_BYTES = 16


@dataclass(frozen=True)
class PrgSeed:
    """A 16-byte PRG key plus a message counter."""

    seed: bytes
    counter: int = 0

    def __post_init__(self):
        if len(self.seed) != SEED_BYTES:
            raise ValueError(f"seed must be {SEED_BYTES} bytes, got {len(self.seed)}")
        if self.counter < 0:
            raise ValueError("counter must be non-negative")

    @classmethod
    def from_int(cls, value: int, counter: int = 0) -> "PrgSeed":
        return cls(int(value).to_bytes(SEED_BYTES, "little", signed=False), counter)


def expand_bytes(seed: PrgSeed, nbytes: int) -> bytes:
    """Keystream bytes for (seed, counter); identical inputs, identical output."""
    nonce = seed.counter.to_bytes(8, "big") + bytes(8)
    enc = Cipher(algorithms.AES(seed.seed), modes.CTR(nonce)).encryptor()
    return enc.update(bytes(nbytes))


def expand_matrix(seed: PrgSeed, rows: int, cols: int,
                  cfg: FixedPointConfig = DEFAULT_CONFIG) -> RingMatrix:
    """A uniform rows x cols ring matrix determined by (seed, counter, shape)."""
    raw = expand_bytes(seed, rows * cols * (cfg.ell // 8))
    arr = np.frombuffer(raw, dtype=cfg.dtype).reshape(rows, cols)
    return RingMatrix(arr.copy(), cfg)


def derive_seed(seed: PrgSeed, *labels) -> PrgSeed:
    """A fresh independent seed bound to (seed, labels), counter reset to 0."""
    h = hashlib.sha256()
    h.update(seed.seed)
    for label in labels:
        h.update(b"/")
        h.update(str(label).encode())
    return PrgSeed(h.digest()[:SEED_BYTES], 0)


class PrgStream:
    """Stateful view over a PrgSeed that bumps the counter per draw."""

    def __init__(self, seed: PrgSeed):
        self._key = seed.seed
        self._counter = seed.counter

    def _next(self) -> PrgSeed:
        s = PrgSeed(self._key, self._counter)
        self._counter += 1
        return s

    def bytes(self, nbytes: int) -> bytes:
        return expand_bytes(self._next(), nbytes)

    def matrix(self, rows: int, cols: int, cfg: FixedPointConfig = DEFAULT_CONFIG) -> RingMatrix:
        return expand_matrix(self._next(), rows, cols, cfg)

    def words(self, count: int, cfg: FixedPointConfig = DEFAULT_CONFIG) -> np.ndarray:
        raw = self.bytes(count * (cfg.ell // 8))
        return np.frombuffer(raw, dtype=cfg.dtype).copy()

    def seeds(self, count: int) -> np.ndarray:
        """(count, 16) uint8 array of fresh tree seeds."""
        raw = self.bytes(count * SEED_BYTES)
        return np.frombuffer(raw, dtype=np.uint8).reshape(count, SEED_BYTES).copy()

    def fork(self, *labels) -> "PrgStream":
        return PrgStream(derive_seed(PrgSeed(self._key, 0), *labels))
