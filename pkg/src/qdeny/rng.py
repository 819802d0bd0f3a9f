"""Deterministic randomness plumbing shared by every simulation.

All random events in this package flow from a single 128-bit master seed
through named substreams, which makes every experiment a pure function of
its configuration and seed.

Two constructions live here:

``RandomStream``
    General-purpose stream backed by numpy's Philox counter-based bit
    generator. Substreams are derived by hashing (parent key, label, index)
    with SHA-256; streams under distinct labels are independent for every
    statistical purpose in this package.

``CounterModePrng``
    The covert-schedule expander. Block ``j`` of the keystream is
    ``SHA-256(key_be16 || j_be8)``, consumed as big-endian 32-bit words;
    integers below a bound come from rejection sampling on those words.
    It is keyed either with a 128-bit seed (the strong instance) or a
    16-bit seed (the deliberately breakable instance used to demonstrate
    covertness collapsing together with the generator).
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["RandomStream", "CounterModePrng", "WEAK_SEED_BITS", "STRONG_SEED_BITS"]

STRONG_SEED_BITS = 128
WEAK_SEED_BITS = 16

_DOMAIN = b"qdeny.rng.v1"


def _derive_key(parent: bytes, label: str, index: int) -> bytes:
    h = hashlib.sha256()
    h.update(_DOMAIN)
    h.update(parent)
    h.update(label.encode("utf-8"))
    h.update(int(index).to_bytes(8, "big"))
    return h.digest()[:16]


class RandomStream:
    """Seeded stream of random values with labeled substream derivation.

    Identical (seed, label, index) paths always produce identical values.
    Instances are cheap; experiments derive one substream per trial.
    """

    def __init__(self, seed: int | bytes, _key: bytes | None = None):
        if _key is not None:
            self._key = _key
        elif isinstance(seed, bytes):
            if len(seed) != 16:
                raise ValueError("byte seed must be exactly 16 bytes")
            self._key = seed
        else:
            seed = int(seed)
            if seed < 0 or seed >= 1 << 128:
                raise ValueError("integer seed must fit in 128 bits")
            self._key = seed.to_bytes(16, "big")
        self._gen = np.random.Generator(np.random.Philox(key=int.from_bytes(self._key, "big")))

    @property
    def key_hex(self) -> str:
        return self._key.hex()

    def substream(self, label: str, index: int = 0) -> "RandomStream":
        """Independent child stream for (label, index)."""
        return RandomStream(0, _key=_derive_key(self._key, label, index))

    # -- draws -------------------------------------------------------------

    def random(self) -> float:
        """One uniform draw in [0, 1)."""
        return float(self._gen.random())

    def uniforms(self, n: int) -> np.ndarray:
        return self._gen.random(int(n))

    def bit(self) -> int:
        return int(self._gen.integers(0, 2))

    def bits(self, n: int) -> np.ndarray:
        """Uniform bit vector of length n (dtype uint8)."""
        return self._gen.integers(0, 2, size=int(n), dtype=np.uint8)

    def integers(self, low: int, high: int | None = None, size=None):
        return self._gen.integers(low, high, size=size)

    def binomial(self, n, p, size=None):
        return self._gen.binomial(n, p, size=size)

    def choice_distinct(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), sorted ascending."""
        if k > n:
            raise ValueError(f"cannot draw {k} distinct values from {n}")
        picked = self._gen.choice(n, size=k, replace=False)
        return np.sort(picked)

    def permutation(self, n: int) -> np.ndarray:
        return self._gen.permutation(n)

    @property
    def generator(self) -> np.random.Generator:
        """Underlying numpy Generator, for bulk vectorized draws."""
        return self._gen


class CounterModePrng:
    """Keyed counter-mode keystream over SHA-256.

    block(j) = SHA-256(key as 16 bytes big-endian || j as 8 bytes big-endian)

    Each block yields eight big-endian uint32 words, consumed in order.
    ``key_bits`` only bounds the accepted key range; the construction is
    otherwise identical for the strong and weak instances.
    """

    def __init__(self, key: int, key_bits: int = STRONG_SEED_BITS):
        key = int(key)
        if key_bits not in (WEAK_SEED_BITS, STRONG_SEED_BITS):
            raise ValueError("key_bits must be 16 or 128")
        if key < 0 or key >= 1 << key_bits:
            raise ValueError(f"key out of range for {key_bits}-bit instance")
        self.key = key
        self.key_bits = key_bits
        self._key_bytes = key.to_bytes(16, "big")
        self._counter = 0
        self._buffer = np.empty(0, dtype=np.uint32)

    def _refill(self, n_words: int) -> None:
        blocks = []
        need = n_words - self._buffer.size
        n_blocks = (need + 7) // 8
        for _ in range(n_blocks):
            h = hashlib.sha256(self._key_bytes + self._counter.to_bytes(8, "big"))
            blocks.append(h.digest())
            self._counter += 1
        fresh = np.frombuffer(b"".join(blocks), dtype=">u4").astype(np.uint32)
        self._buffer = np.concatenate([self._buffer, fresh])

    def words(self, n_words: int) -> np.ndarray:
        """Next n_words uint32 keystream words."""
        if self._buffer.size < n_words:
            self._refill(n_words)
        out, self._buffer = self._buffer[:n_words], self._buffer[n_words:]
        return out

    def sample_distinct(self, n_slots: int, n_used: int) -> np.ndarray:
        """n_used distinct slot indices in [0, n_slots), sorted.

        Uniform words are rejection-filtered below the largest multiple of
        n_slots, reduced mod n_slots, and deduplicated in draw order.
        """
        if n_used > n_slots:
            raise ValueError(f"cannot schedule {n_used} of {n_slots} slots")
        if n_used == n_slots:
            return np.arange(n_slots, dtype=np.int64)
        limit = (1 << 32) - ((1 << 32) % n_slots)
        accepted = np.empty(0, dtype=np.int64)
        while True:
            u = self.words(max(16, int(1.2 * (n_used - accepted.size)) + 8))
            keep = u < limit
            accepted = np.concatenate([accepted, (u[keep] % n_slots).astype(np.int64)])
            _, first = np.unique(accepted, return_index=True)
            if first.size >= n_used:
                ordered = accepted[np.sort(first)]
                return np.sort(ordered[:n_used])
