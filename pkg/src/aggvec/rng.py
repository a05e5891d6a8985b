"""Self-contained seeded PRNG for reproducible vocabulary partitions.

Partitions must be reconstructible from (vocab_size, d, seed) alone, in any
language, so the generator is pinned here instead of delegating to numpy:

- Seeding: splitmix64 expands the 64-bit seed into the 256-bit state
  (four successive splitmix64 outputs).
- Stream: xoshiro256** (Blackman & Vigna 2018), 64-bit output words.
- Bounded draw: multiply-shift, ``(next_u64() * bound) >> 64``.
- Shuffle: Fisher-Yates from the top: for i = n-1 .. 1 swap a[i] with
  a[j], j = bounded(i + 1).

The name below is recorded in partition files so foreign readers can verify
which algorithm produced the explicit arrays they ship.
"""

from __future__ import annotations

_MASK64 = (1 << 64) - 1

PRNG_NAME = "splitmix64-seeded xoshiro256** / multiply-shift bounds / top-down fisher-yates"


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64, state


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


class Xoshiro256StarStar:
    """xoshiro256** with a splitmix64-expanded 64-bit seed."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        s = []
        for _ in range(4):
            word, state = _splitmix64(state)
            s.append(word)
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def next_below(self, bound: int) -> int:
        """Uniform-ish integer in [0, bound) via multiply-shift."""
        if bound <= 0:
            raise ValueError("bound must be positive")
        return (self.next_u64() * bound) >> 64

    def next_unit(self) -> float:
        """Uniform float in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * (1.0 / (1 << 53))

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle, top-down."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]
