"""Deterministic PRNG (PCG32, O'Neill's pcg32_random_r variant).

All randomness in a session flows from one of these, seeded from the
config, so replays are reproducible bit for bit across platforms. State is
two 64-bit integers and can be captured/restored, which keeps pure-function
APIs (scheduler, spawner) honest.
"""

from __future__ import annotations

__all__ = ["Pcg32"]

_MASK64 = (1 << 64) - 1
_MULT = 6364136223846793005


class Pcg32:
    __slots__ = ("state", "inc")

    def __init__(self, seed: int, stream: int = 0):
        self.state = 0
        self.inc = ((stream << 1) | 1) & _MASK64
        self.next_u32()
        self.state = (self.state + (seed & _MASK64)) & _MASK64
        self.next_u32()

    @classmethod
    def from_state(cls, state: int, inc: int) -> "Pcg32":
        rng = cls.__new__(cls)
        rng.state = state
        rng.inc = inc
        return rng

    def state_tuple(self) -> tuple:
        return (self.state, self.inc)

    def next_u32(self) -> int:
        old = self.state
        self.state = (old * _MULT + self.inc) & _MASK64
        xorshifted = (((old >> 18) ^ old) >> 27) & 0xFFFFFFFF
        rot = old >> 59
        return ((xorshifted >> rot) | (xorshifted << ((-rot) & 31))) & 0xFFFFFFFF

    def random(self) -> float:
        """Uniform float in [0, 1)."""
        return self.next_u32() * 2.0**-32

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), unbiased via rejection."""
        if n <= 0:
            raise ValueError("randrange needs n > 0")
        threshold = (1 << 32) % n
        while True:
            r = self.next_u32()
            if r >= threshold:
                return r % n

    def uniform(self, lo: float, hi: float) -> float:
        return lo + (hi - lo) * self.random()

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]
