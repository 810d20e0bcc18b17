"""16-bit maximal-length Fibonacci LFSR used as the uniform pseudo-random source.

Feedback polynomial x^16 + x^15 + x^13 + x^4 + 1, taps {16, 15, 13, 4}.
One emitted word advances the register 16 single-bit steps, so successive
words are produced by 16 applications of the shift recurrence rather than
overlapping register snapshots. The all-zero register is absorbing and
therefore rejected as a seed; every nonzero word appears exactly once per
period of 2^16 - 1 emissions.
"""

from __future__ import annotations

import math

import numpy as np

from .errors import SeedError

WIDTH = 16
TAPS = (16, 15, 13, 4)
PERIOD = (1 << WIDTH) - 1

# tap t contributes register bit (WIDTH - t)
_TAP_SHIFTS = tuple(WIDTH - t for t in TAPS)
_STEPS_PER_WORD = WIDTH

_word_table: np.ndarray | None = None


def step_bit(register: int) -> int:
    """One shift of the Fibonacci recurrence (the defining single-bit step)."""
    fb = 0
    for s in _TAP_SHIFTS:
        fb ^= register >> s
    return (register >> 1) | ((fb & 1) << 15)


def _build_word_table() -> np.ndarray:
    """register -> register after 16 single-bit steps, for all 2^16 states."""
    states = np.arange(1 << WIDTH, dtype=np.uint32)
    fb = np.zeros_like(states)
    for s in _TAP_SHIFTS:
        fb ^= states >> s
    table = ((states >> 1) | ((fb & 1) << 15)).astype(np.uint16)
    for _ in range(4):  # compose the 1-step map up to 16 steps by squaring
        table = table[table]
    return table


def _table() -> np.ndarray:
    global _word_table
    if _word_table is None:
        _word_table = _build_word_table()
    return _word_table


def _check_seed(value: int) -> int:
    if not 0 < value <= 0xFFFF:
        raise SeedError(f"seed must be a nonzero 16-bit word, got {value:#x}")
    return value


class Lfsr:
    """Pseudo-random word generator with a draw counter for reuse audits."""

    __slots__ = ("register", "draws")

    def __init__(self, seed: int):
        self.register = _check_seed(seed)
        self.draws = 0

    def next_word(self) -> int:
        self.register = int(_table()[self.register])
        self.draws += 1
        return self.register

    def next_words(self, n: int) -> np.ndarray:
        """Draw n consecutive words as a uint16 array."""
        table = _table()
        out = np.empty(n, dtype=np.uint16)
        reg = self.register
        for i in range(n):
            reg = table[reg]
            out[i] = reg
        self.register = int(reg)
        self.draws += n
        return out

    def clone(self) -> "Lfsr":
        other = Lfsr.__new__(Lfsr)
        other.register = self.register
        other.draws = self.draws
        return other

    def __repr__(self) -> str:
        return f"Lfsr(register={self.register:#06x}, draws={self.draws})"


def uniform_fraction(word: int) -> float:
    """word / 2^16, an exact dyadic rational in [0, 1)."""
    return math.ldexp(word, -WIDTH)


def word_matrix(seeds: np.ndarray, n: int) -> np.ndarray:
    """Lockstep draws for many generators: row b holds Lfsr(seeds[b]).next_words(n).

    Equivalent to independent per-seed generators; used by the batched
    outer-product path.
    """
    table = _table()
    states = np.asarray(seeds, dtype=np.uint16)
    if states.ndim != 1:
        raise ValueError("seeds must be one-dimensional")
    if np.any(states == 0):
        raise SeedError("seed must be a nonzero 16-bit word")
    out = np.empty((states.shape[0], n), dtype=np.uint16)
    for k in range(n):
        states = table[states]
        out[:, k] = states
    return out
