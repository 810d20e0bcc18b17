"""Bernoulli bitstream encoding of signed values against a shared exponent.

A value x with |x| <= 2^E is carried as (sign, bitstream): event k emits a 1
when |x| >= w_k / 2^16 * 2^E for the k-th pseudo-random word w_k, so
P(bit = 1) tracks |x| / 2^E. The threshold is built from the word by exponent
adjustment alone (ldexp), mirroring a comparator datapath with no multiplier
or divider. x = 0 is special-cased to the all-zero stream, which annihilates
products regardless of the partner stream.

Bitstreams are packed LSB-first: bit k of the integer is event k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ContractError, DomainError
from .lfsr import WIDTH, Lfsr


@dataclass(frozen=True)
class StochasticSequence:
    """A sign bit plus seq_len Bernoulli events packed into an int."""

    bits: int
    sign: int
    seq_len: int

    def __post_init__(self):
        if self.seq_len < 1:
            raise DomainError("seq_len must be at least 1")
        if self.sign not in (0, 1):
            raise DomainError("sign must be 0 or 1")
        if not 0 <= self.bits < (1 << self.seq_len):
            raise DomainError("bits wider than seq_len")

    @property
    def popcount(self) -> int:
        return self.bits.bit_count()

    def event(self, k: int) -> int:
        if not 0 <= k < self.seq_len:
            raise DomainError(f"event index {k} out of range")
        return (self.bits >> k) & 1


@dataclass(frozen=True)
class VectorExponent:
    """Shared normalization exponent for one vector."""

    exponent: int
    is_zero_vector: bool


def vector_exponent(values) -> VectorExponent:
    """Smallest E with max |v| <= 2^E; zero vectors report E = 0 and a flag."""
    arr = np.asarray(values, dtype=np.float64)
    if arr.ndim != 1 or arr.size == 0:
        raise DomainError("expected a nonempty one-dimensional vector")
    if not np.all(np.isfinite(arr)):
        raise DomainError("vector entries must be finite")
    peak = float(np.max(np.abs(arr)))
    if peak == 0.0:
        return VectorExponent(0, True)
    frac, exp = math.frexp(peak)  # peak = frac * 2^exp, frac in [0.5, 1)
    if frac == 0.5:
        exp -= 1
    return VectorExponent(exp, False)


def threshold(word: int, exponent: int) -> float:
    """w / 2^16 scaled by 2^E, composed by exponent adjustment only."""
    return math.ldexp(word, exponent - WIDTH)


def encode_with_words(x: float, exponent: int, words) -> StochasticSequence:
    """Encode against caller-supplied pseudo-random words (one per event)."""
    _check_operand(x, exponent)
    if len(words) < 1:
        raise DomainError("need at least one word")
    sign = 1 if x < 0 else 0
    if x == 0:
        return StochasticSequence(0, 0, len(words))
    mag = abs(x)
    bits = 0
    for k, w in enumerate(words):
        if mag >= threshold(int(w), exponent):
            bits |= 1 << k
    return StochasticSequence(bits, sign, len(words))


def encode(x: float, exponent: int, rng: Lfsr, seq_len: int) -> StochasticSequence:
    """Draw seq_len words from rng and encode x.

    Always consumes exactly seq_len draws, including for x = 0: the
    comparator runs every cycle even when the answer is known.
    """
    if seq_len < 1:
        raise DomainError("seq_len must be at least 1")
    return encode_with_words(x, exponent, rng.next_words(seq_len))


def probability_of(x: float, exponent: int) -> float:
    """Idealized event probability |x| / 2^E for an in-range operand."""
    _check_operand(x, exponent)
    return math.ldexp(abs(x), -exponent)


def encode_matrix(values: np.ndarray, exponent: int, words: np.ndarray):
    """Encode a whole vector against one shared word sequence.

    Returns (bits, signs): bits is a (n, seq_len) bool array, signs a (n,)
    uint8 array. Row i equals encode_with_words(values[i], exponent, words)
    bit for bit; all rows share the same words, which is the whole point of
    the reuse scheme.
    """
    vals = np.asarray(values, dtype=np.float64)
    w = np.asarray(words, dtype=np.uint16)
    if vals.ndim != 1 or w.ndim != 1:
        raise ContractError("values and words must be one-dimensional")
    mags = np.abs(vals)
    if np.any(mags > math.ldexp(1.0, exponent)):
        raise DomainError(f"operand exceeds 2^{exponent}")
    thresholds = np.ldexp(w.astype(np.float64), exponent - WIDTH)
    bits = mags[:, None] >= thresholds[None, :]
    bits[vals == 0.0, :] = False
    signs = (vals < 0).astype(np.uint8)
    return bits, signs


def pack_row(row: np.ndarray) -> int:
    """Pack one bool row (LSB-first) into the integer form used by scalars."""
    out = 0
    for k in range(row.shape[0] - 1, -1, -1):
        out = (out << 1) | int(row[k])
    return out


def _check_operand(x: float, exponent: int) -> None:
    if not math.isfinite(x):
        raise DomainError("operand must be finite")
    if abs(x) > math.ldexp(1.0, exponent):
        raise DomainError(f"|x| = {abs(x)} exceeds 2^{exponent}")
