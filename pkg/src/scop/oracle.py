"""Reference answers the stochastic datapath is judged against.

Three independent routes:

* exact_outer: the true outer product in float64.
* analytic_moments: closed-form mean and variance of a single cell's output
  under the idealized event probabilities p = |x|/2^E_X * |d|/2^E_D, with
  the folded power-of-two scale applied. Per event the AND of two streams is
  Bernoulli(p), so the popcount is Binomial(seq_len, p).
* enumerate_unit_cell: exhaustive enumeration over a reduced word space with
  exact rational arithmetic, assuming nothing about the distribution shape.

empirical_stats runs the real engine over many seed pairs and reports
per-entry sample moments with a 95% confidence half-width.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .encoder import probability_of
from .engine import derive_seed_pairs, outer_product_many
from .errors import DomainError
from .unit_cell import MAX_SEQ_LEN, f_scale, f_scale_with_lr


def exact_outer(x, delta) -> np.ndarray:
    """Entry (j, i) = delta[j] * x[i] in float64."""
    x = np.asarray(x, dtype=np.float64)
    delta = np.asarray(delta, dtype=np.float64)
    if x.ndim != 1 or delta.ndim != 1:
        raise DomainError("expected one-dimensional vectors")
    return np.outer(delta, x)


def analytic_moments(
    x: float,
    delta: float,
    e_x: int,
    e_delta: int,
    seq_len: int,
    lr: float | None = None,
) -> tuple[float, float]:
    """Mean and variance of one cell's output before binary16 rounding.

    count ~ Binomial(seq_len, p) with p = (|x|/2^E_X)(|d|/2^E_D); the cell
    emits sign * count * F, F the folded scale. Rounding of the packed
    output is not modeled (exact for counts in range, and the subnormal
    grid error is below every tolerance used here).
    """
    p = probability_of(x, e_x) * probability_of(delta, e_delta)
    if lr is None:
        f = f_scale(e_x, e_delta, seq_len).value
    else:
        f = f_scale_with_lr(lr, e_x, e_delta, seq_len).value
    sign = -1.0 if (x < 0) != (delta < 0) else 1.0
    mean = sign * f * seq_len * p
    variance = f * f * seq_len * p * (1.0 - p)
    return mean, variance


@dataclass(frozen=True)
class EstimatorStats:
    """Per-entry sample moments across independent seed pairs."""

    mean: np.ndarray
    variance: np.ndarray
    trials: int
    confidence_halfwidth: np.ndarray  # 1.96 * sqrt(variance / trials)


def empirical_stats(
    x,
    delta,
    seq_len: int,
    trials: int,
    base_seed_x: int = 0xACE1,
    base_seed_delta: int = 0x2C9F,
    lr: float | None = None,
) -> EstimatorStats:
    """Sample moments of the engine's update entries over `trials` seed pairs.

    Seed pairs come from derive_seed_pairs over counters 0..trials-1, so the
    schedule is deterministic and collision-free within a trial.
    """
    if trials < 2:
        raise DomainError("need at least 2 trials for a variance")
    x = np.asarray(x, dtype=np.float16)
    delta = np.asarray(delta, dtype=np.float16)
    sx, sd = derive_seed_pairs(base_seed_x, base_seed_delta, np.arange(trials))

    shape = (delta.size, x.size)
    total = np.zeros(shape, dtype=np.float64)
    total_sq = np.zeros(shape, dtype=np.float64)
    chunk = 4096
    for lo in range(0, trials, chunk):
        hi = min(lo + chunk, trials)
        xs = np.broadcast_to(x, (hi - lo, x.size))
        ds = np.broadcast_to(delta, (hi - lo, delta.size))
        entries, _ = outer_product_many(xs, ds, seq_len, sx[lo:hi], sd[lo:hi], lr)
        e64 = entries.astype(np.float64)
        total += e64.sum(axis=0)
        total_sq += (e64 * e64).sum(axis=0)

    mean = total / trials
    variance = (total_sq - trials * mean * mean) / (trials - 1)
    np.maximum(variance, 0.0, out=variance)  # guard tiny negative residue
    halfwidth = 1.96 * np.sqrt(variance / trials)
    return EstimatorStats(mean, variance, trials, halfwidth)


def effective_probability(x: float, exponent: int, word_bits: int) -> Fraction:
    """Exact P(bit = 1) when words are i.i.d. uniform on {0 .. 2^word_bits - 1}.

    Counts the words w with |x| >= (w / 2^word_bits) * 2^exponent. For x != 0
    that is floor(q * 2^word_bits) + 1 words (capped at the word count),
    with q = |x| / 2^exponent; w = 0 always fires.
    """
    if word_bits < 1:
        raise DomainError("word_bits must be at least 1")
    if x == 0:
        return Fraction(0)
    space = 1 << word_bits
    q = Fraction(abs(x)) / Fraction(2) ** exponent
    if q > 1:
        raise DomainError("operand exceeds 2^exponent")
    hits = min(math.floor(q * space) + 1, space)
    return Fraction(hits, space)


def enumerate_unit_cell(
    x: float,
    delta: float,
    e_x: int,
    e_delta: int,
    seq_len: int,
    word_bits: int,
) -> tuple[Fraction, Fraction]:
    """Exact output mean and variance by brute force over all word tuples.

    Walks every combination of seq_len words per operand drawn from the
    reduced i.i.d. space {0 .. 2^word_bits - 1}, applies the encode rule and
    the AND/popcount/scale datapath with exact rationals, and returns the
    exact moments of the emitted value. Feasible only for tiny spaces;
    2 * seq_len * word_bits bits of state are enumerated.
    """
    if not 1 <= seq_len <= MAX_SEQ_LEN:
        raise DomainError(f"seq_len must be in [1, {MAX_SEQ_LEN}]")
    if word_bits < 1 or 2 * seq_len * word_bits > 20:
        raise DomainError("word space too large to enumerate")
    space = 1 << word_bits
    qx = Fraction(abs(x)) / Fraction(2) ** e_x
    qd = Fraction(abs(delta)) / Fraction(2) ** e_delta
    if qx > 1 or qd > 1:
        raise DomainError("operand exceeds its exponent range")

    def bit(q: Fraction, w: int) -> int:
        # encode rule: fire when |x| >= (w / 2^word_bits) * 2^E, i.e. q >= w / space
        if q == 0:
            return 0
        return 1 if q >= Fraction(w, space) else 0

    bits_x = [bit(qx, w) for w in range(space)]
    bits_d = [bit(qd, w) for w in range(space)]

    # per-event outcome for every (w_x, w_d) pair; events are separate axes,
    # so tensor-summing one axis per event walks every word tuple exactly once
    event = np.array(
        [[a & b for b in bits_d] for a in bits_x], dtype=np.int64
    ).reshape(-1)
    counts = event
    for _ in range(seq_len - 1):
        counts = (counts[:, None] + event[None, :]).reshape(-1)

    outcomes = Fraction(space) ** (2 * seq_len)
    f = Fraction(2) ** f_scale(e_x, e_delta, seq_len).exponent
    sign = -1 if (x < 0) != (delta < 0) else 1
    total = int(counts.sum())
    total_sq = int((counts * counts).sum())
    mean = sign * f * Fraction(total) / outcomes
    variance = f * f * Fraction(total_sq) / outcomes - mean * mean
    return mean, variance
