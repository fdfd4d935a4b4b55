"""Moments of empirical distributions.

All moments are population moments (divisor N): mean, variance, and the
standardized third and fourth central moments. Degenerate distributions
(empty, a single point, or zero spread) get zeros for the moments they
cannot define.
"""

from __future__ import annotations

import math
import numbers
from fractions import Fraction
from typing import Sequence

from .model import Moments


def _all_ints(samples) -> bool:
    return all(isinstance(x, numbers.Integral) for x in samples)


def raw_moments(samples: Sequence[float]) -> Moments:
    """Mean, variance, skewness and kurtosis of ``samples``.

    Integer samples (block heights, height intervals) take the exact
    power-sum route; anything else a compensated two-pass float route.
    """
    n = len(samples)
    if n == 0:
        return Moments()
    if _all_ints(samples):
        return _int_moments(samples, min_shift=False)
    xs = [float(x) for x in samples]
    mean = math.fsum(xs) / n
    if n == 1 or min(xs) == max(xs):
        return Moments(xs[0] if n == 1 else mean, 0.0, 0.0, 0.0, n)
    d = [x - mean for x in xs]
    # second pass removes the rounding left in the mean
    corr = math.fsum(d) / n
    mean += corr
    d = [v - corr for v in d]
    m2 = math.fsum(v * v for v in d) / n
    if m2 <= 0.0:
        return Moments(mean, 0.0, 0.0, 0.0, n)
    # standardized moments from deviations scaled to [-1, 1], so tiny spreads
    # cannot underflow
    scale = max(abs(v) for v in d)
    u = [v / scale for v in d]
    u2 = math.fsum(v * v for v in u) / n
    c3 = math.fsum(v * v * v for v in u) / n
    c4 = math.fsum((v * v) * (v * v) for v in u) / n
    return Moments(mean, m2, c3 / u2**1.5, c4 / (u2 * u2), n)


def min_shifted_moments(samples: Sequence[float]) -> Moments:
    """Like :func:`raw_moments`, but the first moment is taken after
    subtracting the sample minimum. Central moments are unchanged."""
    if len(samples) == 0:
        return Moments()
    if _all_ints(samples):
        return _int_moments(samples, min_shift=True)
    lo = min(samples)
    m = raw_moments([x - lo for x in samples])
    return Moments(m.m1, m.m2, m.m3, m.m4, m.sample_count)


class IntMomentAccumulator:
    """Single-pass moments of an integer stream using exact power sums.

    Values are offset by the first sample so the sums stay small; the
    offset cancels in every central moment and in the min-shifted mean.
    """

    __slots__ = ("n", "origin", "s1", "s2", "s3", "s4", "lo")

    def __init__(self) -> None:
        self.n = 0
        self.origin = 0
        self.s1 = self.s2 = self.s3 = self.s4 = 0
        self.lo = 0

    def add(self, x: int) -> None:
        if self.n == 0:
            self.origin = x
        v = x - self.origin
        v2 = v * v
        self.n += 1
        self.s1 += v
        self.s2 += v2
        self.s3 += v2 * v
        self.s4 += v2 * v2
        if v < self.lo:
            self.lo = v

    def moments(self, min_shift: bool) -> Moments:
        n = self.n
        if n == 0:
            return Moments()
        s1, s2, s3, s4 = self.s1, self.s2, self.s3, self.s4
        mean = Fraction(s1, n)
        m1 = float(mean - self.lo) if min_shift else float(mean + self.origin)
        # n^k-scaled central moments, exact
        c2 = n * s2 - s1 * s1
        if n == 1 or c2 == 0:
            return Moments(m1, 0.0, 0.0, 0.0, n)
        c3 = n * n * s3 - 3 * n * s1 * s2 + 2 * s1**3
        c4 = n**3 * s4 - 4 * n * n * s1 * s3 + 6 * n * s1 * s1 * s2 - 3 * s1**4
        m2 = Fraction(c2, n * n)
        # the powers of n cancel in both standardized ratios
        m3 = float(Fraction(c3, c2)) / math.sqrt(c2)
        m4 = float(Fraction(c4, c2 * c2))
        return Moments(m1, float(m2), m3, m4, n)


def _int_moments(samples, min_shift: bool) -> Moments:
    acc = IntMomentAccumulator()
    for x in samples:
        acc.add(int(x))
    return acc.moments(min_shift)
