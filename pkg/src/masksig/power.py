"""Exact power of the randomized sign test and its inversion to a sample size.

The power at success probability s (the chance a single effect exceeds m0
under the alternative) is

    H(N, alpha, s) = sf_{N,s}(T) + gamma(N, T, alpha) * pmf_{N,s}(T)

with T the critical value at s = 1/2. At s = 1/2 this collapses to alpha
exactly. For s > 1/2 the power never decreases in N, but it climbs in uneven
steps as T jumps, so the sample size inversion scans every N in a
geometrically located bracket instead of trusting smooth bisection.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from masksig.binom import BinomSpec, pmf, sf
from masksig.effects import EffectVector
from masksig.sign_test import critical_value, gamma

__all__ = ["PowerQuery", "power", "required_sample_size", "pilot_success_fraction"]

_SIZE_CAP = 100_000_000


@dataclass(frozen=True)
class PowerQuery:
    """CLI-facing query: evaluate power at N, or invert for target_power."""

    s: float
    alpha: float
    N: int | None = None
    target_power: float | None = None

    def __post_init__(self) -> None:
        if not 0.0 < self.alpha < 1.0:
            raise ValueError("alpha must lie strictly in (0, 1)")
        if (self.N is None) == (self.target_power is None):
            raise ValueError("exactly one of N / target_power must be given")
        if self.N is None:
            if not 0.5 < self.s < 1.0:
                raise ValueError("sample-size inversion needs s strictly in (1/2, 1)")
            if not self.alpha < self.target_power < 1.0:
                raise ValueError("target power must lie strictly in (alpha, 1)")
        elif not 0.0 < self.s < 1.0:
            raise ValueError("s must lie strictly in (0, 1)")


def power(N: int, alpha: float, s: float) -> float:
    """Exact rejection probability when each effect independently exceeds m0 with probability s."""
    if N < 1:
        raise ValueError("N must be >= 1")
    if not 0.0 < s < 1.0:
        raise ValueError("s must lie strictly in (0, 1)")
    T = critical_value(N, alpha)
    g = min(max(gamma(N, T, alpha), 0.0), 1.0)
    alt = BinomSpec(N, s)
    return sf(alt, T) + g * pmf(alt, T)


def required_sample_size(s: float, alpha: float, target_power: float) -> int:
    """Smallest N <= 1e8 with power(N, alpha, s) >= target_power.

    Doubles N until the target is met, then scans every N in the refined
    bracket so the stepwise jumps in power cannot hide the first crossing.
    Raises if the cap is reached, reporting the best (N, power) pair seen.
    """
    if not 0.5 < s < 1.0:
        raise ValueError("s must lie strictly in (1/2, 1)")
    if not alpha < target_power < 1.0:
        raise ValueError("target power must lie strictly in (alpha, 1)")
    lo, hi = 0, 1
    best_n, best_h = 1, 0.0
    while True:
        h = power(hi, alpha, s)
        if h > best_h:
            best_n, best_h = hi, h
        if h >= target_power:
            break
        if hi >= _SIZE_CAP:
            raise ValueError(
                f"target power {target_power} not reached by N = {_SIZE_CAP}; "
                f"best so far: power({best_n}) = {best_h:.6f}"
            )
        lo, hi = hi, min(2 * hi, _SIZE_CAP)
    for n in range(lo + 1, hi):
        if power(n, alpha, s) >= target_power:
            return n
    return hi


def pilot_success_fraction(effects: EffectVector, m0: float = 0.0) -> float:
    """Fraction of pilot effects above m0 — a plug-in estimate of s, nothing more."""
    values = effects.effects
    return float(np.count_nonzero(values > m0)) / float(values.size)
