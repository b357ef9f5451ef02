"""Numerically exact binomial machinery: pmf, cdf/sf, and lower quantiles.

Everything downstream (tests, p-value intervals, confidence intervals, power)
reduces to evaluating the Binomial(N, s) mass function and its tails, for N
up to the millions. Mass values are computed in natural-log space using the
saddle-point form of the log-gamma factorial expansion (Stirling-error series
plus a stably-evaluated deviance term), which keeps the relative error near
machine precision uniformly in N. Tail probabilities are obtained by summing
the shorter tail, block by block from the dominant end, and complementing;
blocks stop once additional terms can no longer move the accumulated sum.

The quantile convention is the lower quantile: quantile(spec, level) returns
min{n : cdf(n) >= level}. cdf and sf are exact complements of each other as
computed, which callers rely on when forming boundary randomization
probabilities without cancellation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

__all__ = ["BinomSpec", "log_pmf", "pmf", "cdf", "sf", "quantile"]

# Stirling-error table for small arguments: stirlerr(n) = log(n!) - log(sqrt(2*pi*n) (n/e)^n).
_STIRLERR_SMALL = tuple(
    0.0 if n == 0 else
    math.lgamma(n + 1.0) - (0.5 * math.log(2.0 * math.pi * n) + n * (math.log(n) - 1.0))
    for n in range(16)
)

_BLOCK = 512          # tail summation block width
_TAIL_EPS = 1e-19     # stop extending a tail once terms drop below this fraction of the sum


@dataclass(frozen=True)
class BinomSpec:
    """A Binomial(trials, success_prob) reference distribution."""

    trials: int
    success_prob: float

    def __post_init__(self) -> None:
        if int(self.trials) != self.trials or self.trials < 1:
            raise ValueError(f"trials must be a positive integer, got {self.trials!r}")
        if not 0.0 < float(self.success_prob) < 1.0:
            raise ValueError(
                f"success_prob must lie strictly in (0, 1), got {self.success_prob!r}"
            )


def _stirlerr(n: np.ndarray) -> np.ndarray:
    """Stirling-series correction log(n!) - Stirling(n), vectorized, n >= 1."""
    n = np.asarray(n, dtype=float)
    out = np.empty_like(n)
    small = n < 16
    if small.any():
        out[small] = np.asarray(_STIRLERR_SMALL, dtype=float)[n[small].astype(int)]
    big = ~small
    if big.any():
        nn = n[big]
        n2 = nn * nn
        out[big] = (
            1.0 / (12.0 * nn)
            - 1.0 / (360.0 * nn * n2)
            + 1.0 / (1260.0 * nn * n2 * n2)
            - 1.0 / (1680.0 * nn * n2 * n2 * n2)
            + 1.0 / (1188.0 * nn * n2 * n2 * n2 * n2)
        )
    return out


def _bd0(x: np.ndarray, m: np.ndarray) -> np.ndarray:
    """Binomial deviance x*log(x/m) + m - x, evaluated without cancellation.

    For x near m the direct formula subtracts nearly equal quantities; a
    convergent series in (x-m)/(x+m) is used there instead.
    """
    x, m = np.broadcast_arrays(np.asarray(x, dtype=float), np.asarray(m, dtype=float))
    out = np.empty(x.shape)
    near = np.abs(x - m) < 0.1 * (x + m)
    far = ~near
    if far.any():
        xf, mf = x[far], m[far]
        out[far] = xf * np.log(xf / mf) + mf - xf
    if near.any():
        xn, mn = x[near], m[near]
        v = (xn - mn) / (xn + mn)
        s = (xn - mn) * v
        ej = 2.0 * xn * v
        v2 = v * v
        for j in range(1, 1000):
            ej = ej * v2
            s_next = s + ej / (2 * j + 1)
            if np.all(s_next == s):
                s = s_next
                break
            s = s_next
        out[near] = s
    return out


def _log_pmf_block(trials: int, prob: float, ks: np.ndarray) -> np.ndarray:
    """log pmf over an integer array of in-range counts ks (0 <= k <= trials)."""
    ks = np.asarray(ks, dtype=float)
    n = float(trials)
    out = np.empty(ks.shape)
    at_zero = ks == 0.0
    at_n = ks == n
    mid = ~(at_zero | at_n)
    if at_zero.any():
        out[at_zero] = n * math.log1p(-prob)
    if at_n.any():
        out[at_n] = n * math.log(prob)
    if mid.any():
        k = ks[mid]
        lc = (
            _stirlerr(np.full_like(k, n))
            - _stirlerr(k)
            - _stirlerr(n - k)
            - _bd0(k, n * prob)
            - _bd0(n - k, n * (1.0 - prob))
        )
        # log of the Gaussian prefactor sqrt(N / (2 pi k (N-k)))
        lf = math.log(2.0 * math.pi) + np.log(k) + np.log1p(-k / n)
        out[mid] = lc - 0.5 * lf
    return out


def _lower_tail(trials: int, prob: float, n: int) -> float:
    """Sum of pmf over k = 0..n, accumulated downward from the dominant end."""
    acc = 0.0
    hi = n
    while hi >= 0:
        lo = max(0, hi - _BLOCK + 1)
        block = np.exp(_log_pmf_block(trials, prob, np.arange(lo, hi + 1)))
        acc += float(block.sum())
        if block[0] <= _TAIL_EPS * acc:
            break
        hi = lo - 1
    return acc


def _upper_tail(trials: int, prob: float, n: int) -> float:
    """Sum of pmf over k = n+1..trials, accumulated upward from the dominant end."""
    acc = 0.0
    lo = n + 1
    while lo <= trials:
        hi = min(trials, lo + _BLOCK - 1)
        block = np.exp(_log_pmf_block(trials, prob, np.arange(lo, hi + 1)))
        acc += float(block.sum())
        if block[-1] <= _TAIL_EPS * acc:
            break
        lo = hi + 1
    return acc


@lru_cache(maxsize=200_000)
def _tails(trials: int, prob: float, n: int) -> tuple[float, float]:
    """(cdf, sf) at n; the pair sums to 1 exactly as floating-point values."""
    if n < 0:
        return 0.0, 1.0
    if n >= trials:
        return 1.0, 0.0
    if n <= trials * prob:
        lower = min(_lower_tail(trials, prob, n), 1.0)
        return lower, 1.0 - lower
    upper = min(_upper_tail(trials, prob, n), 1.0)
    return 1.0 - upper, upper


def log_pmf(spec: BinomSpec, n: int) -> float:
    """Natural-log probability mass at n.

    Raises for n outside [0, trials]; the mass there is identically zero and a
    request for it is treated as a caller error.
    """
    if n < 0 or n > spec.trials:
        raise ValueError(f"count {n} outside [0, {spec.trials}]")
    return float(_log_pmf_block(spec.trials, float(spec.success_prob), np.array([n]))[0])


def pmf(spec: BinomSpec, n: int) -> float:
    """Probability mass at n, for 0 <= n <= trials."""
    return math.exp(log_pmf(spec, n))


def cdf(spec: BinomSpec, n: int) -> float:
    """P(X <= n). Defined for every integer: 0 below the support, 1 at or above trials."""
    return _tails(spec.trials, float(spec.success_prob), int(n))[0]


def sf(spec: BinomSpec, n: int) -> float:
    """P(X > n), the exact floating-point complement of cdf(spec, n)."""
    return _tails(spec.trials, float(spec.success_prob), int(n))[1]


def quantile(spec: BinomSpec, level: float) -> int:
    """Lower quantile: min{n : P(X <= n) >= level}, for level in (0, 1)."""
    if not 0.0 < level < 1.0:
        raise ValueError(f"level must lie strictly in (0, 1), got {level!r}")
    if cdf(spec, 0) >= level:
        return 0
    lo, hi = 0, spec.trials  # cdf(lo) < level, cdf(hi) = 1 >= level
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cdf(spec, mid) >= level:
            hi = mid
        else:
            lo = mid
    return hi
