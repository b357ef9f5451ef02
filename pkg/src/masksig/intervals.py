"""Median importance score and exact confidence intervals from order statistics.

The randomized one-sided interval selects between two adjacent order
statistics, [delta_(N-T), inf) with probability 1 - gamma and
[delta_(N-T+1), inf) with probability gamma, which gives exact 1 - alpha
coverage of the median. The symmetric two-sided interval
[delta_(1+m), delta_(N-m)] uses the largest m with cdf(m) <= alpha/2 and has
coverage 1 - 2*cdf(m) >= 1 - alpha (conservative).

Order statistics are 1-based with sentinels delta_(0) = -inf and
delta_(N+1) = +inf.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from masksig.binom import BinomSpec, cdf, quantile
from masksig.effects import EffectVector
from masksig.sign_test import critical_value, gamma

__all__ = ["MedianScore", "CiResult", "median_score", "randomized_ci", "two_sided_ci"]


@dataclass(frozen=True)
class MedianScore:
    value: float
    n: int


@dataclass(frozen=True)
class CiResult:
    """One-sided randomized and/or symmetric two-sided CI for the median effect.

    Each constructor fills its own field group and leaves the other None.
    """

    alpha: float
    n: int
    # one-sided randomized interval
    lower1: float | None = None
    lower2: float | None = None
    prob_lower1: float | None = None
    selected_lower: float | None = None
    u: float | None = None
    # symmetric two-sided interval
    two_sided_lower: float | None = None
    two_sided_upper: float | None = None
    two_sided_coverage: float | None = None
    m_index: int | None = None


def median_score(effects: EffectVector) -> MedianScore:
    """Empirical median; even N uses the midpoint of the two central order statistics."""
    values = effects.effects
    return MedianScore(value=float(np.median(values)), n=int(values.size))


def _order_stat(sorted_values: np.ndarray, k: int) -> float:
    """1-based order statistic with -inf / +inf sentinels outside [1, N]."""
    if k <= 0:
        return -math.inf
    if k > sorted_values.size:
        return math.inf
    return float(sorted_values[k - 1])


def randomized_ci(effects: EffectVector, alpha: float, u: float) -> CiResult:
    """Randomized one-sided lower confidence bound for the median effect.

    Returns both candidate endpoints; the selected one (lower1 iff
    u <= prob_lower1 = 1 - gamma) is flagged in selected_lower. Coverage of
    the randomized interval is exactly 1 - alpha for continuous effects.
    """
    if not 0.0 <= u <= 1.0:
        raise ValueError("u must lie in [0, 1]")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")
    values = np.sort(effects.effects)
    n = int(values.size)
    T = critical_value(n, alpha)
    g = min(max(gamma(n, T, alpha), 0.0), 1.0)
    prob1 = 1.0 - g
    lower1 = _order_stat(values, n - T)
    lower2 = _order_stat(values, n - T + 1)
    return CiResult(
        alpha=alpha,
        n=n,
        lower1=lower1,
        lower2=lower2,
        prob_lower1=prob1,
        selected_lower=lower1 if u <= prob1 else lower2,
        u=float(u),
    )


def two_sided_ci(effects: EffectVector, alpha: float) -> CiResult:
    """Symmetric two-sided CI [delta_(1+m), delta_(N-m)] with exact conservative coverage."""
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must lie strictly in (0, 1)")
    values = np.sort(effects.effects)
    n = int(values.size)
    spec = BinomSpec(n, 0.5)
    half = alpha / 2.0
    if cdf(spec, 0) > half:
        raise ValueError(
            f"insufficient sample for two-sided CI: cdf(0) = {cdf(spec, 0):.3g} exceeds alpha/2 = {half:.3g}"
        )
    # largest m with cdf(m) <= alpha/2; jump via the lower quantile, then adjust
    q = quantile(spec, half)
    m = q if cdf(spec, q) <= half else q - 1
    coverage = 1.0 - 2.0 * cdf(spec, m)
    return CiResult(
        alpha=alpha,
        n=n,
        two_sided_lower=_order_stat(values, 1 + m),
        two_sided_upper=_order_stat(values, n - m),
        two_sided_coverage=coverage,
        m_index=int(m),
    )
