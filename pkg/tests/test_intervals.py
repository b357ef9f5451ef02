"""Median scores, randomized one-sided CIs, symmetric two-sided CIs."""

import math
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

import exact_oracle as oracle
from masksig.effects import EffectVector
from masksig.intervals import median_score, randomized_ci, two_sided_ci
from masksig.sign_test import TestConfig as Config
from masksig.sign_test import critical_value, decide

A05 = Fraction(1, 20)
A01 = Fraction(1, 100)


def effects_of(values, feature="f"):
    values = np.asarray(values, dtype=float)
    return EffectVector(feature, values, tuple(str(i) for i in range(values.size)))


class TestMedianScore:
    def test_odd(self):
        assert median_score(effects_of([3.0, 1.0, 2.0])).value == 2.0

    def test_even_midpoint(self):
        assert median_score(effects_of([1.0, 2.0, 3.0, 4.0])).value == 2.5

    def test_constant(self):
        score = median_score(effects_of([5.0, 5.0, 5.0]))
        assert score.value == 5.0 and score.n == 3

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=60))
    @settings(max_examples=200, deadline=None)
    def test_between_extremes(self, values):
        score = median_score(effects_of(values))
        assert min(values) <= score.value <= max(values)


class TestRandomizedCi:
    def test_n10_order_statistics(self):
        values = np.arange(1.0, 11.0)  # delta_(k) = k
        ci = randomized_ci(effects_of(values), 0.05, u=0.5)
        assert critical_value(10, 0.05) == 8
        assert ci.lower1 == 2.0  # delta_(10-8)
        assert ci.lower2 == 3.0
        expected_prob = float(1 - oracle.gamma(10, 8, A05))
        assert ci.prob_lower1 == pytest.approx(expected_prob, abs=1e-12)
        assert ci.prob_lower1 == pytest.approx(0.10666666666666667, abs=1e-12)

    def test_selection_by_u(self):
        values = np.arange(1.0, 11.0)
        ci = randomized_ci(effects_of(values), 0.05, u=0.0)
        assert ci.selected_lower == ci.lower1
        ci = randomized_ci(effects_of(values), 0.05, u=1.0)
        assert ci.selected_lower == ci.lower2

    def test_sentinel_when_t_equals_n(self):
        # N=4, alpha=0.05: T=4, so lower1 = delta_(0) = -inf
        values = np.array([1.0, 2.0, 3.0, 4.0])
        ci = randomized_ci(effects_of(values), 0.05, u=0.2)
        assert ci.lower1 == -math.inf
        assert ci.lower2 == 1.0

    def test_lower1_never_exceeds_lower2(self):
        gen = np.random.Generator(np.random.Philox(5))
        for n in (1, 2, 3, 7, 19, 64):
            values = gen.standard_normal(n)
            ci = randomized_ci(effects_of(values), 0.05, u=0.3)
            assert ci.lower1 <= ci.lower2
            assert 0.0 <= ci.prob_lower1 <= 1.0

    def test_u_domain(self):
        with pytest.raises(ValueError):
            randomized_ci(effects_of([1.0]), 0.05, u=1.0001)

    def test_alpha_domain(self):
        with pytest.raises(ValueError):
            randomized_ci(effects_of([1.0]), 0.0, u=0.5)


class TestTwoSidedCi:
    def test_n5_alpha_half(self):
        values = np.array([10.0, 30.0, 20.0, 50.0, 40.0])  # sorted: 10..50
        ci = two_sided_ci(effects_of(values), 0.5)
        assert ci.m_index == 1
        assert ci.two_sided_lower == 20.0  # delta_(2)
        assert ci.two_sided_upper == 40.0  # delta_(4)
        assert ci.two_sided_coverage == pytest.approx(0.625, abs=1e-12)

    def test_insufficient_sample_errors(self):
        with pytest.raises(ValueError, match="insufficient sample"):
            two_sided_ci(effects_of([1.0, 2.0, 3.0, 4.0, 5.0]), 0.01)

    def test_m_matches_oracle_sweep(self):
        gen = np.random.Generator(np.random.Philox(6))
        for n in range(8, 200, 7):
            values = gen.standard_normal(n)
            for a_float, a_frac in ((0.05, A05), (0.01, A01)):
                m_oracle = oracle.two_sided_m(n, a_frac)
                if m_oracle < 0:
                    with pytest.raises(ValueError):
                        two_sided_ci(effects_of(values), a_float)
                    continue
                ci = two_sided_ci(effects_of(values), a_float)
                assert ci.m_index == m_oracle
                want = float(1 - 2 * oracle.cdf(n, oracle.HALF, m_oracle))
                assert ci.two_sided_coverage == pytest.approx(want, abs=1e-12)
                assert ci.two_sided_coverage >= 1.0 - a_float
                srt = np.sort(values)
                assert ci.two_sided_lower == srt[m_oracle]
                assert ci.two_sided_upper == srt[n - m_oracle - 1]


class TestDualityWithDecide:
    def test_reject_regions_match_ci(self):
        gen = np.random.Generator(np.random.Philox(7))
        for n in (6, 11, 20):
            values = np.sort(gen.standard_normal(n))
            vec = effects_of(values)
            for alpha in (0.05, 0.2):
                ci = randomized_ci(vec, alpha, u=0.5)
                g = 1.0 - ci.prob_lower1
                probes = [values[0] - 1.0, values[-1] + 1.0]
                probes += [(a + b) / 2 for a, b in zip(values[:-1], values[1:])]
                probes += list(values)
                for m0 in probes:
                    res = decide(vec, Config(alpha=alpha, m0=float(m0)))
                    if m0 < ci.lower1:
                        assert res.reject_prob == 1.0
                    elif m0 >= ci.lower2:
                        assert res.reject_prob == 0.0
                    else:
                        assert res.reject_prob == pytest.approx(g, abs=1e-12)


class TestOrderStatisticCoverage:
    def test_median_lands_between_order_stats_at_binomial_rates(self):
        # P(true median in [delta_(k), delta_(k+1)]) = pmf(N, 1/2, k)
        n, reps = 15, 20000
        gen = np.random.Generator(np.random.Philox(8))
        draws = np.sort(gen.standard_normal((reps, n)), axis=1)
        for k in range(4, 12):
            hits = np.mean((draws[:, k - 1] <= 0.0) & (0.0 < draws[:, k]))
            want = float(oracle.pmf(n, oracle.HALF, k))
            se = math.sqrt(want * (1.0 - want) / reps)
            assert abs(hits - want) < 4.0 * se + 1e-9
