import math

import numpy as np
import pytest

from seminv.bounds import (
    GENERAL,
    HARD_K,
    SOFT_K_DEGREE_D,
    covering_number_log,
    evaluate_budget,
    interventional_complexity,
    sample_complexity,
)
from seminv.errors import InvalidParameters


class TestInterventionalComplexity:
    def test_hard_k_worked_value(self):
        # hand evaluation: ceil((3^4 + ln 10) / 0.1) = ceil(833.025...) = 834
        by_hand = math.ceil((3**4 + math.log(10)) / 0.1)
        m = interventional_complexity(HARD_K, k=3, delta=0.1, delta_prime=0.1)
        assert m == by_hand == 834

    def test_general_worked_value(self):
        by_hand = math.ceil((7**4 + math.log(10)) / 0.1)
        m = interventional_complexity(GENERAL, n=7, delta=0.1, delta_prime=0.1)
        assert m == by_hand == 24034

    def test_soft_worked_value(self):
        by_hand = math.ceil((1 + math.log(2)) / 0.5)
        m = interventional_complexity(SOFT_K_DEGREE_D, d=1, k=2, delta=0.5, delta_prime=0.5)
        assert m == by_hand == 4

    def test_hard_with_k_equal_n_lower_bounds_general(self):
        for n in (2, 5, 9):
            hard = interventional_complexity(HARD_K, k=n, delta=0.05, delta_prime=0.2)
            general = interventional_complexity(GENERAL, n=n, delta=0.05, delta_prime=0.2)
            assert hard <= general

    def test_monotonicity(self, rng):
        for _ in range(50):
            delta = float(rng.uniform(0.01, 0.5))
            dp = float(rng.uniform(0.01, 0.5))
            k = int(rng.integers(1, 10))
            base = interventional_complexity(HARD_K, k=k, delta=delta, delta_prime=dp)
            assert interventional_complexity(HARD_K, k=k + 1, delta=delta, delta_prime=dp) >= base
            assert interventional_complexity(HARD_K, k=k, delta=delta / 2, delta_prime=dp) >= base
            assert interventional_complexity(HARD_K, k=k, delta=delta, delta_prime=dp / 2) >= base

    def test_bad_parameters_rejected(self):
        with pytest.raises(InvalidParameters):
            interventional_complexity(HARD_K, k=3, delta=1.5, delta_prime=0.1)
        with pytest.raises(InvalidParameters):
            interventional_complexity(HARD_K, k=0, delta=0.1, delta_prime=0.1)
        with pytest.raises(InvalidParameters):
            interventional_complexity("nope", delta=0.1, delta_prime=0.1)


class TestSampleComplexity:
    def test_worked_value(self):
        # delta = 2/e makes ln(2 n m / delta) = 1; N = ceil(4 (1 + ln 9)) = 13
        n = sample_complexity(n=1, L=1.0, eps=1.0, delta=2 / math.e, m=1)
        by_hand = math.ceil(4 * (1 + math.log(9)))
        assert n == by_hand == 13

    def test_halving_eps_grows_more_than_fourfold(self):
        base = sample_complexity(n=4, L=1.0, eps=0.2, delta=0.1, m=5)
        finer = sample_complexity(n=4, L=1.0, eps=0.1, delta=0.1, m=5)
        assert finer > 4 * base

    def test_independent_arithmetic_oracle(self):
        n, L, eps, delta, m = 7, 1.0, 0.1, 0.1, 10
        lead = 4 * n * L * L / eps**2
        inner = math.log(2 * n * m / delta) + n * n * math.log(1 + 8 * n**1.5 / eps)
        assert sample_complexity(n=n, L=L, eps=eps, delta=delta, m=m) == math.ceil(lead * inner)

    def test_monotone_in_every_argument(self, rng):
        for _ in range(50):
            n = int(rng.integers(1, 9))
            L = float(rng.uniform(0.5, 2))
            eps = float(rng.uniform(0.05, 1))
            delta = float(rng.uniform(0.01, 0.5))
            m = int(rng.integers(1, 20))
            base = sample_complexity(n=n, L=L, eps=eps, delta=delta, m=m)
            assert sample_complexity(n=n + 1, L=L, eps=eps, delta=delta, m=m) >= base
            assert sample_complexity(n=n, L=2 * L, eps=eps, delta=delta, m=m) >= base
            assert sample_complexity(n=n, L=L, eps=eps / 2, delta=delta, m=m) >= base
            assert sample_complexity(n=n, L=L, eps=eps, delta=delta / 2, m=m) >= base
            assert sample_complexity(n=n, L=L, eps=eps, delta=delta, m=m + 1) >= base


class TestCoveringNumber:
    def test_worked_values(self):
        assert covering_number_log(1, 4.0) == pytest.approx(math.log(2), abs=1e-12)
        assert covering_number_log(2, 1.0) == pytest.approx(4 * math.log(1 + 8 * math.sqrt(2)), abs=1e-12)

    def test_vanishes_for_huge_eps(self):
        assert covering_number_log(3, 1e15) < 1e-10

    def test_bad_eps_rejected(self):
        with pytest.raises(InvalidParameters):
            covering_number_log(3, 0.0)


def test_evaluate_budget_chains_both_formulas():
    budget = evaluate_budget(HARD_K, n=6, k=3, delta=0.1, delta_prime=0.1, eps=0.1, L=1.0)
    assert budget.m_interventions == 834
    assert budget.n_samples_per_env == sample_complexity(n=6, L=1.0, eps=0.1, delta=0.1, m=834)
    assert "C=1.0" in budget.caveat
