"""Closed-form interventional and per-environment sample complexity budgets.

These are calculators, not guarantee engines: the underlying results hide an
asymptotic constant, exposed here as the knob ``C`` (default 1), and every
logarithm is natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import InvalidParameters

HARD_K = "hard_k"
SOFT_K_DEGREE_D = "soft_k_degree_d"
GENERAL = "general"
KINDS = (HARD_K, SOFT_K_DEGREE_D, GENERAL)

CAVEAT = "asymptotic constant C={c}"


def _check_prob(name: str, value: float) -> None:
    if not 0.0 < value < 1.0:
        raise InvalidParameters(f"{name} must lie in (0, 1), got {value}")


def interventional_complexity(
    kind: str,
    *,
    n: int = 0,
    k: int = 0,
    d: int = 0,
    delta: float,
    delta_prime: float,
    C: float = 1.0,
) -> int:
    """Number of training environments m for the selected intervention family.

    hard_k:          m = C (k^4        + ln(1/delta)) / delta'
    soft_k_degree_d: m = C (d^{4k}     + ln(1/delta)) / delta'
    general:         m = C (n^4        + ln(1/delta)) / delta'
    """
    _check_prob("delta", delta)
    _check_prob("delta_prime", delta_prime)
    if C <= 0:
        raise InvalidParameters("C must be > 0")
    if kind == HARD_K:
        if k < 1:
            raise InvalidParameters("hard_k needs k >= 1")
        lead = float(k) ** 4
    elif kind == SOFT_K_DEGREE_D:
        if k < 1 or d < 1:
            raise InvalidParameters("soft_k_degree_d needs k >= 1 and d >= 1")
        lead = float(d) ** (4 * k)
    elif kind == GENERAL:
        if n < 1:
            raise InvalidParameters("general needs n >= 1")
        lead = float(n) ** 4
    else:
        raise InvalidParameters(f"unknown budget kind {kind!r}")
    m = math.ceil(C * (lead + math.log(1.0 / delta)) / delta_prime)
    return max(m, 1)


def sample_complexity(
    *, n: int, L: float, eps: float, delta: float, m: int, C: float = 1.0
) -> int:
    """Samples per environment:

    N = C (4 n L^2 / eps^2) (ln(2 n m / delta) + n^2 ln(1 + 8 n^{3/2} / eps))
    """
    if n < 1:
        raise InvalidParameters("n must be >= 1")
    if L <= 0 or eps <= 0 or m < 1 or C <= 0:
        raise InvalidParameters("L, eps, C must be > 0 and m >= 1")
    _check_prob("delta", delta)
    lead = 4.0 * n * L * L / (eps * eps)
    inner = math.log(2.0 * n * m / delta) + n * n * math.log(1.0 + 8.0 * n**1.5 / eps)
    return max(math.ceil(C * lead * inner), 1)


def covering_number_log(n: int, eps: float) -> float:
    """log of the eps-covering number of the representation class:
    n^2 ln(1 + 4 n^{3/2} / eps)."""
    if n < 1:
        raise InvalidParameters("n must be >= 1")
    if eps <= 0:
        raise InvalidParameters("eps must be > 0")
    return n * n * math.log(1.0 + 4.0 * n**1.5 / eps)


@dataclass(frozen=True)
class PacBudget:
    """One evaluated budget row, ready for table or CSV output."""

    kind: str
    n: int
    k: int
    d: int
    delta: float
    delta_prime: float
    eps: float
    L: float
    C: float
    m_interventions: int
    n_samples_per_env: int

    @property
    def caveat(self) -> str:
        return CAVEAT.format(c=self.C)


def evaluate_budget(
    kind: str,
    *,
    n: int = 0,
    k: int = 0,
    d: int = 0,
    delta: float,
    delta_prime: float,
    eps: float,
    L: float = 1.0,
    C: float = 1.0,
) -> PacBudget:
    """Chain both calculators: m from the family, then N at that m."""
    m = interventional_complexity(
        kind, n=n, k=k, d=d, delta=delta, delta_prime=delta_prime, C=C
    )
    sample_n = n if n >= 1 else k  # general uses n; site-restricted kinds fall back to k
    big_n = sample_complexity(n=sample_n, L=L, eps=eps, delta=delta, m=m, C=C)
    return PacBudget(
        kind=kind,
        n=n,
        k=k,
        d=d,
        delta=delta,
        delta_prime=delta_prime,
        eps=eps,
        L=L,
        C=C,
        m_interventions=m,
        n_samples_per_env=big_n,
    )
