"""Certified bounds for tails of series and suprema over integer indices.

Every tail quantity in this package is dominated termwise by a finite sum of
*exp-poly* monomials ``coef * k**power * exp(-rate * k)`` with ``coef >= 0``
and ``rate >= 0``.  For such a monomial both the tail sum (via integral
comparison) and the tail supremum have closed forms.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

from scipy import special


@dataclass(frozen=True)
class Term:
    """The function ``k -> coef * k**power * exp(-rate * k)`` on ``k >= 1``."""

    coef: float
    power: float = 0.0
    rate: float = 0.0

    def __call__(self, k: float) -> float:
        if self.coef == 0.0:
            return 0.0
        return self.coef * math.exp(self.power * math.log(k) - self.rate * k)

    def __mul__(self, other: "Term") -> "Term":
        return Term(self.coef * other.coef, self.power + other.power, self.rate + other.rate)

    def scaled(self, factor: float) -> "Term":
        return Term(self.coef * factor, self.power, self.rate)


def mul(a: Sequence[Term], b: Sequence[Term]) -> list[Term]:
    """Distribute the product of two sums of terms."""
    return [x * y for x in a for y in b]


def scale(terms: Iterable[Term], factor: float) -> list[Term]:
    return [t.scaled(factor) for t in terms]


def _upper_gamma(s: float, x: float) -> float:
    """Upper incomplete gamma function Gamma(s, x) for s > 0."""
    return float(special.gammaincc(s, x) * special.gamma(s))


def term_tail_sum(term: Term, k0: int) -> float:
    """Upper bound for ``sum_{k >= k0} term(k)``; ``inf`` when not summable."""
    if term.coef == 0.0:
        return 0.0
    k0 = max(int(k0), 1)
    p, a = term.power, term.rate
    if a == 0.0:
        if p >= -1.0:
            return math.inf
        # decreasing: first term plus integral from k0
        return term(k0) + term.coef * k0 ** (p + 1.0) / (-p - 1.0)
    # summand is nonincreasing for real k >= p / a
    k_star = max(k0, math.ceil(p / a) if p > 0 else k0)
    head = math.fsum(term(k) for k in range(k0, k_star))
    if p <= 0.0:
        # k**p <= k_star**p, geometric remainder
        geo = term.coef * k_star**p * math.exp(-a * k_star) / (-math.expm1(-a))
        return head + geo
    integral = term.coef * _upper_gamma(p + 1.0, a * k_star) / a ** (p + 1.0)
    return head + term(k_star) + integral


def tail_sum(terms: Iterable[Term], k0: int) -> float:
    return math.fsum(term_tail_sum(t, k0) for t in terms)


def term_tail_sup(term: Term, k0: int) -> float:
    """Upper bound for ``sup_{k >= k0} term(k)``; ``inf`` when unbounded."""
    if term.coef == 0.0:
        return 0.0
    k0 = max(int(k0), 1)
    p, a = term.power, term.rate
    if a == 0.0:
        return term(k0) if p <= 0.0 else math.inf
    return term(max(float(k0), p / a))


def tail_sup(terms: Iterable[Term], k0: int) -> float:
    return math.fsum(term_tail_sup(t, k0) for t in terms)


def leading_power(terms: Iterable[Term]) -> float:
    """Largest polynomial power among the non-decaying terms (``-inf`` if none)."""
    powers = [t.power for t in terms if t.coef > 0.0 and t.rate == 0.0]
    return max(powers, default=-math.inf)
