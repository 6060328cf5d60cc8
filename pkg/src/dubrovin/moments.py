"""Scalar fields ``Q_k`` and ``R_m`` on the Dirichlet torus, trace formulas,
and the bound constants ``M1, M2, M3`` used by the Lipschitz estimate.

``Q_k = E^k + sum_j ((E_j^-)^k + (E_j^+)^k - 2 mu_j^k)`` and ``R_m`` is the
partition sum ``sum_alpha prod_k Q_k^{alpha_k} / (alpha_k! (2k)^{alpha_k})``
over ``alpha`` with ``sum_k k alpha_k = m``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Optional

import numpy as np
from scipy.stats import qmc

from . import _tails
from ._tails import Term
from .dirichlet import DirichletState
from .spectrum import DivergenceError, GapSet

# ---------------------------------------------------------------------------
# partitions


@lru_cache(maxsize=None)
def partitions(m: int) -> tuple:
    """Multi-indices ``alpha`` (length ``m``) with ``sum_k k alpha_k = m``.

    Returned as ``((alpha, weight), ...)`` with exact weight
    ``prod_k 1 / (alpha_k! (2k)^{alpha_k})``.
    """
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return (((), Fraction(1)),)
    out = []

    def rec(k: int, remaining: int, alpha: list):
        if k == 0:
            if remaining == 0:
                w = Fraction(1)
                for i, a in enumerate(alpha, start=1):
                    w /= math.factorial(a) * (2 * i) ** a
                out.append((tuple(alpha), w))
            return
        for a in range(remaining // k, -1, -1):
            alpha[k - 1] = a
            rec(k - 1, remaining - k * a, alpha)
        alpha[k - 1] = 0

    rec(m, m, [0] * m)
    return tuple(out)


def r_from_q(Q: np.ndarray, m: int) -> np.ndarray:
    """Evaluate ``R_m`` from moments ``Q[..., k-1] = Q_k`` (broadcast over leading axes)."""
    Q = np.asarray(Q, dtype=float)
    if m == 0:
        return np.ones(Q.shape[:-1])
    if Q.shape[-1] < m:
        raise ValueError(f"need Q_1..Q_{m}")
    total = np.zeros(Q.shape[:-1])
    for alpha, w in partitions(m):
        term = np.full(Q.shape[:-1], float(w))
        for k, a in enumerate(alpha, start=1):
            if a:
                term = term * Q[..., k - 1] ** a
        total = total + term
    return total


def r_bound_from_q(Qabs: np.ndarray, dQ: np.ndarray, m: int) -> np.ndarray:
    """Bound on ``|R_m(Q + e) - R_m(Q)|`` for ``|e_k| <= dQ_k``."""
    if m == 0:
        return np.zeros(np.shape(Qabs)[:-1])
    total = np.zeros(np.shape(Qabs)[:-1])
    for alpha, w in partitions(m):
        up = np.full(total.shape, float(w))
        lo = np.full(total.shape, float(w))
        for k, a in enumerate(alpha, start=1):
            if a:
                up = up * (np.abs(Qabs[..., k - 1]) + dQ[..., k - 1]) ** a
                lo = lo * np.abs(Qabs[..., k - 1]) ** a
        total = total + (up - lo)
    return total


# ---------------------------------------------------------------------------
# Q_k


def _gap_power_terms(S: GapSet, phi: np.ndarray, k: int) -> np.ndarray:
    """``(E^-)^k + (E^+)^k - 2 mu^k`` per gap, via differences of powers.

    Uses ``E^+ - mu = gamma sin^2(phi/2)`` and ``E^- - mu = -gamma cos^2(phi/2)``
    so that narrow gaps far from the origin keep full relative accuracy.
    """
    phi = np.asarray(phi, dtype=float)
    g = S.gamma
    s2 = np.sin(phi / 2.0) ** 2
    c2 = np.cos(phi / 2.0) ** 2
    lo = S.lower
    mu = lo + g * c2
    up = lo + g  # only enters through the power sums
    if k == 1:
        return -g * np.cos(phi)

    def psum(a, b):
        return sum(a**i * b ** (k - 1 - i) for i in range(k))

    return g * (s2 * psum(up, mu) - c2 * psum(lo, mu))


def _q_tail_terms(S: GapSet, k: int) -> list[Term]:
    """Terms dominating ``|(E^-)^k + (E^+)^k - 2 mu^k| <= 2k (|E|+eta+gamma)^{k-1} gamma`` on the tail."""
    t = S.tail
    g0 = float(t.gamma(S.first_tail_index))
    base = [Term(2.0 * k)]
    if k > 1:
        p = k - 1
        f = 3.0 ** (p - 1) if p > 1 else 1.0
        inner = [Term(f * abs(S.e_low) ** p), Term(f * t.c**p, t.exponent * p), Term(f * (g0 / 2) ** p)]
        base = _tails.mul(base, inner)
    return _tails.mul(base, t.gamma_terms())


def q_tail_bound(S: GapSet, k: int) -> float:
    if S.tail is None:
        return 0.0
    b = _tails.tail_sum(_q_tail_terms(S, k), S.first_tail_index)
    if not math.isfinite(b):
        raise DivergenceError(f"Q_{k} tail is not summable")
    return b


def q_values(S: GapSet, phi, kmax: int) -> np.ndarray:
    """``Q_1..Q_kmax`` for angle array(s) ``phi`` of shape ``(..., N)``."""
    phi = np.asarray(phi, dtype=float)
    out = np.empty(phi.shape[:-1] + (kmax,))
    for k in range(1, kmax + 1):
        terms = _gap_power_terms(S, phi, k)
        out[..., k - 1] = S.e_low**k + np.sum(terms, axis=-1)
    return out


def _phi(phi) -> np.ndarray:
    return phi.phi if isinstance(phi, DirichletState) else np.asarray(phi, dtype=float)


def q_k(S: GapSet, phi, k: int, tol: Optional[float] = None, return_bound: bool = False):
    """The scalar field ``Q_k`` at ``phi``, optionally with its certified tail bound.

    If ``tol`` is given and the tail bound exceeds it, :class:`DivergenceError`
    is raised.
    """
    if k < 1:
        raise ValueError("k must be positive")
    p = _phi(phi)
    terms = _gap_power_terms(S, p, k)
    value = math.fsum([S.e_low**k, *terms.tolist()])
    bound = q_tail_bound(S, k)
    if tol is not None and bound > tol:
        raise DivergenceError(f"Q_{k} tail bound {bound:.3e} exceeds tol={tol:.3e}")
    return (value, bound) if return_bound else value


def r_m(S: GapSet, phi, m: int, tol: Optional[float] = None, return_bound: bool = False):
    """The scalar field ``R_m`` at ``phi``."""
    if m < 0:
        raise ValueError("m must be nonnegative")
    if m == 0:
        return (1.0, 0.0) if return_bound else 1.0
    p = _phi(phi)
    Q = np.array([q_k(S, p, k) for k in range(1, m + 1)])
    value = float(r_from_q(Q, m))
    if not return_bound and tol is None:
        return value
    dQ = np.array([q_tail_bound(S, k) for k in range(1, m + 1)])
    bound = float(r_bound_from_q(Q, dQ, m))
    if tol is not None and bound > tol:
        raise DivergenceError(f"R_{m} tail bound {bound:.3e} exceeds tol={tol:.3e}")
    return (value, bound) if return_bound else value


def trace_q(S: GapSet, phi, tol: Optional[float] = None, return_bound: bool = False):
    """Trace formula ``q = E + sum_j (E_j^- + E_j^+ - 2 mu_j)``."""
    p = _phi(phi)
    value = math.fsum([S.e_low, *_gap_power_terms(S, p, 1).tolist()])
    bound = S.tail_gamma_sum
    if not math.isfinite(bound):
        raise DivergenceError("gap lengths are not summable")
    if tol is not None and bound > tol:
        raise DivergenceError(f"trace tail bound {bound:.3e} exceeds tol={tol:.3e}")
    return (value, bound) if return_bound else value


def trace_q_many(S: GapSet, phi: np.ndarray) -> np.ndarray:
    """Vectorised trace formula over angle arrays of shape ``(..., N)``."""
    return S.e_low + np.sum(_gap_power_terms(S, np.asarray(phi, dtype=float), 1), axis=-1)


# ---------------------------------------------------------------------------
# bound constants


def moment_sum(S: GapSet, p: int) -> float:
    """``sum_j (1 + eta_{j,0}^p) gamma_j`` including a certified tail bound."""
    explicit = math.fsum(S.gamma * (1.0 + S.eta0**p))
    if S.tail is None:
        return explicit
    from .spectrum import _one_plus_eta_pow
    tail = _tails.tail_sum(_tails.mul(S.tail.gamma_terms(), _one_plus_eta_pow(S.tail, p, 1.0)),
                           S.first_tail_index)
    if not math.isfinite(tail):
        raise DivergenceError(f"moment sum of order {p} diverges")
    return explicit + tail


def gamma_sup(S: GapSet) -> float:
    g = float(np.max(S.gamma, initial=0.0))
    if S.tail is not None:
        g = max(g, float(S.tail.gamma(S.first_tail_index)))
    return g


def d_const(S: GapSet, k: int) -> float:
    """Constant ``D_k`` in ``|Q_k| <= |E|^k + 3 D_k sum_j (1 + eta_{j,0}^{k-1}) gamma_j``."""
    G = gamma_sup(S)
    p = k - 1
    return (2.0 * k / 3.0) * 3.0 ** max(k - 2, 0) * (1.0 + abs(S.e_low) ** p + G**p)


@lru_cache(maxsize=None)
def max_partial_coefficient(n: int) -> Fraction:
    """Largest |coefficient| among ``dR_m/dQ_j`` as polynomials in ``Q``, ``1 <= m, j <= n``."""
    best = Fraction(0)
    for m in range(1, n + 1):
        for j in range(1, m + 1):
            coeffs: dict = {}
            for alpha, w in partitions(m):
                a = alpha[j - 1]
                if a:
                    key = alpha[:j - 1] + (a - 1,) + alpha[j:]
                    coeffs[key] = coeffs.get(key, 0) + w * a
            best = max([best, *map(abs, coeffs.values())])
    return best


@dataclass(frozen=True)
class BoundConstants:
    """Constants of the scalar-field estimates; ``M1`` is sampled, not certified."""

    n: int
    M1: float
    M2: float
    M3: float
    A: float
    samples: int


def bound_constants(S: GapSet, n: int, samples: int = 1000, seed: int = 0) -> BoundConstants:
    """Estimate ``M1`` by quasi-random sampling and evaluate ``M2``, ``M3`` in closed form.

    ``M1`` bounds ``|R_m|`` for ``0 <= m <= n`` (``R_0 = 1`` is included since
    the vector field uses it).  A tail allowance from the certified ``Q_k``
    tail bounds is added.
    """
    if n < 0:
        raise ValueError("n must be nonnegative")
    N = len(S.gaps)
    if N:
        pts = qmc.Halton(d=N, scramble=True, seed=seed).random(samples) * 2.0 * math.pi
    else:
        pts = np.zeros((1, 0))
    M1 = 1.0
    if n >= 1:
        Q = q_values(S, pts, n)
        dQ = np.array([q_tail_bound(S, k) for k in range(1, n + 1)])
        for m in range(1, n + 1):
            R = np.abs(r_from_q(Q, m)) + r_bound_from_q(Q, np.broadcast_to(dQ, Q.shape), m)
            M1 = max(M1, float(np.max(R)))
    E = abs(S.e_low)
    if n == 0:
        return BoundConstants(0, M1, 0.0, 0.0, 0.0, len(pts))
    C = max(d_const(S, k) for k in range(1, n + 1))
    A = float(max_partial_coefficient(n))
    msum = moment_sum(S, n - 1)
    M2 = (max(A, 1.0) * 3.0**n * (1.0 + E**n) ** n * (1.0 + 2.0 * C * msum) ** n
          * (math.comb(2 * n, n) - 1))
    M3 = n * (n + 1) / 2.0 * 2.0**n * (1.0 + E**n) * M2
    return BoundConstants(n, M1, M2, M3, A, len(pts))
