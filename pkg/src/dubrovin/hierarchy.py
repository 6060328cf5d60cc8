"""Exact differential polynomials, the KdV hierarchy recursion and its Lax pair.

A :class:`DiffPoly` is a polynomial with :class:`fractions.Fraction`
coefficients in the jet variables ``u0 = q, u1 = q', u2 = q'', ...`` and one
extra symbol ``qt`` standing for the time derivative of ``q``.  The total
derivative maps ``u_i -> u_{i+1}``; ``qt`` is never differentiated.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Mapping, Optional, Union

import numpy as np

QT = -1  # variable index of the time-derivative symbol

Monomial = tuple  # sorted tuple of (var, exponent) pairs
Number = Union[int, Fraction]


def _mono_mul(a: Monomial, b: Monomial) -> Monomial:
    d = dict(a)
    for v, e in b:
        d[v] = d.get(v, 0) + e
    return tuple(sorted(d.items()))


def _var_name(v: int) -> str:
    return "qt" if v == QT else f"u{v}"


class DiffPoly:
    """Immutable polynomial in jet variables with exact rational coefficients."""

    __slots__ = ("_terms", "_hash")

    def __init__(self, terms: Optional[Mapping[Monomial, Number]] = None):
        clean = {}
        for m, c in (terms or {}).items():
            c = Fraction(c)
            if c:
                clean[tuple(sorted(m))] = clean.get(tuple(sorted(m)), 0) + c
        self._terms = {m: c for m, c in clean.items() if c}
        self._hash = None

    # -- constructors -----------------------------------------------------
    @classmethod
    def const(cls, c: Number) -> "DiffPoly":
        return cls({(): c})

    @classmethod
    def u(cls, i: int) -> "DiffPoly":
        if i < 0:
            raise ValueError("jet order must be nonnegative")
        return cls({((i, 1),): 1})

    @classmethod
    def qt(cls) -> "DiffPoly":
        return cls({((QT, 1),): 1})

    # -- inspection -------------------------------------------------------
    @property
    def terms(self) -> dict:
        return dict(self._terms)

    def __iter__(self):
        return iter(self._terms.items())

    def __len__(self) -> int:
        return len(self._terms)

    def is_zero(self) -> bool:
        return not self._terms

    def coeff(self, *powers: tuple) -> Fraction:
        """Coefficient of the monomial given as ``(var, exponent)`` pairs."""
        return self._terms.get(tuple(sorted(powers)), Fraction(0))

    @property
    def jet_order(self) -> int:
        """Highest jet index present, ``-1`` for polynomials without ``u_i``."""
        return max((v for m in self._terms for v, _ in m if v != QT), default=-1)

    @property
    def degree(self) -> int:
        return max((sum(e for _, e in m) for m in self._terms), default=0)

    # -- arithmetic -------------------------------------------------------
    def __add__(self, other) -> "DiffPoly":
        other = _as_poly(other)
        out = dict(self._terms)
        for m, c in other._terms.items():
            out[m] = out.get(m, 0) + c
        return DiffPoly(out)

    __radd__ = __add__

    def __neg__(self) -> "DiffPoly":
        return DiffPoly({m: -c for m, c in self._terms.items()})

    def __sub__(self, other) -> "DiffPoly":
        return self + (-_as_poly(other))

    def __rsub__(self, other) -> "DiffPoly":
        return _as_poly(other) - self

    def __mul__(self, other) -> "DiffPoly":
        other = _as_poly(other)
        out: dict = {}
        for m1, c1 in self._terms.items():
            for m2, c2 in other._terms.items():
                m = _mono_mul(m1, m2)
                out[m] = out.get(m, 0) + c1 * c2
        return DiffPoly(out)

    __rmul__ = __mul__

    def __eq__(self, other) -> bool:
        try:
            other = _as_poly(other)
        except TypeError:
            return NotImplemented
        return self._terms == other._terms

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash(frozenset(self._terms.items()))
        return self._hash

    def dx(self) -> "DiffPoly":
        """Total x-derivative (``u_i -> u_{i+1}``)."""
        out: dict = {}
        for m, c in self._terms.items():
            for idx, (v, e) in enumerate(m):
                if v == QT:
                    raise ValueError("qt is an independent symbol and is not differentiated")
                rest = m[:idx] + ((v, e - 1),) + m[idx + 1:] if e > 1 else m[:idx] + m[idx + 1:]
                mono = _mono_mul(rest, ((v + 1, 1),))
                out[mono] = out.get(mono, 0) + c * e
        return DiffPoly(out)

    # -- printing ---------------------------------------------------------
    def _sorted_terms(self):
        def key(item):
            m, _ = item
            has_qt = any(v == QT for v, _ in m)
            return (not has_qt, -sum(e for _, e in m), m)
        return sorted(self._terms.items(), key=key)

    def pretty(self) -> str:
        """Deterministic plain-text form, e.g. ``3/8·u0^2 − 1/8·u2``."""
        if not self._terms:
            return "0"
        parts = []
        for i, (m, c) in enumerate(self._sorted_terms()):
            sign = "−" if c < 0 else "+"
            a = abs(c)
            factors = [_var_name(v) + (f"^{e}" if e > 1 else "") for v, e in m]
            if not factors:
                body = str(a)
            elif a == 1:
                body = "·".join(factors)
            else:
                body = "·".join([str(a)] + factors)
            if i == 0:
                parts.append(("−" if c < 0 else "") + body)
            else:
                parts.append(f" {sign} {body}")
        return "".join(parts)

    def __str__(self) -> str:
        return self.pretty()

    def __repr__(self) -> str:
        return f"DiffPoly({self.pretty()!r})"


def _as_poly(x) -> DiffPoly:
    if isinstance(x, DiffPoly):
        return x
    if isinstance(x, (int, Fraction)):
        return DiffPoly.const(x)
    raise TypeError(f"cannot convert {type(x).__name__} to DiffPoly")


# ---------------------------------------------------------------------------
# hierarchy


@lru_cache(maxsize=None)
def fhat(ell: int) -> DiffPoly:
    """The differential polynomial ``f̂_ell`` of the KdV hierarchy recursion."""
    if ell < 0:
        raise ValueError("ell must be nonnegative")
    if ell == 0:
        return DiffPoly.const(1)
    if ell == 1:
        return DiffPoly.u(0) * Fraction(1, 2)
    m = ell - 1
    q = DiffPoly.u(0)
    half = Fraction(1, 2)
    acc = DiffPoly()
    for k in range(1, m + 1):
        acc = acc - half * fhat(k) * fhat(m + 1 - k)
    for k in range(0, m + 1):
        a, b = fhat(k), fhat(m - k)
        acc = acc + half * (q * a * b + Fraction(1, 4) * a.dx() * b.dx()
                            - half * a.dx().dx() * b)
    return acc


def kdv_rhs(n: int) -> DiffPoly:
    """Right-hand side ``2 ∂x f̂_{n+1}`` of the n-th hierarchy equation."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    return 2 * fhat(n + 1).dx()


# ---------------------------------------------------------------------------
# polynomials in z with DiffPoly coefficients


@dataclass(frozen=True)
class ZPoly:
    """Polynomial ``sum_k coeffs[k] z^k`` with :class:`DiffPoly` coefficients."""

    coeffs: tuple

    @classmethod
    def of(cls, mapping: Mapping[int, DiffPoly]) -> "ZPoly":
        if not mapping:
            return cls(())
        deg = max(mapping)
        c = [mapping.get(k, DiffPoly()) for k in range(deg + 1)]
        while c and c[-1].is_zero():
            c.pop()
        return cls(tuple(c))

    @property
    def degree(self) -> int:
        return len(self.coeffs) - 1

    def is_zero(self) -> bool:
        return all(c.is_zero() for c in self.coeffs)

    def __getitem__(self, k: int) -> DiffPoly:
        return self.coeffs[k] if 0 <= k < len(self.coeffs) else DiffPoly()

    def __add__(self, other: "ZPoly") -> "ZPoly":
        d = max(len(self.coeffs), len(other.coeffs))
        return ZPoly.of({k: self[k] + other[k] for k in range(d)})

    def __neg__(self) -> "ZPoly":
        return ZPoly(tuple(-c for c in self.coeffs))

    def __sub__(self, other: "ZPoly") -> "ZPoly":
        return self + (-other)

    def __mul__(self, other: "ZPoly") -> "ZPoly":
        out: dict = {}
        for i, a in enumerate(self.coeffs):
            for j, b in enumerate(other.coeffs):
                out[i + j] = out.get(i + j, DiffPoly()) + a * b
        return ZPoly.of(out)

    def dx(self) -> "ZPoly":
        return ZPoly.of({k: c.dx() for k, c in enumerate(self.coeffs)})

    def pretty(self) -> str:
        if self.is_zero():
            return "0"
        parts = []
        for k in range(len(self.coeffs) - 1, -1, -1):
            c = self.coeffs[k]
            if c.is_zero():
                continue
            zk = "" if k == 0 else ("z" if k == 1 else f"z^{k}")
            parts.append(f"({c.pretty()})" + (f"·{zk}" if zk else ""))
        return " + ".join(parts)


def _zconst(p: DiffPoly) -> ZPoly:
    return ZPoly.of({0: p})


Z = ZPoly.of({1: DiffPoly.const(1)})

ZPolyMatrix = tuple  # ((a, b), (c, d)) of ZPoly


def _mat_mul(A, B):
    return tuple(tuple(A[i][0] * B[0][j] + A[i][1] * B[1][j] for j in range(2)) for i in range(2))


def _mat_add(A, B):
    return tuple(tuple(A[i][j] + B[i][j] for j in range(2)) for i in range(2))


def _mat_sub(A, B):
    return tuple(tuple(A[i][j] - B[i][j] for j in range(2)) for i in range(2))


def fhat_z(n: int) -> ZPoly:
    """``F̂_n(z) = sum_{l=0}^n f̂_{n-l} z^l``."""
    return ZPoly.of({ell: fhat(n - ell) for ell in range(n + 1)})


def pq_matrices(n: int) -> tuple:
    """Lax-type matrices ``(P, Q)`` of the n-th hierarchy flow."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    F = fhat_z(n)
    Fx = F.dx()
    Fxx = Fx.dx()
    half = DiffPoly.const(Fraction(1, 2))
    u0_minus_z = _zconst(DiffPoly.u(0)) - Z
    Q = ((ZPoly(()), _zconst(DiffPoly.const(1))), (u0_minus_z, ZPoly(())))
    P = ((-(_zconst(half) * Fx), F),
         (u0_minus_z * F - _zconst(half) * Fxx, _zconst(half) * Fx))
    return P, Q


def zero_curvature_residual(n: int) -> ZPolyMatrix:
    """Zero-curvature residual ``∂t Q − ∂x P + [Q, P]`` with ``∂t q`` kept as ``qt``.

    The commutator is ``QP − PQ``: this is the ordering forced by the
    compatibility of ``∂x ν = Q ν`` and ``∂t ν = P ν``.
    """
    P, Q = pq_matrices(n)
    zero = ZPoly(())
    dtQ = ((zero, zero), (_zconst(DiffPoly.qt()), zero))
    dxP = tuple(tuple(e.dx() for e in row) for row in P)
    comm = _mat_sub(_mat_mul(Q, P), _mat_mul(P, Q))
    return _mat_add(_mat_sub(dtQ, dxP), comm)


def format_matrix(M: ZPolyMatrix) -> str:
    return "\n".join(f"[{i + 1},{j + 1}] {M[i][j].pretty()}" for i in range(2) for j in range(2))


# ---------------------------------------------------------------------------
# finite-difference evaluation


@lru_cache(maxsize=None)
def fd_weights(d: int, order: int = 4) -> tuple:
    """Exact centred finite-difference weights for the d-th derivative.

    Returns ``(radius, weights)`` with ``len(weights) == 2 * radius + 1``;
    the truncation error is ``O(h**order)`` (``order`` even).
    """
    if d < 0 or order < 2 or order % 2:
        raise ValueError("need d >= 0 and an even order >= 2")
    if d == 0:
        return 0, (Fraction(1),)
    r = (d + 1) // 2 - 1 + order // 2
    offsets = range(-r, r + 1)
    size = 2 * r + 1
    # Solve sum_i w_i s_i^k = k! [k == d] for k < size exactly.
    A = [[Fraction(s) ** k for s in offsets] for k in range(size)]
    b = [Fraction(math.factorial(d)) if k == d else Fraction(0) for k in range(size)]
    for col in range(size):
        piv = next(r_ for r_ in range(col, size) if A[r_][col] != 0)
        A[col], A[piv] = A[piv], A[col]
        b[col], b[piv] = b[piv], b[col]
        for r_ in range(size):
            if r_ != col and A[r_][col] != 0:
                f = A[r_][col] / A[col][col]
                A[r_] = [x - f * y for x, y in zip(A[r_], A[col])]
                b[r_] -= f * b[col]
    return r, tuple(b[i] / A[i][i] for i in range(size))


def fd_derivative(field: np.ndarray, h: float, d: int, order: int = 4, axis: int = -1) -> np.ndarray:
    """Centred FD derivative along ``axis``; points without a full stencil are NaN."""
    field = np.asarray(field, dtype=float)
    r, w = fd_weights(d, order)
    n = field.shape[axis]
    if n < 2 * r + 1:
        raise ValueError(f"grid of {n} points too short for a {2 * r + 1}-point stencil")
    f = np.moveaxis(field, axis, -1)
    out = np.full_like(f, np.nan)
    acc = np.zeros(f.shape[:-1] + (n - 2 * r,))
    for i, wi in enumerate(w):
        if wi:
            acc = acc + float(wi) * f[..., i:n - 2 * r + i]
    out[..., r:n - r] = acc / h**d
    return np.moveaxis(out, -1, axis)


def eval_diffpoly(p: DiffPoly, samples: np.ndarray, dx: float, order: int = 4,
                  axis: int = -1, qt: Optional[np.ndarray] = None) -> np.ndarray:
    """Evaluate ``p`` pointwise on a uniformly sampled field.

    Jet variables are replaced by centred finite differences of the given
    order; nodes whose stencil leaves the grid are NaN.  ``qt`` supplies
    values for the time-derivative symbol if it occurs.
    """
    samples = np.asarray(samples, dtype=float)
    K = p.jet_order
    jets = {}
    for i in range(K + 1):
        jets[i] = fd_derivative(samples, dx, i, order, axis) if i else samples
    if K >= 0:
        r = fd_weights(K, order)[0] if K else 0
        if samples.shape[axis] < 2 * r + 1:
            raise ValueError("grid too short for the stencil")
    out = np.zeros_like(samples)
    for m, c in p:
        term = np.full_like(samples, float(c))
        for v, e in m:
            if v == QT:
                if qt is None:
                    raise ValueError("polynomial contains qt but no qt values given")
                term = term * np.asarray(qt, dtype=float) ** e
            else:
                term = term * jets[v] ** e
        out = out + term
    if K >= 1:
        # mark the widest stencil's boundary as invalid even where p vanishes
        r = max(fd_weights(i, order)[0] for i in range(1, K + 1))
        o = np.moveaxis(out, axis, -1)
        o[..., :r] = np.nan
        o[..., o.shape[-1] - r:] = np.nan
    return out


def stencil_radius(p: DiffPoly, order: int = 4) -> int:
    K = p.jet_order
    return max((fd_weights(i, order)[0] for i in range(1, K + 1)), default=0)
