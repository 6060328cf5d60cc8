"""Small quasi-periodic data: Diophantine check, sampling of the potential,
a synthetic gap model obeying the small-coupling bounds, and the
series/supremum chain showing the Craig-type conditions for that model.

Gap model (one frequency): gap ``m >= 1`` is centred at ``(pi m omega)^2``
with length ``2 eps exp(-kappa0 m / 2) (1 - 1e-3)``; ``e_low = 0``.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Mapping, Optional, Sequence

import numpy as np
from scipy.special import lambertw

from . import _tails
from ._tails import Term
from .spectrum import (DivergenceError, GapSet, GapSetError, TailModel, c_j, check_craig,
                       validate_gapset)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
WIDTH_SHRINK = 1e-3


@dataclass(frozen=True)
class QPData:
    """Parameters of the quasi-periodic model.

    ``c`` is an input (upper constant for ``eta_{m,0} <= c |m|^2``); ``a``,
    ``b`` and ``F`` are filled in by :func:`synthesize_gapmodel` when left
    as ``None``.
    """

    nu: int = 1
    omega: tuple = (GOLDEN,)
    eps: float = 0.01
    kappa0: float = 1.0
    a0: float = 0.3
    b0: float = 1.5
    c: float = 10.0
    a: Optional[float] = None
    b: Optional[float] = None
    F: Optional[float] = None
    Mmax: int = 50
    b_floor: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "omega", tuple(float(w) for w in np.atleast_1d(self.omega)))
        if len(self.omega) != self.nu:
            raise ValueError("omega must have nu components")
        if not 0 < self.a0 < 1:
            raise ValueError("need 0 < a0 < 1")
        if not self.b0 > self.nu:
            raise ValueError("need b0 > nu")
        if not 0 <= self.kappa0 <= 1:
            raise ValueError("need 0 <= kappa0 <= 1")
        if not self.eps > 0:
            raise ValueError("need eps > 0")
        if self.Mmax < 1:
            raise ValueError("need Mmax >= 1")

    def to_json(self) -> dict:
        d = asdict(self)
        d["omega"] = list(self.omega)
        return d

    @classmethod
    def from_json(cls, doc: Mapping) -> "QPData":
        keys = {f for f in cls.__dataclass_fields__}
        unknown = set(doc) - keys
        if unknown:
            raise ValueError(f"unknown QPData fields: {sorted(unknown)}")
        return cls(**dict(doc))

    @classmethod
    def load(cls, path) -> "QPData":
        with open(path, encoding="utf-8") as fh:
            return cls.from_json(json.load(fh))


def shell_count(r: int, nu: int) -> int:
    """Number of ``m in Z^nu`` with sup-norm exactly ``r``."""
    return (2 * r + 1) ** nu - (2 * r - 1) ** nu if r > 0 else 1


def _shell_terms(nu: int) -> list[Term]:
    """``shell_count(r) <= 2 nu 3^(nu-1) r^(nu-1)`` for ``r >= 1``."""
    return [Term(2.0 * nu * 3.0 ** (nu - 1), nu - 1.0, 0.0)]


def labels(nu: int, M: int):
    """All ``m in Z^nu`` with ``0 < |m|_inf <= M``."""
    for m in itertools.product(range(-M, M + 1), repeat=nu):
        if any(m):
            yield m


# ---------------------------------------------------------------------------
# Diophantine condition


@dataclass(frozen=True)
class DiophantineReport:
    passed: bool
    worst_m: tuple
    margin: float
    ratio: float
    nearest_integer: bool


def diophantine_check(omega: Sequence[float], a0: float, b0: float, Mmax: int,
                      nearest_integer: bool = False) -> DiophantineReport:
    """Check ``|m . omega| >= a0 |m|^(-b0)`` for ``0 < |m|_inf <= Mmax``.

    With ``nearest_integer`` the left side is the distance from ``m . omega``
    to the nearest integer instead.
    """
    if Mmax < 1:
        raise ValueError("Mmax must be >= 1")
    w = np.asarray(omega, dtype=float)
    nu = w.size
    grids = np.meshgrid(*([np.arange(-Mmax, Mmax + 1)] * nu), indexing="ij")
    m = np.stack([g.ravel() for g in grids], axis=1)
    m = m[np.any(m != 0, axis=1)]
    dot = m @ w
    lhs = np.abs(dot - np.round(dot)) if nearest_integer else np.abs(dot)
    size = np.max(np.abs(m), axis=1).astype(float)
    rhs = a0 * size ** (-b0)
    ratio = lhs / rhs
    i = int(np.argmin(ratio))
    return DiophantineReport(bool(ratio[i] >= 1.0), tuple(int(v) for v in m[i]),
                             float(lhs[i] - rhs[i]), float(ratio[i]), nearest_integer)


# ---------------------------------------------------------------------------
# sampling


@dataclass(frozen=True)
class PotentialSample:
    x: np.ndarray
    V: np.ndarray
    tail_bound: float
    max_imag: float


def sample_potential(qp: QPData, coeffs: Mapping[tuple, complex], x: Sequence[float]) -> PotentialSample:
    """``V(x) = sum_m c(m) exp(2 pi i m.omega x)`` over ``|m| <= Mmax``.

    Coefficients must obey ``|c(m)| <= eps exp(-kappa0 |m|)``; the neglected
    part is bounded by ``eps sum_{|m| > Mmax} exp(-kappa0 |m|)``.
    """
    x = np.asarray(x, dtype=float)
    w = np.asarray(qp.omega)
    V = np.zeros(x.shape, dtype=complex)
    for m, cm in coeffs.items():
        m = tuple(int(v) for v in np.atleast_1d(m))
        if len(m) != qp.nu:
            raise ValueError(f"label {m} has wrong dimension")
        size = max(abs(v) for v in m)
        if abs(cm) > qp.eps * math.exp(-qp.kappa0 * size) * (1 + 1e-12):
            raise ValueError(f"coefficient bound violated at m={m}")
        if size == 0 or size > qp.Mmax:
            if size == 0 and cm != 0:
                V += cm
            continue
        V += cm * np.exp(2j * math.pi * float(np.dot(m, w)) * x)
    if qp.kappa0 > 0:
        terms = _tails.scale(_tails.mul(_shell_terms(qp.nu), [Term(1.0, 0.0, qp.kappa0)]), qp.eps)
        tail = _tails.tail_sum(terms, qp.Mmax + 1)
    else:
        tail = math.inf
    return PotentialSample(x, V, tail, float(np.max(np.abs(V.imag), initial=0.0)))


# ---------------------------------------------------------------------------
# synthetic gap model


@dataclass(frozen=True)
class SynthesisReport:
    qp: QPData
    gamma_ok: bool
    eta0_ok: bool
    distance_ok: bool
    worst_eta0_ratio: float
    worst_distance_ratio: float
    F_per_m: dict = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return self.gamma_ok and self.eta0_ok and self.distance_ok


class ModelInconsistent(GapSetError):
    """The synthesized gaps violate a model bound or overlap."""


def _fit_F(C: np.ndarray, ms: np.ndarray) -> tuple:
    """Smallest ``F`` with ``C_m <= F exp(F log m loglog m)`` for each ``m >= 3``."""
    per = {}
    for m, Cm in zip(ms, C):
        if m < 3:
            continue
        L = math.log(m) * math.log(math.log(m))
        per[int(m)] = float(np.real(lambertw(Cm * L)) / L)
    return (max(per.values()) if per else 1.0), per


def synthesize_gapmodel(qp: QPData) -> tuple:
    """Build the gap model for ``qp`` and verify the three model bounds.

    Returns ``(GapSet, SynthesisReport)``; ``report.qp`` carries the fitted
    ``a``, ``b`` and ``F`` (inputs given explicitly are kept and only
    verified).
    """
    if qp.nu != 1:
        raise NotImplementedError("gap synthesis is implemented for one frequency only")
    w = qp.omega[0]
    M = qp.Mmax
    m = np.arange(1, M + 1, dtype=float)
    centers = (math.pi * m * w) ** 2
    A = 2.0 * qp.eps * (1.0 - WIDTH_SHRINK)
    gam = A * np.exp(-qp.kappa0 * m / 2.0)
    lower = centers - gam / 2.0
    order = np.argsort(lower, kind="stable")
    for i, j in zip(order, order[1:]):
        if not lower[j] > lower[i] + gam[i]:
            raise ModelInconsistent(f"gaps m={i + 1} and m={j + 1} overlap")
    if np.any(lower < 0):
        raise ModelInconsistent("a gap lies below the bottom of the spectrum")
    tail = TailModel("exp", A, qp.kappa0 / 2.0, (math.pi * w) ** 2, 2.0)
    S = validate_gapset([(lo, lo + g) for lo, g in zip(lower, gam)], 0.0, tail, widths=gam)
    # labels follow energy order for one frequency
    gamma_ok = bool(np.all(S.gamma < 2.0 * qp.eps * np.exp(-qp.kappa0 * m / 2.0)))
    eta0_ratio = S.eta0 / (qp.c * m**2)
    eta0_ok = bool(np.all(eta0_ratio <= 1.0)) and tail.c <= qp.c
    # distances eta_{m,n}, |m| >= |n|, n = 0 meaning the bottom of the spectrum
    dmin = np.empty(M)
    for i in range(M):
        d = [S.eta0[i]] + [S.eta[i, k] for k in range(i)]
        dmin[i] = min(d)
    b = qp.b
    if b is None:
        slope = np.polyfit(np.log(m), np.log(dmin), 1)[0] if M > 1 else 0.0
        b = max(qp.b_floor, -float(slope))
    a = qp.a if qp.a is not None else float(np.min(dmin * m**b))
    dist_ratio = dmin * m**b / a
    distance_ok = bool(np.all(dist_ratio >= 1.0 - 1e-12))
    try:
        C = np.array([c_j(S, j) for j in range(1, M + 1)])
        F_fit, per = _fit_F(C, m)
    except DivergenceError:
        # without decay the products C_m diverge; the Craig route reports it
        F_fit, per = math.inf, {}
    F = qp.F if qp.F is not None else F_fit
    qp_out = replace(qp, a=a, b=b, F=F)
    report = SynthesisReport(qp_out, gamma_ok, eta0_ok, distance_ok,
                             float(np.max(eta0_ratio)), float(np.min(dist_ratio)), per)
    if not report.passed:
        raise ModelInconsistent(f"model bounds violated: {report}")
    return S, report


def save_model(S: GapSet, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(S.to_json(), fh, indent=2)


# ---------------------------------------------------------------------------
# the proof-route chain


@dataclass(frozen=True)
class RouteBound:
    name: str
    log_value: float  # natural log of the bound; inf when divergent
    note: str = ""

    @property
    def finite(self) -> bool:
        return math.isfinite(self.log_value)


@dataclass(frozen=True)
class CraigAppReport:
    n: int
    route: dict
    direct: object  # CraigReport
    search_limit: int

    @property
    def route_passed(self) -> bool:
        return all(r.finite for r in self.route.values())

    @property
    def passed(self) -> bool:
        return self.route_passed and self.direct.passed

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "pass": self.passed,
            "route": {k: {"log_bound": r.log_value, "finite": r.finite, "note": r.note}
                      for k, r in self.route.items()},
            "direct": self.direct.to_json(),
            "search_limit": self.search_limit,
        }


def _log_c_envelope(ms: np.ndarray, F: float, C_explicit: Mapping[int, float]) -> np.ndarray:
    out = np.empty(ms.shape)
    for i, mv in enumerate(ms):
        if mv < 3:
            out[i] = math.log(C_explicit[int(mv)])
        else:
            out[i] = math.log(F) + F * math.log(mv) * math.log(math.log(mv))
    return out


def _sup_limit(F: float, n: int, b: float, kappa0: float) -> int:
    """An M* beyond which every proof-route supremand is decreasing."""
    s = 3.0
    while (F * (math.log(math.log(s)) + 1.0) + 3 * n + b + 1.0) / s >= kappa0 / 4.0:
        s *= 1.5
        if s > 1e9:
            break
    return int(math.ceil(s))


def check_craig_app(model: GapSet, n: int, qp: QPData) -> CraigAppReport:
    """Evaluate the series and suprema bounding the Craig-type conditions for the model.

    Every quantity uses only ``eps``, ``kappa0``, ``c``, ``a``, ``b``, ``F``
    and (for ``|m| <= 2``, where the logarithmic envelope is undefined) the
    explicit ``C_m``.  The direct :func:`check_craig` on ``model`` is
    reported alongside.
    """
    if model.tail is None or model.tail.kind != "exp":
        raise ValueError("check_craig_app needs a model with an exponential tail")
    if None in (qp.a, qp.b, qp.F):
        raise ValueError("QPData must carry fitted a, b, F")
    eps, k0, c, a, b, F, nu = qp.eps, qp.kappa0, qp.c, qp.a, qp.b, qp.F, qp.nu
    direct = check_craig(model, n)
    route: dict = {}
    if k0 <= 0:
        note = "kappa0 = 0: comparison series has non-decaying terms"
        for name in ("craig1", "craig2", "craig3", "craig4"):
            route[name] = RouteBound(name, math.inf, note)
        return CraigAppReport(n, route, direct, 0)

    C_explicit = {j: c_j(model, j) for j in (1, 2) if j <= len(model.gaps)}
    if len(C_explicit) < 2:
        # fewer than two explicit gaps: bound C_2 by the envelope at m = 3
        for j in (1, 2):
            C_explicit.setdefault(j, F * math.exp(F * math.log(3) * math.log(math.log(3))))
    half_pow = [Term(1.0), Term(c ** (n / 2), float(n))]  # (1 + c^n m^2n)^(1/2) <= 1 + c^(n/2) m^n

    # craig1: sqrt(2 eps) sum_m exp(-k0|m|/4)(1 + c^n |m|^2n)^(1/2)
    terms1 = _tails.scale(_tails.mul(_tails.mul(_shell_terms(nu), [Term(1.0, 0.0, k0 / 4)]), half_pow),
                          math.sqrt(2 * eps))
    s1 = _tails.tail_sum(terms1, 1)
    route["craig1"] = RouteBound("craig1", math.log(s1), "shell-summed geometric series")

    Mstar = _sup_limit(F, n, b, k0)
    ms = np.arange(1, Mstar + 1, dtype=float)
    logC = _log_c_envelope(ms, F, C_explicit)
    log_w15 = 1.5 * np.log1p(c**n * ms ** (2 * n))
    log_w1 = np.log1p(c**n * ms ** (2 * n))
    # sum_{k != 0} |k|^b exp(-k0 |k| / 4)
    kb = _tails.tail_sum(_tails.mul(_shell_terms(nu), [Term(1.0, b, k0 / 4)]), 1)
    log_c4 = 0.5 * math.log(2 * eps) + logC - k0 * ms / 4 + log_w15
    route["craig4"] = RouteBound("craig4", float(np.max(log_c4)),
                                 f"sup over 1 <= |m| <= {Mstar}; decreasing beyond")
    # craig2: C_m gamma_m^(1/2)(1+eta^n)^(3/2) * (sqrt(2 eps)/a) kb (1 + |m|^b)
    log_c2 = log_c4 + math.log(math.sqrt(2 * eps) / a) + math.log(kb) + np.log1p(ms**b)
    route["craig2"] = RouteBound("craig2", float(np.max(log_c2)),
                                 "uses sqrt(2 eps)/a for the gamma_k^(1/2) / eta sum")
    log_c3 = math.log(2 * eps / a) + logC - k0 * ms / 2 + log_w1 + b * np.log(ms)
    route["craig3"] = RouteBound("craig3", float(np.max(log_c3)),
                                 f"sup over 1 <= |m| <= {Mstar}; decreasing beyond")
    route = {k: route[k] for k in ("craig1", "craig2", "craig3", "craig4")}
    return CraigAppReport(n, route, direct, Mstar)
