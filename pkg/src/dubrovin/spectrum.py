"""Spectral sets ``S = [e_low, inf) minus a union of open gaps``.

A :class:`GapSet` holds finitely many explicit gaps and, optionally, a
:class:`TailModel` describing the remaining (infinitely many) gaps by a
parametric law.  Sums and products over the whole index set are evaluated as
an explicit part plus a certified bound for the tail, obtained by integral
comparison (see :mod:`dubrovin._tails`).

Gap indices are 1-based and follow energy order.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import _tails
from ._tails import Term


class GapSetError(ValueError):
    """Malformed spectral data (overlapping, empty or misplaced gaps)."""


class DivergenceError(ArithmeticError):
    """A tail series or product that must converge does not."""


@dataclass(frozen=True)
class Gap:
    """Open interval ``(lower, lower + length)``.

    The length is stored rather than the upper edge so that very short gaps
    far from the origin keep their exact width.
    """

    lower: float
    length: float

    @classmethod
    def from_edges(cls, lower: float, upper: float) -> "Gap":
        return cls(float(lower), float(upper) - float(lower))

    @property
    def upper(self) -> float:
        return self.lower + self.length


@dataclass(frozen=True)
class TailModel:
    """Parametric law for the gaps beyond the explicit ones.

    Gap ``k`` (global index, ``k > N`` for ``N`` explicit gaps) has length
    ``A * exp(-rate * k)`` (``kind="exp"``) or ``A * k**(-rate)``
    (``kind="pow"``) and is centred at ``e_low + c * k**exponent``.
    """

    kind: str
    A: float
    rate: float
    c: float
    exponent: float = 2.0

    def __post_init__(self):
        if self.kind not in ("exp", "pow"):
            raise GapSetError(f"unknown tail kind {self.kind!r}")
        if not (self.A > 0 and self.c > 0):
            raise GapSetError("tail requires A > 0 and c > 0")
        if self.exponent < 1:
            raise GapSetError("tail position exponent must be >= 1")
        if self.rate < 0 or (self.kind == "pow" and self.rate == 0):
            raise GapSetError("tail lengths must be nonincreasing")

    def gamma(self, k):
        k = np.asarray(k, dtype=float)
        if self.kind == "exp":
            return self.A * np.exp(-self.rate * k)
        return self.A * k ** (-self.rate)

    def center_offset(self, k):
        return self.c * np.asarray(k, dtype=float) ** self.exponent

    def gamma_terms(self) -> list[Term]:
        if self.kind == "exp":
            return [Term(self.A, 0.0, self.rate)]
        return [Term(self.A, -self.rate, 0.0)]

    def sqrt_gamma_terms(self) -> list[Term]:
        if self.kind == "exp":
            return [Term(math.sqrt(self.A), 0.0, self.rate / 2)]
        return [Term(math.sqrt(self.A), -self.rate / 2, 0.0)]

    def eta_power_terms(self, p: float, lower: bool = False) -> list[Term]:
        """Terms bounding ``eta_{k,0}**p`` from above (or below if ``lower``)."""
        c = self.c / 2 if lower else self.c
        return [Term(c**p, self.exponent * p, 0.0)]

    def to_json(self) -> dict:
        if self.exponent == 2.0:
            position = {"kind": "quadratic", "c": self.c}
        else:
            position = {"kind": "power", "c": self.c, "exponent": self.exponent}
        return {"kind": self.kind, "A": self.A, "rate": self.rate, "position": position}

    @classmethod
    def from_json(cls, doc: dict) -> "TailModel":
        pos = doc.get("position", {})
        kind = pos.get("kind", "quadratic")
        if kind == "quadratic":
            exponent = 2.0
        elif kind == "power":
            exponent = float(pos["exponent"])
        else:
            raise GapSetError(f"unknown position law {kind!r}")
        return cls(doc["kind"], float(doc["A"]), float(doc["rate"]), float(pos["c"]), exponent)


@dataclass(frozen=True)
class GapSet:
    """Validated spectral set; build instances with :func:`validate_gapset`."""

    e_low: float
    gaps: tuple[Gap, ...]
    tail: Optional[TailModel] = None
    _checked: bool = field(default=False, repr=False, compare=False)

    def __len__(self) -> int:
        return len(self.gaps)

    @cached_property
    def lower(self) -> np.ndarray:
        return np.array([g.lower for g in self.gaps], dtype=float)

    @cached_property
    def upper(self) -> np.ndarray:
        return np.array([g.upper for g in self.gaps], dtype=float)

    @cached_property
    def gamma(self) -> np.ndarray:
        return np.array([g.length for g in self.gaps], dtype=float)

    @cached_property
    def eta0(self) -> np.ndarray:
        return self.lower - self.e_low

    @cached_property
    def eta(self) -> np.ndarray:
        """Pairwise gap distances; the diagonal is ``inf``."""
        lo, up = self.lower, self.upper
        d = np.maximum(lo[None, :] - up[:, None], lo[:, None] - up[None, :])
        np.fill_diagonal(d, np.inf)
        return d

    def eta_jk(self, j: int, k: int) -> float:
        return float(self.eta[j - 1, k - 1])

    # -- tail geometry -------------------------------------------------------
    @property
    def first_tail_index(self) -> int:
        return len(self.gaps) + 1

    def tail_lower(self, k):
        t = self.tail
        return self.e_low + t.center_offset(k) - t.gamma(k) / 2

    @cached_property
    def tail_gamma_sum(self) -> float:
        if self.tail is None:
            return 0.0
        return _tails.tail_sum(self.tail.gamma_terms(), self.first_tail_index)

    @cached_property
    def tail_sqrt_gamma_sum(self) -> float:
        if self.tail is None:
            return 0.0
        return _tails.tail_sum(self.tail.sqrt_gamma_terms(), self.first_tail_index)

    @cached_property
    def tail_distance_floor(self) -> float:
        """Lower bound for the distance from any tail gap to any other gap."""
        if self.tail is None:
            return math.inf
        k0 = self.first_tail_index
        t = self.tail
        adjacent = float(t.center_offset(k0 + 1) - t.center_offset(k0)
                         - (t.gamma(k0) + t.gamma(k0 + 1)) / 2)
        if len(self.gaps):
            adjacent = min(adjacent, float(self.tail_lower(k0) - self.upper[-1]))
        return adjacent

    @cached_property
    def tail_eta0_floor(self) -> float:
        if self.tail is None:
            return math.inf
        return float(self.tail_lower(self.first_tail_index) - self.e_low)

    def tail_distance_from(self, j: int) -> float:
        """Lower bound for the distance between explicit gap ``j`` and any tail gap."""
        if self.tail is None:
            return math.inf
        return float(self.tail_lower(self.first_tail_index) - self.upper[j - 1])

    def to_json(self) -> dict:
        doc = {
            "e_low": self.e_low,
            "gaps": [[g.lower, g.upper] for g in self.gaps],
            "tail": None if self.tail is None else self.tail.to_json(),
        }
        if any(g.upper - g.lower != g.length for g in self.gaps):
            doc["widths"] = [g.length for g in self.gaps]
        return doc


def validate_gapset(raw: Sequence[Sequence[float]], e_low: float = 0.0,
                    tail: Optional[TailModel] = None,
                    widths: Optional[Sequence[float]] = None) -> GapSet:
    """Build a :class:`GapSet` from ``[(lo, hi), ...]``.

    Gaps are sorted by lower edge.  Overlapping or touching gaps, empty
    intervals and gaps starting below ``e_low`` raise :class:`GapSetError`.
    ``widths`` optionally overrides ``hi - lo`` (used for gaps narrower than
    the floating-point spacing at their position).
    """
    e_low = float(e_low)
    gaps = []
    for i, iv in enumerate(raw):
        lo, hi = float(iv[0]), float(iv[1])
        length = float(widths[i]) if widths is not None else hi - lo
        if not (length > 0) or not math.isfinite(length):
            raise GapSetError(f"empty interval ({lo}, {hi})")
        if lo < e_low:
            raise GapSetError(f"gap ({lo}, {hi}) lies below e_low={e_low}")
        gaps.append(Gap(lo, length))
    gaps.sort(key=lambda g: g.lower)
    for a, b in zip(gaps, gaps[1:]):
        if not b.lower > a.upper:
            raise GapSetError(
                f"overlapping gaps ({a.lower}, {a.upper}) and ({b.lower}, {b.upper})")
    S = GapSet(e_low, tuple(gaps), tail, True)
    if tail is not None:
        k0 = S.first_tail_index
        if tail.gamma(k0) > tail.center_offset(k0):
            raise GapSetError("first tail gap is wider than its distance to e_low")
        if not S.tail_distance_floor > 0:
            raise GapSetError("tail gaps overlap each other or the explicit gaps")
    return S


def load_spectrum(path) -> GapSet:
    doc = json.loads(Path(path).read_text(encoding="utf-8"))
    return spectrum_from_json(doc)


def spectrum_from_json(doc: dict) -> GapSet:
    try:
        tail = TailModel.from_json(doc["tail"]) if doc.get("tail") else None
        return validate_gapset(doc["gaps"], doc["e_low"], tail, doc.get("widths"))
    except (KeyError, TypeError, IndexError) as exc:
        raise GapSetError(f"malformed spectrum document: {exc}") from exc


def _check_index(S: GapSet, j: int) -> int:
    if not 1 <= j <= len(S.gaps):
        raise IndexError(f"gap index {j} outside 1..{len(S.gaps)}")
    return j - 1


def metric_weight(S: GapSet, n: int, j: int) -> float:
    """Weight ``sqrt(gamma_j (1 + eta_{j,0}**n))`` of the torus metric."""
    i = _check_index(S, j)
    return math.sqrt(S.gamma[i] * (1.0 + S.eta0[i] ** n))


def metric_weights(S: GapSet, n: int) -> np.ndarray:
    return np.sqrt(S.gamma * (1.0 + S.eta0**n))


def c_j(S: GapSet, j: int, tol: float = 1e-12, return_bound: bool = False):
    """The constant ``C_j = (eta_{j,0}+gamma_j)^(1/2) prod_{l != j} (1+gamma_l/eta_{j,l})^(1/2)``.

    Tail factors are multiplied in explicitly until the certified bound on
    the remaining log-sum drops below ``tol``.  With ``return_bound`` the
    pair ``(C_j, bound)`` is returned, where ``bound`` dominates the
    neglected multiplicative tail ``C_j * (exp(remainder) - 1)``.
    """
    i = _check_index(S, j)
    eta = S.eta[i]
    mask = np.arange(len(S.gaps)) != i
    logs = [0.5 * math.log(S.eta0[i] + S.gamma[i])]
    logs.extend(0.5 * np.log1p(S.gamma[mask] / eta[mask]))
    remainder = 0.0
    if S.tail is not None:
        t = S.tail
        up = S.upper[i]
        k = S.first_tail_index
        block = 16
        while True:
            rest = _tails.tail_sum(t.gamma_terms(), k)
            if not math.isfinite(rest):
                raise DivergenceError("tail gap lengths are not summable")
            remainder = 0.5 * rest / float(S.tail_lower(k) - up)
            if remainder < tol:
                break
            if k > 1 << 22:
                raise DivergenceError(f"C_{j} tail does not reach tol={tol}")
            ks = np.arange(k, k + block, dtype=float)
            logs.extend(0.5 * np.log1p(t.gamma(ks) / (S.tail_lower(ks) - up)))
            k += block
            block *= 2
    value = math.exp(math.fsum(logs))
    if return_bound:
        return value, value * math.expm1(remainder)
    return value


def c_upper(S: GapSet, tol: float = 1e-12) -> np.ndarray:
    """Certified upper bounds for ``C_j`` over the explicit gaps."""
    out = np.empty(len(S.gaps))
    for j in range(1, len(S.gaps) + 1):
        v, b = c_j(S, j, tol, return_bound=True)
        out[j - 1] = v + b
    return out


# ---------------------------------------------------------------------------
# Craig-type conditions

CONDITIONS = ("moment", "craig1", "craig2", "craig3", "craig4")


@dataclass(frozen=True)
class CraigCondition:
    """One summability/supremum condition.

    ``value`` is the explicit (truncated) quantity, ``upper`` a certified
    upper bound for the full quantity including the tail.
    """

    name: str
    value: float
    upper: float
    status: str  # "finite" | "divergent" | "inconclusive"
    certificate: str = ""

    @property
    def ok(self) -> bool:
        return math.isfinite(self.upper)


@dataclass(frozen=True)
class CraigReport:
    n: int
    conditions: dict
    note: str = ("tail bounds are certified by integral comparison against the "
                 "tail model; this certification is a modelling choice")

    @property
    def passed(self) -> bool:
        return all(c.ok for c in self.conditions.values())

    def __getitem__(self, name: str) -> CraigCondition:
        return self.conditions[name]

    def to_json(self) -> dict:
        return {
            "n": self.n,
            "pass": self.passed,
            "conditions": {k: {"value": c.value, "upper": c.upper, "status": c.status,
                               "certificate": c.certificate}
                           for k, c in self.conditions.items()},
            "note": self.note,
        }


def _one_plus_eta_pow(t: TailModel, n: int, p: float, lower: bool = False) -> list[Term]:
    """Terms bounding ``(1 + eta^n)^p`` (p in {1/2, 1, 3/2}) on the tail."""
    if lower:
        return t.eta_power_terms(n * p, lower=True) if n > 0 else [Term(2.0**p)]
    if n == 0:
        return [Term(2.0**p)]
    if p == 1.0:
        return [Term(1.0)] + t.eta_power_terms(n)
    if p == 0.5:
        return [Term(1.0)] + t.eta_power_terms(n / 2)
    if p == 1.5:
        return _tails.scale([Term(1.0)] + t.eta_power_terms(1.5 * n), math.sqrt(2.0))
    raise ValueError(p)


def _divergence_note(kind: str, terms: list[Term]) -> tuple[str, str]:
    p = _tails.leading_power(terms)
    if kind == "sum" and p >= -1.0:
        return "divergent", f"summand >= B*k^{p:g} with {p:g} >= -1: p-series comparison diverges"
    if kind == "sup" and p > 0.0:
        return "divergent", f"term >= B*k^{p:g} with {p:g} > 0: unbounded"
    return "inconclusive", "upper bound infinite, no lower-bound certificate"


def check_craig(S: GapSet, n: int, tol: float = 1e-12) -> CraigReport:
    """Evaluate the moment condition and the four Craig-type conditions."""
    if n < 0:
        raise ValueError("hierarchy index n must be >= 0")
    g, e0 = S.gamma, S.eta0
    w = 1.0 + e0**n
    N = len(S.gaps)
    t = S.tail
    k0 = S.first_tail_index
    res = {}

    c_div = t is not None and not math.isfinite(S.tail_gamma_sum)
    C = np.full(N, math.inf) if c_div else (c_upper(S, tol) if N else np.zeros(0))
    with np.errstate(divide="ignore"):
        inner = (np.sqrt(np.outer(g, g)) / S.eta).sum(axis=1) if N else np.zeros(0)
        ratio3 = g * w * C / e0

    moment = math.fsum(g * w)
    craig1 = math.fsum(np.sqrt(g * w))
    explicit = {
        "moment": moment,
        "craig1": craig1,
        "craig2": float(np.max(C * w**1.5 * inner, initial=0.0)),
        "craig3": float(np.max(ratio3, initial=0.0)),
        "craig4": float(np.max(C * np.sqrt(g) * w**1.5, initial=0.0)),
    }
    if t is None:
        for name in CONDITIONS:
            v = explicit[name]
            status = "finite" if math.isfinite(v) else "divergent"
            cert = "" if status == "finite" else "eta_{j,0} = 0 for some gap"
            res[name] = CraigCondition(name, v, v, status, cert)
        return CraigReport(n, res)

    gam, sg = t.gamma_terms(), t.sqrt_gamma_terms()
    # -- sums ------------------------------------------------------------
    sums = {
        "moment": (_tails.mul(gam, _one_plus_eta_pow(t, n, 1.0)),
                   _tails.mul(gam, _one_plus_eta_pow(t, n, 1.0, lower=True))),
        "craig1": (_tails.mul(sg, _one_plus_eta_pow(t, n, 0.5)),
                   _tails.mul(sg, _one_plus_eta_pow(t, n, 0.5, lower=True))),
    }
    for name, (up_terms, lo_terms) in sums.items():
        tail_up = _tails.tail_sum(up_terms, k0)
        v = explicit[name]
        if math.isfinite(tail_up):
            res[name] = CraigCondition(name, v, v + tail_up, "finite",
                                       f"tail <= {tail_up:.3e} by integral comparison")
        else:
            status, cert = _divergence_note("sum", lo_terms)
            res[name] = CraigCondition(name, v, math.inf, status, cert)

    # -- suprema -----------------------------------------------------------
    if c_div:
        for name in ("craig2", "craig3", "craig4"):
            res[name] = CraigCondition(name, math.inf, math.inf, "divergent",
                                       "gap lengths not summable: every C_j is infinite")
        return CraigReport(n, {k: res[k] for k in CONDITIONS})
    sqrt_g_all = math.fsum(np.sqrt(g)) + S.tail_sqrt_gamma_sum
    g_all = math.fsum(g) + S.tail_gamma_sum
    d_star = S.tail_distance_floor
    c_env = math.exp(0.5 * g_all / d_star) * math.sqrt(t.c + float(t.gamma(k0)) / 2)
    c_tail = [Term(c_env, t.exponent / 2, 0.0)]  # C_k <= c_env * k^(s/2)
    c_tail_lo = [Term(math.sqrt(t.c / 2), t.exponent / 2, 0.0)]

    # explicit j with tail-corrected inner sums
    if N:
        d_j = np.array([S.tail_distance_from(j) for j in range(1, N + 1)])
        inner_full = inner + np.sqrt(g) * S.tail_sqrt_gamma_sum / d_j
        expl_up = {
            "craig2": float(np.max(C * w**1.5 * inner_full)),
            "craig3": explicit["craig3"],
            "craig4": explicit["craig4"],
        }
    else:
        expl_up = {"craig2": 0.0, "craig3": 0.0, "craig4": 0.0}

    w15 = _one_plus_eta_pow(t, n, 1.5)
    w15_lo = _one_plus_eta_pow(t, n, 1.5, lower=True)
    sups = {
        "craig2": (_tails.scale(_tails.mul(_tails.mul(c_tail, w15), sg), sqrt_g_all / d_star),
                   None),
        "craig3": (_tails.scale(_tails.mul(_tails.mul(gam, _one_plus_eta_pow(t, n, 1.0)), c_tail),
                                1.0 / S.tail_eta0_floor),
                   _tails.mul(_tails.mul(_tails.mul(gam, _one_plus_eta_pow(t, n, 1.0, lower=True)),
                                         c_tail_lo), [Term(1.0 / t.c, -t.exponent, 0.0)])),
        "craig4": (_tails.mul(_tails.mul(c_tail, sg), w15),
                   _tails.mul(_tails.mul(c_tail_lo, sg), w15_lo)),
    }
    for name, (up_terms, lo_terms) in sups.items():
        tail_up = _tails.tail_sup(up_terms, k0)
        v = explicit[name]
        if math.isfinite(tail_up) and math.isfinite(expl_up[name]):
            res[name] = CraigCondition(name, v, max(expl_up[name], tail_up), "finite",
                                       f"tail sup <= {tail_up:.3e}")
        elif not math.isfinite(expl_up[name]):
            res[name] = CraigCondition(name, v, math.inf, "divergent",
                                       "eta_{j,0} = 0 for some gap")
        elif lo_terms is None:
            res[name] = CraigCondition(name, v, math.inf, "inconclusive",
                                       "upper bound infinite, no lower-bound certificate")
        else:
            status, cert = _divergence_note("sup", lo_terms)
            res[name] = CraigCondition(name, v, math.inf, status, cert)
    return CraigReport(n, {k: res[k] for k in CONDITIONS})
