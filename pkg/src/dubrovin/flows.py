"""Dubrovin-type vector fields on the torus of Dirichlet data.

``Psi`` generates the x-translation flow and ``Xi`` the n-th hierarchy flow::

    Psi_j = 2 sqrt((mu_j - E) prod_{l != j} (E_l^- - mu_j)(E_l^+ - mu_j) / (mu_l - mu_j)^2)
    Xi_j  = (sum_{l=0}^n R_{n-l} mu_j^l) Psi_j

The product is evaluated in log space.  Each factor is rewritten as
``(1 - gamma_l cos^2(phi_l/2) / d)(1 + gamma_l sin^2(phi_l/2) / d)`` with
``d = mu_l - mu_j`` so narrow gaps keep full relative accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dirichlet import DirichletState
from .moments import BoundConstants, bound_constants, q_tail_bound, q_values, r_bound_from_q, r_from_q
from .spectrum import DivergenceError, GapSet, c_upper, check_craig


def _phi(phi) -> np.ndarray:
    return phi.phi if isinstance(phi, DirichletState) else np.asarray(phi, dtype=float)


def psi_array(S: GapSet, phi: np.ndarray) -> np.ndarray:
    """``Psi`` for angle arrays of shape ``(..., N)`` (explicit gaps only)."""
    phi = np.asarray(phi, dtype=float)
    g = S.gamma
    c2 = np.cos(phi / 2.0) ** 2
    s2 = 1.0 - c2
    off = g * c2  # mu - E^-
    base = S.eta0 + off  # mu - E
    N = g.shape[0]
    if N == 0:
        return np.zeros(phi.shape)
    # d[..., j, l] = mu_l - mu_j
    d = (S.lower[None, :] - S.lower[:, None]) + (off[..., None, :] - off[..., :, None])
    eye = np.eye(N, dtype=bool)
    d = np.where(eye, 1.0, d)
    gl = g * c2
    gu = g * s2
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.log1p(-gl[..., None, :] / d) + np.log1p(gu[..., None, :] / d)
        t = np.where(eye, 0.0, t)
        logpsi = math.log(2.0) + 0.5 * (np.log(base) + np.sum(t, axis=-1))
    return np.exp(logpsi)


def psi_tail_logbound(S: GapSet) -> np.ndarray:
    """Per-gap bound on ``|log Psi_j|`` contributed by the unrepresented tail gaps.

    Each tail factor lies in ``[1/(1+gamma/eta), 1+gamma/eta]`` so its
    half-log is at most ``gamma_l / (2 eta_{j,l})``.
    """
    if S.tail is None:
        return np.zeros(len(S.gaps))
    gsum = S.tail_gamma_sum
    if not math.isfinite(gsum):
        raise DivergenceError("tail gap lengths are not summable")
    d = np.array([S.tail_distance_from(j) for j in range(1, len(S.gaps) + 1)])
    return 0.5 * gsum / d


def psi(S: GapSet, phi, tol: Optional[float] = None, return_bound: bool = False):
    """The translation vector field ``Psi(phi)``.

    With ``return_bound`` returns ``(Psi, bound)`` where ``bound[j]``
    dominates the effect of the truncated tail on ``Psi_j``.
    """
    p = _phi(phi)
    value = psi_array(S, p)
    if not return_bound and tol is None:
        return value
    bound = value * np.expm1(psi_tail_logbound(S))
    if tol is not None and np.any(bound > tol):
        raise DivergenceError(f"Psi tail bound {bound.max():.3e} exceeds tol={tol:.3e}")
    return (value, bound) if return_bound else value


def xi_polynomial(S: GapSet, n: int, phi: np.ndarray) -> np.ndarray:
    """``sum_{l=0}^n R_{n-l} mu_j^l`` for angle arrays of shape ``(..., N)``."""
    phi = np.asarray(phi, dtype=float)
    mu = S.lower + S.gamma * np.cos(phi / 2.0) ** 2
    if n == 0:
        return np.ones(phi.shape)
    Q = q_values(S, phi, n)
    out = np.zeros(phi.shape)
    # Horner in mu with coefficients R_0 (leading) ... R_n (constant)
    for m in range(0, n + 1):
        out = out * mu + r_from_q(Q, m)[..., None]
    return out


def xi_array(S: GapSet, n: int, phi: np.ndarray) -> np.ndarray:
    return xi_polynomial(S, n, phi) * psi_array(S, phi)


def xi(S: GapSet, n: int, phi, tol: Optional[float] = None, return_bound: bool = False):
    """The hierarchy vector field ``Xi(phi)``; tolerance splits between ``Psi`` and ``R_m``."""
    if n < 0:
        raise ValueError("n must be nonnegative")
    p = _phi(phi)
    poly = xi_polynomial(S, n, p)
    ps = psi_array(S, p)
    value = poly * ps
    if not return_bound and tol is None:
        return value
    half = None if tol is None else tol / 2
    _, pb = psi(S, p, half, return_bound=True)
    mu = S.lower + S.gamma * np.cos(p / 2.0) ** 2
    pb_poly = np.zeros_like(p)
    if n:
        Q = q_values(S, p, n)
        dQ = np.array([q_tail_bound(S, k) for k in range(1, n + 1)])
        for ell in range(n + 1):
            m = n - ell
            if m:
                rb = float(r_bound_from_q(Q, dQ, m))
                pb_poly = pb_poly + rb * np.abs(mu) ** ell
    if half is not None and np.any(pb_poly * ps > half):
        raise DivergenceError("R_m tail bound exceeds tolerance")
    bound = np.abs(poly) * pb + pb_poly * (ps + pb)
    return (value, bound) if return_bound else value


# ---------------------------------------------------------------------------
# bounds


@dataclass(frozen=True)
class JacobianConstants:
    """The intermediate constants ``M~1``, ``M~3`` and ``M~`` of the Lipschitz chain."""

    base: BoundConstants
    Mt1: float
    Mt3: float
    Mt: float


def jacobian_constants(S: GapSet, n: int, consts: Optional[BoundConstants] = None,
                       seed: int = 0) -> JacobianConstants:
    if n < 1:
        raise ValueError("the Jacobian chain is stated for n >= 1")
    b = consts if consts is not None else bound_constants(S, n, seed=seed)
    E = abs(S.e_low)
    G = float(np.max(S.gamma, initial=0.0))
    if S.tail is not None:
        G = max(G, float(S.tail.gamma(S.first_tail_index)))
    Mt1 = 2.0 ** (n - 1) * (n + 1) * b.M1 * (1.0 + E**n)
    Mt3 = 2.0 ** (n + 2) * n * b.M3 * (1.0 + E**n)
    Mt = 2.0 ** (2 * n - 2) * max(Mt1, Mt3) * (1.0 + G**n) ** 2
    return JacobianConstants(b, Mt1, Mt3, Mt)


def jacobian_bounds(S: GapSet, n: int, consts: Optional[JacobianConstants] = None) -> np.ndarray:
    """Entrywise bounds ``B[j, k] >= sup |d Xi_j / d phi_k|`` over the explicit gaps."""
    jc = consts if consts is not None else jacobian_constants(S, n)
    g, e0, eta = S.gamma, S.eta0, S.eta
    C = c_upper(S)
    w = 1.0 + e0**n
    with np.errstate(divide="ignore"):
        off = jc.Mt * (C * w)[:, None] * (g[None, :] / eta + g[None, :] * w[None, :])
        inner = np.sum(np.where(np.isinf(eta), 0.0, g[None, :] / (eta * (eta + g[None, :]))), axis=1)
        if S.tail is not None:
            d = np.array([S.tail_distance_from(j) for j in range(1, len(g) + 1)])
            inner = inner + S.tail_gamma_sum / d**2
        diag = 2 * n * jc.Mt * C * g * w * (1.0 + 1.0 / e0 + inner)
    B = off.copy()
    np.fill_diagonal(B, diag)
    return B


@dataclass(frozen=True)
class LipschitzEstimate:
    L1: float
    L2: float
    constants: JacobianConstants

    @property
    def total(self) -> float:
        return self.L1 + self.L2


def lipschitz_estimate(S: GapSet, n: int, consts: Optional[JacobianConstants] = None,
                       detail: bool = False):
    """Lipschitz constant ``L1 + L2`` of ``Xi`` in the weighted sup metric.

    Without a tail the two suprema are evaluated exactly over the explicit
    gaps.  With a tail each supremum is replaced by a certified upper bound
    assembled from the Craig-condition bounds.
    """
    report = check_craig(S, n)
    if not report.passed:
        bad = [k for k, c in report.conditions.items() if not c.ok]
        raise DivergenceError(f"Craig-type conditions fail: {', '.join(bad)}")
    jc = consts if consts is not None else jacobian_constants(S, n)
    Mt = jc.Mt
    g, e0, eta = S.gamma, S.eta0, S.eta
    C = c_upper(S)
    w = 1.0 + e0**n
    if S.tail is None:
        with np.errstate(divide="ignore"):
            ratio = np.where(np.isinf(eta), 0.0, np.sqrt(np.outer(g, g)) / eta)
        t1 = np.max(C * w**1.5 * np.sum(ratio / np.sqrt(w)[None, :], axis=1))
        t2 = np.sum(np.sqrt(g * w)) * np.max(C * np.sqrt(g) * w**1.5)
        L1 = Mt * (t1 + t2)
        with np.errstate(divide="ignore"):
            s3 = np.max(g * w * C / e0)
        L2 = 2 * n * Mt * (np.max(C * g * w) + s3 + np.max(C * w * np.sum(ratio**2, axis=1)))
    else:
        c1, c2, c3, c4 = (report[k].upper for k in ("craig1", "craig2", "craig3", "craig4"))
        G = max(float(np.max(g, initial=0.0)), float(S.tail.gamma(S.first_tail_index)))
        sqrt_all = float(np.sum(np.sqrt(g))) + S.tail_sqrt_gamma_sum
        finite_eta = eta[np.isfinite(eta)]
        eta_min = min(float(np.min(finite_eta, initial=math.inf)), S.tail_distance_floor)
        L1 = Mt * (c2 + c1 * c4)
        L2 = 2 * n * Mt * (c4 * math.sqrt(G) + c3 + c2 * math.sqrt(G) * sqrt_all / eta_min)
    est = LipschitzEstimate(float(L1), float(L2), jc)
    return est if detail else est.total


@dataclass(frozen=True)
class BoundSampleReport:
    """Worst sampled ratios against the Jacobian and Lipschitz bounds."""

    samples: int
    jacobian_violations: int
    jacobian_worst_ratio: float
    lipschitz_violations: int
    lipschitz_worst_quotient: float
    lipschitz_bound: float

    @property
    def passed(self) -> bool:
        return self.jacobian_violations == 0 and self.lipschitz_violations == 0


def sample_bound_violations(S: GapSet, n: int, samples: int = 1000, seed: int = 0,
                            h: float = 1e-6) -> BoundSampleReport:
    """Compare central-difference Jacobians and difference quotients of ``Xi`` with the bounds.

    Half of the quotient pairs are independent uniform states and half are
    small perturbations, where quotients approach the local Jacobian norm.
    """
    from .dirichlet import arc, metric_weights

    rng = np.random.default_rng(seed)
    N = len(S.gaps)
    B = jacobian_bounds(S, n)
    L = lipschitz_estimate(S, n)
    phi = rng.uniform(0.0, 2 * math.pi, (samples, N))
    J = np.empty((samples, N, N))
    for k in range(N):
        e = np.zeros(N)
        e[k] = h
        J[:, :, k] = (xi_array(S, n, phi + e) - xi_array(S, n, phi - e)) / (2 * h)
    ratio = np.abs(J) / B[None]
    small = rng.uniform(-1e-3, 1e-3, (samples, N))
    far = rng.uniform(0.0, 2 * math.pi, (samples, N))
    psi_ = np.where((np.arange(samples) % 2 == 0)[:, None], phi + small, far)
    w = metric_weights(S, n)
    num = np.max(w * np.abs(xi_array(S, n, phi) - xi_array(S, n, psi_)), axis=1)
    den = np.max(w * arc(phi, psi_), axis=1)
    quot = num / np.where(den > 0, den, np.inf)
    return BoundSampleReport(samples, int(np.sum(ratio > 1.0)), float(np.max(ratio)),
                             int(np.sum(quot > L)), float(np.max(quot)), float(L))
