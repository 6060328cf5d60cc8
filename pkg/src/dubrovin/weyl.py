"""Diagonal Green's function from Dirichlet data, Weyl m-functions and the
M-matrix, its time evolution, and the reflectionless / asymptotic checks.

The Green's function is the product

    G(z) = 1/2 (E - z)^(-1/2) prod_l (mu_l - z) (E_l^- - z)^(-1/2) (E_l^+ - z)^(-1/2)

with every square root principal.  Real ``z`` is read as ``z + i0``.  Each
gap factor tends to 1 away from its gap and is then evaluated through
``log1p`` for accuracy.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dirichlet import DirichletState, dmu_dphi, wrap_angle
from .flows import psi_array, xi_array
from .hierarchy import fd_weights
from .integrator import DEFAULT_TOL, PROBE_H, probe_derivatives, trajectory, x_probe
from .moments import q_values, r_from_q, trace_q_many
from .ode import IntegratorStats, integrate
from .spectrum import DivergenceError, GapSet


class SpectrumPointError(ValueError):
    """``z`` lies on the spectrum (or too close to it for the requested check)."""


def _phi(phi) -> np.ndarray:
    return phi.phi if isinstance(phi, DirichletState) else np.asarray(phi, dtype=float)


def _w(a, z: complex):
    """``a - z`` as complex numbers whose imaginary part carries the sign of ``-Im z`` (also for 0)."""
    re = np.asarray(a, dtype=float) - z.real
    out = np.empty(re.shape, dtype=complex)
    out.real = re
    out.imag = -z.imag if z.imag != 0 else -0.0
    return out


def in_spectrum(S: GapSet, lam: float) -> bool:
    if lam < S.e_low:
        return False
    if np.any((S.lower < lam) & (lam < S.upper)):
        return False
    if S.tail is not None and len(S.gaps) and lam > S.upper[-1]:
        return True  # tail gaps are not resolved pointwise
    return True


def _check_z(S: GapSet, z: complex) -> complex:
    z = complex(z)
    if z.imag == 0 and in_spectrum(S, z.real):
        raise SpectrumPointError(f"z={z.real} lies in the spectrum; use z + i*delta")
    return z


def _gap_logs(S: GapSet, mu: np.ndarray, z: complex):
    """Per-gap ``log f_l`` with ``f_l = (mu_l - z)(E_l^- - z)^(-1/2)(E_l^+ - z)^(-1/2)``."""
    a = _w(mu, z)
    lo = _w(S.lower, z)
    up = _w(S.upper, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        direct = np.log(a) - 0.5 * np.log(lo) - 0.5 * np.log(up)
        far = np.abs(a) > 2.0 * S.gamma
        wm = (S.lower - mu) / np.where(far, a, 1.0)
        wp = (S.upper - mu) / np.where(far, a, 1.0)
        # E^+ - mu = gamma - (mu - E^-) keeps narrow gaps exact
        wp = np.where(far, (S.gamma - (mu - S.lower)) / np.where(far, a, 1.0), wp)
        series = -0.5 * (np.log1p(wm) + np.log1p(wp))
    return np.where(far, series, direct)


def _base_log(S: GapSet, z: complex) -> complex:
    w = _w(np.array([S.e_low]), z)[0]
    return math.log(0.5) - 0.5 * np.log(w)


def _tail_log_bound(S: GapSet, z: complex) -> float:
    if S.tail is None:
        return 0.0
    lo = float(S.tail_lower(S.first_tail_index))
    d = max(lo - z.real, abs(z.imag))
    g0 = float(S.tail.gamma(S.first_tail_index))
    if d <= 2.0 * g0:
        return math.inf
    return 2.0 * S.tail_gamma_sum / d


def green_diag(S: GapSet, phi, z: complex, tol: Optional[float] = None,
               return_bound: bool = False):
    """Diagonal Green's function ``G(z)`` at the Dirichlet data ``phi``."""
    z = _check_z(S, z)
    p = _phi(phi)
    mu = S.lower + S.gamma * np.cos(p / 2.0) ** 2
    logs = _gap_logs(S, mu, z)
    total = _base_log(S, z) + np.sum(logs)
    G = complex(np.exp(total))
    if not return_bound and tol is None:
        return G
    tb = _tail_log_bound(S, z)
    bound = abs(G) * math.expm1(tb) if math.isfinite(tb) else math.inf
    if tol is not None and bound > tol:
        raise DivergenceError(f"Green tail bound {bound:.3e} exceeds tol={tol:.3e}")
    return (G, bound) if return_bound else G


def _reduced(S: GapSet, mu: np.ndarray, z: complex) -> np.ndarray:
    """``G / (mu_j - z)`` for every j, without dividing (finite at ``z = mu_j``)."""
    logs = _gap_logs(S, mu, z)
    base = _base_log(S, z)
    lo = _w(S.lower, z)
    up = _w(S.upper, z)
    with np.errstate(divide="ignore", invalid="ignore"):
        own = -0.5 * np.log(lo) - 0.5 * np.log(up)
        rest = np.sum(logs) - logs
        out = np.exp(base + rest + own)
    zero = np.isneginf(logs.real)
    if zero.any():
        # G vanishes to first order: only the gap with mu_j = z survives
        out = np.where(zero, out, 0.0)
        for j in np.nonzero(zero)[0]:
            others = np.delete(logs, j)
            out[j] = np.exp(base + np.sum(others) + own[j])
    return out


def green_dx(S: GapSet, phi, z: complex, tol: Optional[float] = None,
             return_bound: bool = False):
    """``∂x G`` via ``sum_j mu_j' G / (mu_j - z)`` with ``mu_j' = dmu/dphi * Psi_j``."""
    z = _check_z(S, z)
    p = _phi(phi)
    if p.size == 0:
        return (0j, 0.0) if return_bound else 0j
    mu = S.lower + S.gamma * np.cos(p / 2.0) ** 2
    dmu = dmu_dphi(S, p) * psi_array(S, p)
    val = complex(np.sum(dmu * _reduced(S, mu, z)))
    if not return_bound and tol is None:
        return val
    tb = _tail_log_bound(S, z)
    bound = abs(val) * math.expm1(tb) if math.isfinite(tb) else math.inf
    if tol is not None and bound > tol:
        raise DivergenceError(f"Green derivative tail bound {bound:.3e} exceeds tol={tol:.3e}")
    return (val, bound) if return_bound else val


def green_at_dirichlet(S: GapSet, phi, j: int) -> complex:
    """``∂x G`` at ``z = mu_j`` (an interior Dirichlet point); its square is 1."""
    p = _phi(phi)
    mu = S.lower + S.gamma * np.cos(p / 2.0) ** 2
    z = complex(mu[j - 1], 0.0)
    dmu = dmu_dphi(S, p) * psi_array(S, p)
    return complex(dmu[j - 1] * _reduced(S, mu, z)[j - 1])


def m_functions(S: GapSet, phi, z: complex, tol: Optional[float] = None) -> tuple:
    """Weyl m-functions ``(m_-, m_+)`` from ``G`` and ``∂x G``."""
    G = green_diag(S, phi, z, tol)
    if G == 0:
        raise SpectrumPointError("z is a Dirichlet eigenvalue: the m-functions have a pole")
    Gx = green_dx(S, phi, z, tol)
    return -(1 + Gx) / (2 * G), (Gx - 1) / (2 * G)


@dataclass(frozen=True)
class WeylMatrix:
    """``M = [[m1, m3], [m3, m2]]`` at spectral point ``z``."""

    z: complex
    M: np.ndarray

    @property
    def m1(self) -> complex:
        return complex(self.M[0, 0])

    @property
    def m2(self) -> complex:
        return complex(self.M[1, 1])

    @property
    def m3(self) -> complex:
        return complex(self.M[0, 1])

    @property
    def det_residual(self) -> float:
        """``|m1 m2 - m3^2 + 1/4|`` (exactly 0 in exact arithmetic)."""
        return abs(self.M[0, 0] * self.M[1, 1] - self.M[0, 1] * self.M[1, 0] + 0.25)

    @property
    def symmetry_residual(self) -> float:
        return abs(self.M[0, 1] - self.M[1, 0])

    def m_functions(self) -> tuple:
        G, Gx = self.m1, 2 * self.m3
        return -(1 + Gx) / (2 * G), (Gx - 1) / (2 * G)


def weyl_from_g(z: complex, G: complex, Gx: complex) -> WeylMatrix:
    m3 = Gx / 2
    m2 = (Gx * Gx - 1) / (4 * G)
    return WeylMatrix(complex(z), np.array([[G, m3], [m3, m2]], dtype=complex))


def M_matrix(S: GapSet, phi, z: complex, tol: Optional[float] = None) -> WeylMatrix:
    """Weyl M-matrix built from the Dirichlet data."""
    G = green_diag(S, phi, z, tol)
    if G == 0:
        raise SpectrumPointError("z is a Dirichlet eigenvalue: M has a pole")
    return weyl_from_g(z, G, green_dx(S, phi, z, tol))


def reflection_coefficients(W: WeylMatrix) -> tuple:
    """``R_± = -(m_∓ + conj(m_±)) / (m_- + m_+)`` from a matrix at ``lambda + i delta``."""
    mm, mp = W.m_functions()
    s = mm + mp
    return -(mp + np.conj(mm)) / s, -(mm + np.conj(mp)) / s


# ---------------------------------------------------------------------------
# t-evolution of M


def p_matrix(S: GapSet, n: int, phi, z: complex, h: float = PROBE_H, order: int = 4) -> np.ndarray:
    """``P(0, t; z)`` with ``f̂_k = R_k`` sampled on an x-probe and differentiated by FD."""
    p = _phi(phi)
    radius = fd_weights(2, order)[0]
    probe = x_probe(S, p, h, radius)  # (2r+1, N)
    if n:
        Q = q_values(S, probe, n)
        R = np.stack([r_from_q(Q, m) for m in range(n + 1)], axis=-1)  # (2r+1, n+1)
    else:
        R = np.ones((2 * radius + 1, 1))
    zpow = np.array([z**ell for ell in range(n + 1)], dtype=complex)
    F = R[:, ::-1] @ zpow  # F_n(z) = sum_l R_{n-l} z^l
    F0, F1, F2 = probe_derivatives(F, h, 2, order)
    q = float(trace_q_many(S, p)) if p.size else S.e_low
    return np.array([[-0.5 * F1, F0], [(q - z) * F0 - 0.5 * F2, 0.5 * F1]], dtype=complex)


@dataclass
class WeylTrajectory:
    t: np.ndarray
    M: np.ndarray  # (T, 2, 2) complex
    phi: np.ndarray  # (T, N)
    z: complex
    stats: IntegratorStats = field(default_factory=IntegratorStats)

    def matrix(self, i: int) -> WeylMatrix:
        return WeylMatrix(self.z, self.M[i])


def evolve_M(S: GapSet, n: int, phi0, z: complex, t_eval: Sequence[float],
             rtol: float = DEFAULT_TOL, atol: float = DEFAULT_TOL, h: float = PROBE_H,
             M0: Optional[np.ndarray] = None) -> WeylTrajectory:
    """Integrate ``∂t M = P M + M P^T`` jointly with the t-flow of the Dirichlet data.

    All four entries of ``M`` are integrated, so symmetry of ``M`` is a
    genuine check rather than an assumption.
    """
    z = _check_z(S, z)
    p0 = _phi(phi0)
    N = p0.size
    if M0 is None:
        M0 = M_matrix(S, p0, z).M
    y0 = np.concatenate([p0, M0.real.ravel(), M0.imag.ravel()])

    def rhs(y):
        phi = y[:N]
        M = (y[N:N + 4] + 1j * y[N + 4:]).reshape(2, 2)
        P = p_matrix(S, n, phi, z, h)
        dM = P @ M + M @ P.T
        dphi = xi_array(S, n, phi) if N else np.zeros(0)
        return np.concatenate([dphi, dM.real.ravel(), dM.imag.ravel()])

    def wrap(y):
        y = y.copy()
        y[:N] = wrap_angle(y[:N])
        return y

    st = IntegratorStats()
    t = np.asarray(t_eval, dtype=float)
    ys = integrate(rhs, y0, t, rtol, atol, wrap=wrap, stats=st)
    M = (ys[:, N:N + 4] + 1j * ys[:, N + 4:]).reshape(-1, 2, 2)
    return WeylTrajectory(t, M, ys[:, :N], z, st)


# ---------------------------------------------------------------------------
# checks


@dataclass(frozen=True)
class ReflectionlessPoint:
    lam: float
    deltas: tuple
    ratios: tuple
    slope: float
    extrapolated: float


@dataclass(frozen=True)
class ReflectionlessReport:
    points: tuple
    threshold: float
    control_lambda: Optional[float] = None
    control_abs_re: Optional[float] = None

    @property
    def worst_ratio(self) -> float:
        return max(p.ratios[-1] for p in self.points)

    @property
    def passed(self) -> bool:
        ok = all(p.ratios[-1] <= self.threshold for p in self.points)
        trend = all(p.ratios[-1] < 1e-12 or 0.8 <= p.slope <= 1.2 for p in self.points)
        control = self.control_abs_re is None or self.control_abs_re > 1e-3
        return ok and trend and control


def _edge_distance(S: GapSet, lam: float) -> float:
    edges = np.concatenate([[S.e_low], S.lower, S.upper])
    return float(np.min(np.abs(edges - lam)))


def verify_reflectionless(S: GapSet, phi, lambdas: Sequence[float],
                          deltas: Sequence[float] = (1e-4, 1e-5, 1e-6),
                          threshold: float = 1e-4, control: Optional[float] = None,
                          margin: float = 1e-3) -> ReflectionlessReport:
    """Trend of ``|Re G| / |G|`` at ``lambda + i delta`` as ``delta -> 0``.

    ``control`` is an optional energy inside a gap, where ``G`` is real and
    ``|Re G|`` should stay bounded away from zero.
    """
    deltas = tuple(sorted((float(d) for d in deltas), reverse=True))
    pts = []
    for lam in lambdas:
        lam = float(lam)
        if not in_spectrum(S, lam) or _edge_distance(S, lam) < max(margin, 100 * deltas[0]):
            raise SpectrumPointError(f"lambda={lam} is not in a band interior")
        ratios = []
        for d in deltas:
            G = green_diag(S, phi, complex(lam, d))
            ratios.append(abs(G.real) / abs(G))
        r = np.array(ratios)
        if np.all(r > 0):
            slope = float(np.polyfit(np.log(deltas), np.log(r), 1)[0])
        else:
            slope = math.nan
        G_half = green_diag(S, phi, complex(lam, deltas[-1] / 2))
        extrap = 2 * abs(G_half.real) / abs(G_half) - ratios[-1]
        pts.append(ReflectionlessPoint(lam, deltas, tuple(ratios), slope, float(extrap)))
    c_val = None
    if control is not None:
        if in_spectrum(S, control):
            raise SpectrumPointError("control point must lie in a gap")
        c_val = abs(green_diag(S, phi, complex(control, deltas[-1])).real)
    return ReflectionlessReport(tuple(pts), threshold, control, c_val)


def mid_band_points(S: GapSet, count: int = 10, upper: Optional[float] = None) -> np.ndarray:
    """``count`` energies spread over the interiors of the bands."""
    edges = [S.e_low]
    for lo, up in zip(S.lower, S.upper):
        edges += [lo, up]
    top = upper if upper is not None else (edges[-1] + max(1.0, edges[-1] - edges[0]))
    edges.append(top)
    bands = [(edges[i], edges[i + 1]) for i in range(0, len(edges) - 1, 2)]
    widths = np.array([b - a for a, b in bands])
    per = np.maximum(1, np.round(count * widths / widths.sum()).astype(int))
    while per.sum() > count:
        per[np.argmax(per)] -= 1
    while per.sum() < count:
        per[np.argmax(widths / per)] += 1
    out = []
    for (a, b), k in zip(bands, per):
        out.extend(a + (b - a) * (np.arange(k) + 0.5) / k)
    return np.array(out)


@dataclass(frozen=True)
class AsymptoticsReport:
    r: np.ndarray
    eps: np.ndarray
    exponent: float
    expansion_error: np.ndarray
    leading: float


def asymptotic_residual(S: GapSet, n: int, phi, r) -> np.ndarray:
    """``|2 (E - z)^{1/2} G exp(-sum_{k<=n} (Q_k - E^k)/(2k z^k)) - 1|`` on ``z = -r``.

    Evaluated in log space from the gap factors alone, so the residual is
    exactly zero when there are no gaps.
    """
    p = _phi(phi)
    mu = S.lower + S.gamma * np.cos(p / 2.0) ** 2
    Q = q_values(S, p, n) if n else np.zeros(0)
    out = []
    for rv in np.atleast_1d(np.asarray(r, dtype=float)):
        z = complex(-rv, 0.0)
        logs = complex(np.sum(_gap_logs(S, mu, z))) if p.size else 0j
        series = sum((Q[k - 1] - S.e_low**k) / (2 * k * z**k) for k in range(1, n + 1))
        out.append(abs(np.expm1(logs - series)))
    return np.array(out)


def verify_green_asymptotics(S: GapSet, n: int, phi, r_grid: Sequence[float]) -> AsymptoticsReport:
    """Decay exponent of the expansion residual and a check of the k-expansion of G.

    The second check compares ``G(-k^2)`` with ``1/2 sum_l (-1)^l R_l k^{-2l-1}``
    (``l <= n``); the alternating sign is what the recursion produces at
    ``z = -k^2``.
    """
    r = np.asarray(r_grid, dtype=float)
    eps = asymptotic_residual(S, n, phi, r)
    good = eps > 0
    if good.sum() >= 2:
        exponent = float(-np.polyfit(np.log(r[good]), np.log(eps[good]), 1)[0])
    else:
        exponent = math.inf
    p = _phi(phi)
    Q = q_values(S, p, n) if n else np.zeros((0,))
    R = [1.0] + [float(r_from_q(Q, m)) for m in range(1, n + 1)]
    errs = []
    for rv in r:
        k = math.sqrt(rv)
        G = green_diag(S, p, complex(-rv, 0.0))
        approx = 0.5 * sum((-1) ** ell * R[ell] * k ** (-2 * ell - 1) for ell in range(n + 1))
        errs.append(abs(G - approx) * 2 * k)
    lead = abs(2 * math.sqrt(r[-1] - S.e_low) * green_diag(S, p, complex(-r[-1], 0.0)))
    return AsymptoticsReport(r, eps, exponent, np.array(errs), lead)


def green_identity_residual(S: GapSet, phi, z: complex, h: float = PROBE_H, order: int = 4) -> float:
    """``|-2 G G'' + G'^2 + 4 (q - z) G^2 - 1|`` with ``G''`` by FD along the x-flow."""
    z = _check_z(S, z)
    p = _phi(phi)
    radius = fd_weights(2, order)[0]
    probe = x_probe(S, p, h, radius)
    Gs = np.array([green_diag(S, s, z) for s in probe])
    _, _, Gxx = probe_derivatives(Gs, h, 2, order)
    G = green_diag(S, p, z)
    Gx = green_dx(S, p, z)
    q = float(trace_q_many(S, p)) if p.size else S.e_low
    return abs(-2 * G * Gxx + Gx * Gx + 4 * (q - z) * G * G - 1)


@dataclass(frozen=True)
class WeylEvolutionReport:
    symmetry: float  # max |M - M^T| and |conj M(conj z) - M(z)| along the run
    det_residual: float
    match: float  # max |M_ode - M(flowed state)|
    steps: int


def verify_weyl_evolution(S: GapSet, n: int, phi0, z: complex, t_eval: Sequence[float],
                          rtol: float = DEFAULT_TOL, atol: float = DEFAULT_TOL,
                          h: float = PROBE_H) -> WeylEvolutionReport:
    """Integrate ``M`` at ``z`` and ``conj(z)`` and compare with ``M`` of the flowed data."""
    z = complex(z)
    tr = evolve_M(S, n, phi0, z, t_eval, rtol, atol, h)
    if z.imag == 0.0:
        # z is its own conjugate, so the mirror symmetry says M is real
        mirror = np.max(np.abs(tr.M.imag), initial=0.0)
    else:
        tr_c = evolve_M(S, n, phi0, z.conjugate(), t_eval, rtol, atol, h)
        mirror = np.max(np.abs(np.conj(tr_c.M) - tr.M), initial=0.0)
    sym = max(float(np.max(np.abs(tr.M[:, 0, 1] - tr.M[:, 1, 0]), initial=0.0)), float(mirror))
    states = trajectory(S, n, phi0, "t", t_eval, rtol, atol)
    det = match = 0.0
    for i in range(len(tr.t)):
        W = tr.matrix(i)
        det = max(det, W.det_residual)
        match = max(match, float(np.max(np.abs(W.M - M_matrix(S, states[i], z).M))))
    return WeylEvolutionReport(sym, det, match, tr.stats.steps)

