"""Integration of the commuting x- and t-flows, flow sheets over an (x, t)
grid, and the identities used to verify them.

A sheet is built in the canonical order: the t-flow along ``x = 0`` gives
the spine ``phi(0, t_i)``, then every row is carried along x by the
translation flow.  All rows are integrated together as one batched system,
so they share an adaptive step sequence.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .dirichlet import DirichletState, dist, wrap_angle
from .flows import psi_array, xi_array
from .hierarchy import eval_diffpoly, fd_derivative, fd_weights, fhat, kdv_rhs
from .moments import r_m, trace_q_many
from .ode import IntegratorStats, integrate, rk_symmetric
from .spectrum import GapSet

DEFAULT_TOL = 1e-10
DIRECTIONS = ("x", "t")


def vector_field(S: GapSet, n: int, direction: str):
    """Right-hand side for ``direction`` ``"x"`` (Psi) or ``"t"`` (Xi of order n)."""
    if direction == "x":
        return lambda y: psi_array(S, y)
    if direction == "t":
        if n < 0:
            raise ValueError("n must be nonnegative")
        return lambda y: xi_array(S, n, y)
    raise ValueError(f"direction must be 'x' or 't', got {direction!r}")


def _angles(phi) -> np.ndarray:
    return phi.phi if isinstance(phi, DirichletState) else np.asarray(phi, dtype=float)


def trajectory(S: GapSet, n: int, phi0, direction: str, s_eval: Sequence[float],
               rtol: float = DEFAULT_TOL, atol: float = DEFAULT_TOL,
               stats: Optional[IntegratorStats] = None) -> np.ndarray:
    """Angles at each ``s_eval`` along one flow; ``phi0`` may carry leading batch axes."""
    y0 = _angles(phi0)
    s_eval = np.asarray(s_eval, dtype=float)
    if y0.shape[-1] == 0:
        return np.zeros((len(s_eval),) + y0.shape)
    f = vector_field(S, n, direction)
    return integrate(f, y0, s_eval, rtol, atol, wrap=wrap_angle, stats=stats)


def flow(S: GapSet, n: int, phi0, direction: str, span: float,
         rtol: float = DEFAULT_TOL, atol: float = DEFAULT_TOL,
         stats: Optional[IntegratorStats] = None) -> DirichletState:
    """Carry ``phi0`` a distance ``span`` along the x-flow or the t-flow."""
    if not (rtol > 0 and atol > 0):
        raise ValueError("tolerances must be positive")
    ys = trajectory(S, n, phi0, direction, [span], rtol, atol, stats)
    return DirichletState(S, ys[0])


@dataclass
class FlowSheet:
    """Dirichlet data and reconstructed potential on an (x, t) grid.

    ``phi`` has shape ``(nt, nx, N)`` and ``q`` shape ``(nt, nx)``.
    """

    S: GapSet
    n: int
    x: np.ndarray
    t: np.ndarray
    phi: np.ndarray
    q: np.ndarray
    stats: IntegratorStats = field(default_factory=IntegratorStats)

    @property
    def dx(self) -> float:
        return float(self.x[1] - self.x[0]) if len(self.x) > 1 else math.nan

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0]) if len(self.t) > 1 else math.nan

    def state(self, i_t: int, i_x: int) -> DirichletState:
        return DirichletState(self.S, self.phi[i_t, i_x])

    def to_csv(self) -> str:
        """CSV text with columns ``x, t, q, phi_1..phi_N``; rows t-major."""
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        N = self.phi.shape[-1]
        w.writerow(["x", "t", "q"] + [f"phi_{j}" for j in range(1, N + 1)])
        for it, tv in enumerate(self.t):
            for ix, xv in enumerate(self.x):
                row = [xv, tv, self.q[it, ix], *self.phi[it, ix]]
                w.writerow([f"{float(v):.17g}" for v in row])
        return buf.getvalue()


def uniform_grid(start: float, stop: float, num: int) -> np.ndarray:
    if num < 1:
        raise ValueError("grid must be nonempty")
    return np.linspace(start, stop, num) if num > 1 else np.array([float(start)])


def solve_sheet(S: GapSet, n: int, phi00, x_grid: Sequence[float], t_grid: Sequence[float],
                rtol: float = DEFAULT_TOL, atol: float = DEFAULT_TOL) -> FlowSheet:
    """Integrate the t-flow along ``x = 0`` and then the x-flow along every row."""
    x = np.asarray(x_grid, dtype=float)
    t = np.asarray(t_grid, dtype=float)
    if x.size == 0 or t.size == 0:
        raise ValueError("grids must be nonempty")
    y0 = _angles(phi00)
    st = IntegratorStats()
    spine = trajectory(S, n, y0, "t", t, rtol, atol, st)          # (nt, N)
    rows = trajectory(S, n, spine, "x", x, rtol, atol, st)         # (nx, nt, N)
    phi = np.ascontiguousarray(np.swapaxes(rows, 0, 1))
    q = trace_q_many(S, phi) if y0.shape[-1] else np.full((len(t), len(x)), S.e_low)
    return FlowSheet(S, n, x, t, phi, q, st)


def verify_commute(S: GapSet, n: int, phi00, x: float, t: float,
                   rtol: float = DEFAULT_TOL, atol: float = DEFAULT_TOL) -> float:
    """Distance between the x-then-t and t-then-x endpoints."""
    a = flow(S, n, flow(S, n, phi00, "x", x, rtol, atol), "t", t, rtol, atol)
    b = flow(S, n, flow(S, n, phi00, "t", t, rtol, atol), "x", x, rtol, atol)
    return dist(S, n, a, b)


def verify_translation(S: GapSet, phi00, x: Sequence[float], t: Sequence[float],
                       rtol: float = DEFAULT_TOL, atol: float = DEFAULT_TOL) -> float:
    """``sup |q(x, t) - q(x + t, 0)|`` for the n = 0 sheet."""
    sheet = solve_sheet(S, 0, phi00, x, t, rtol, atol)
    shifted = (np.asarray(x)[None, :] + np.asarray(t)[:, None]).ravel()
    ref = trajectory(S, 0, phi00, "x", shifted, rtol, atol)
    q_ref = trace_q_many(S, ref).reshape(sheet.q.shape)
    return float(np.max(np.abs(sheet.q - q_ref)))


@dataclass(frozen=True)
class PDEReport:
    max: float
    rms: float
    valid: int
    x_order: int
    t_order: int


def pde_residual(sheet: FlowSheet, n: int, x_order: int = 4, t_order: int = 4) -> np.ndarray:
    """``∂t q - kdv_rhs(n)`` on the sheet by centred differences (NaN off-stencil)."""
    if len(sheet.t) < 2 or len(sheet.x) < 2:
        raise ValueError("grid too coarse: need at least two points per axis")
    qt = fd_derivative(sheet.q, sheet.dt, 1, t_order, axis=0)
    rhs = eval_diffpoly(kdv_rhs(n), sheet.q, sheet.dx, x_order, axis=1)
    return qt - rhs


def verify_pde(sheet: FlowSheet, n: int, x_order: int = 4, t_order: int = 4) -> PDEReport:
    """Max and RMS of the hierarchy residual over the stencil-valid interior.

    The time derivative uses a centred stencil of ``t_order``; the default
    is 4 because at dt = 0.005 a 2nd-order stencil alone contributes about
    ``1e-4`` for a unit-width gap.
    """
    try:
        r = pde_residual(sheet, n, x_order, t_order)
    except ValueError as exc:
        raise ValueError(f"grid too coarse: {exc}") from exc
    ok = np.isfinite(r)
    if not ok.any():
        raise ValueError("grid too coarse: no node has a full stencil")
    v = r[ok]
    return PDEReport(float(np.max(np.abs(v))), float(np.sqrt(np.mean(v**2))), int(ok.sum()),
                     x_order, t_order)


# ---------------------------------------------------------------------------
# local x-probes


PROBE_H = 1e-3


def x_probe(S: GapSet, phi, h: float = PROBE_H, radius: int = 2) -> np.ndarray:
    """Angles at ``x = -radius*h .. radius*h`` by fixed 5th-order steps of the x-flow."""
    y0 = _angles(phi)
    if y0.shape[-1] == 0:
        return np.zeros((2 * radius + 1,) + y0.shape)
    return rk_symmetric(lambda y: psi_array(S, y), y0, h, radius)


def probe_derivatives(values: np.ndarray, h: float, dmax: int, order: int = 4) -> list:
    """Centre values of the 0..dmax-th derivatives of probe samples (axis 0)."""
    c = (values.shape[0] - 1) // 2
    out = [values[c]]
    for d in range(1, dmax + 1):
        r, w = fd_weights(d, order)
        seg = values[c - r:c + r + 1]
        out.append(np.tensordot(np.array([float(x) for x in w]), seg, axes=(0, 0)) / h**d)
    return out


def verify_trace_identity(S: GapSet, n: int, phi, h: float = PROBE_H, order: int = 4) -> dict:
    """``|f̂_m(FD) - R_m(phi)|`` for m = 1..n, with ``f̂_m`` evaluated on an x-probe of q."""
    if n < 1:
        return {}
    K = max(fhat(m).jet_order for m in range(1, n + 1))
    radius = max((fd_weights(d, order)[0] for d in range(1, K + 1)), default=0)
    radius = max(radius, 1)
    probe = x_probe(S, phi, h, radius)
    q = trace_q_many(S, probe) if probe.shape[-1] else np.full(2 * radius + 1, S.e_low)
    out = {}
    for m in range(1, n + 1):
        vals = eval_diffpoly(fhat(m), q, h, order)
        out[m] = abs(float(vals[radius]) - r_m(S, _angles(phi), m))
    return out
