"""Explicit Runge-Kutta integration: adaptive Dormand-Prince 5(4) and a
fixed-step variant of the same 5th-order scheme.

The adaptive solver steps exactly onto every requested output point, so
results are deterministic functions of the inputs.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

# Dormand-Prince 5(4) tableau (autonomous form, nodes not needed)
_A = [
    [],
    [1 / 5],
    [3 / 40, 9 / 40],
    [44 / 45, -56 / 15, 32 / 9],
    [19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729],
    [9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656],
    [35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84],
]
_B5 = np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84, 0.0])
_B4 = np.array([5179 / 57600, 0.0, 7571 / 16695, 393 / 640, -92097 / 339200, 187 / 2100, 1 / 40])
_E = _B5 - _B4

SAFETY = 0.9
MIN_FACTOR = 0.2
MAX_FACTOR = 5.0


class StepSizeError(RuntimeError):
    """The step size underflowed: the vector field is stiff or singular here."""


@dataclass
class IntegratorStats:
    """Counters accumulated over one or more integrations."""

    steps: int = 0
    rejected: int = 0
    fevals: int = 0
    max_local_error: float = 0.0

    def merge(self, other: "IntegratorStats") -> None:
        self.steps += other.steps
        self.rejected += other.rejected
        self.fevals += other.fevals
        self.max_local_error = max(self.max_local_error, other.max_local_error)


RHS = Callable[[np.ndarray], np.ndarray]


def _stages(f: RHS, y: np.ndarray, h: float, k1: np.ndarray) -> list:
    k = [k1]
    for i in range(1, 7):
        yi = y + h * sum(a * kk for a, kk in zip(_A[i], k) if a)
        k.append(f(yi))
    return k


def _initial_step(f: RHS, y0: np.ndarray, f0: np.ndarray, rtol: float, atol: float) -> float:
    scale = atol + rtol * np.abs(y0)
    d0 = float(np.max(np.abs(y0) / scale, initial=0.0))
    d1 = float(np.max(np.abs(f0) / scale, initial=0.0))
    h0 = 1e-6 if d0 < 1e-5 or d1 < 1e-5 else 0.01 * d0 / d1
    f1 = f(y0 + h0 * f0)
    d2 = float(np.max(np.abs(f1 - f0) / scale, initial=0.0)) / h0
    if max(d1, d2) <= 1e-15:
        h1 = max(1e-6, h0 * 1e-3)
    else:
        h1 = (0.01 / max(d1, d2)) ** (1 / 5)
    return min(100 * h0, h1)


def integrate(f: RHS, y0, s_eval: Sequence[float], rtol: float = 1e-10, atol: float = 1e-10,
              wrap: Optional[Callable[[np.ndarray], np.ndarray]] = None,
              stats: Optional[IntegratorStats] = None, max_steps: int = 10**7,
              h_init: Optional[float] = None) -> np.ndarray:
    """Solve ``y' = f(y)`` from ``s = 0`` and return ``y`` at each ``s_eval``.

    Output points may lie on both sides of 0; each side is integrated
    outward from the initial value.  ``wrap`` is applied after each accepted
    step (for instance to renormalise angles).  Local error per step is
    kept below ``atol + rtol * max(|y|, |y_new|)`` componentwise.
    """
    y0 = np.asarray(y0, dtype=float)
    s_eval = np.asarray(s_eval, dtype=float)
    out = np.empty((len(s_eval),) + y0.shape)
    st = stats if stats is not None else IntegratorStats()
    for sign in (1.0, -1.0):
        idx = np.nonzero(s_eval * sign > 0)[0]
        idx = idx[np.argsort(np.abs(s_eval[idx]), kind="stable")]
        if len(idx):
            ys = _integrate_one_side(f, y0, sign, np.abs(s_eval[idx]), rtol, atol, wrap, st,
                                     max_steps, h_init)
            out[idx] = ys
    zero = np.nonzero(s_eval == 0)[0]
    if len(zero):
        out[zero] = wrap(y0) if wrap is not None else y0
    return out


def _integrate_one_side(f, y0, sign, targets, rtol, atol, wrap, st, max_steps, h_init):
    g = (lambda y: f(y)) if sign > 0 else (lambda y: -f(y))
    y = y0.copy()
    k1 = g(y)
    st.fevals += 1
    h = h_init if h_init is not None else _initial_step(g, y, k1, rtol, atol)
    st.fevals += 1
    s = 0.0
    out = []
    for target in targets:
        while s < target:
            if st.steps + st.rejected > max_steps:
                raise StepSizeError("maximum number of steps exceeded")
            last = s + h >= target
            hh = target - s if last else h
            if hh <= 4 * np.finfo(float).eps * max(1.0, target):
                s = target  # round-off remainder
                break
            k = _stages(g, y, hh, k1)
            st.fevals += 6
            ynew = y + hh * sum(b * kk for b, kk in zip(_B5, k) if b)
            err = hh * sum(e * kk for e, kk in zip(_E, k) if e)
            scale = atol + rtol * np.maximum(np.abs(y), np.abs(ynew))
            ratio = float(np.max(np.abs(err) / scale, initial=0.0))
            if not math.isfinite(ratio):
                ratio = math.inf
            factor = MAX_FACTOR if ratio == 0 else min(MAX_FACTOR, max(MIN_FACTOR, SAFETY * ratio ** -0.2))
            if ratio <= 1.0:
                st.steps += 1
                st.max_local_error = max(st.max_local_error, float(np.max(np.abs(err), initial=0.0)))
                s = target if last else s + hh
                y = wrap(ynew) if wrap is not None else ynew
                if wrap is None:
                    k1 = k[6]
                else:
                    k1 = g(y)
                    st.fevals += 1
                # a step clipped onto an output point does not shrink the proposal
                h = max(h, hh * factor) if (last and hh < h) else hh * factor
            else:
                st.rejected += 1
                h = hh * factor
                if h <= 1e-14 * max(1.0, s):
                    raise StepSizeError(f"step size underflow at s={sign * s:.6g}")
        out.append(y.copy())
    return np.array(out)


def rk_fixed(f: RHS, y0, h: float, nsteps: int) -> np.ndarray:
    """Fixed-step 5th-order Dormand-Prince; returns ``nsteps + 1`` states (``h`` may be negative)."""
    y = np.asarray(y0, dtype=float).copy()
    out = [y.copy()]
    for _ in range(nsteps):
        k = _stages(f, y, h, f(y))
        y = y + h * sum(b * kk for b, kk in zip(_B5, k) if b)
        out.append(y.copy())
    return np.array(out)


def rk_symmetric(f: RHS, y0, h: float, radius: int) -> np.ndarray:
    """States at ``s = -radius*h, ..., radius*h`` by fixed steps outward from ``y0``."""
    fwd = rk_fixed(f, y0, h, radius)
    bwd = rk_fixed(f, y0, -h, radius)
    return np.concatenate([bwd[:0:-1], fwd], axis=0)
