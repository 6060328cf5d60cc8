"""Angular coordinates on the torus of Dirichlet data.

Each gap ``j`` carries an angle ``phi_j``; the Dirichlet eigenvalue is
``mu_j = E_j^- + gamma_j cos^2(phi_j / 2)`` and the sheet sign is
``sigma_j = -sgn sin(phi_j)`` (zero at the gap edges ``phi_j in {0, pi}``).
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from . import _tails
from .spectrum import GapSet, GapSetError, _check_index, metric_weights

TWO_PI = 2.0 * math.pi


def wrap_angle(phi):
    """Map angles into ``[0, 2pi)``."""
    out = np.mod(phi, TWO_PI)
    return np.where(out >= TWO_PI, 0.0, out)


@dataclass(frozen=True, eq=False)
class DirichletState:
    """Angles ``phi_j`` for the explicit gaps of ``S``."""

    S: GapSet
    phi: np.ndarray

    def __post_init__(self):
        phi = np.asarray(self.phi, dtype=float).reshape(-1)
        if phi.shape[0] != len(self.S.gaps):
            raise ValueError(f"expected {len(self.S.gaps)} angles, got {phi.shape[0]}")
        phi = wrap_angle(phi)
        phi.setflags(write=False)
        object.__setattr__(self, "phi", phi)

    @property
    def mu(self) -> np.ndarray:
        return mu_all(self.S, self.phi)

    @property
    def sigma(self) -> np.ndarray:
        return sigma_of_phi(self.phi)

    def with_phi(self, phi) -> "DirichletState":
        return DirichletState(self.S, phi)

    def to_json(self) -> str:
        return json.dumps([float(p) for p in self.phi])

    @classmethod
    def from_json(cls, S: GapSet, text: str) -> "DirichletState":
        return cls(S, np.array(json.loads(text), dtype=float))


def mu_all(S: GapSet, phi) -> np.ndarray:
    """Dirichlet eigenvalues for an array of angles (one per gap)."""
    return S.lower + S.gamma * np.cos(np.asarray(phi) / 2.0) ** 2


def mu_of_phi(S: GapSet, j: int, phi: float) -> float:
    i = _check_index(S, j)
    return float(S.lower[i] + S.gamma[i] * math.cos(phi / 2.0) ** 2)


def dmu_dphi(S: GapSet, phi) -> np.ndarray:
    """``d mu_j / d phi_j = -(gamma_j / 2) sin(phi_j)``."""
    return -0.5 * S.gamma * np.sin(np.asarray(phi))


def sigma_of_phi(phi):
    """``-sgn sin(phi)`` with the value 0 exactly at ``phi in {0, pi}`` (mod 2pi)."""
    p = wrap_angle(np.asarray(phi, dtype=float))
    s = -np.sign(np.sin(p))
    s = np.where((p == 0.0) | (p == math.pi), 0.0, s)
    return s if np.ndim(s) else float(s)


def phi_of_mu_sigma(S: GapSet, j: int, mu: float, sigma: int) -> float:
    """Inverse of ``phi -> (mu, sigma)`` on the double cover of gap ``j``."""
    i = _check_index(S, j)
    lo, g = S.lower[i], S.gamma[i]
    t = (mu - lo) / g
    if t < 0.0 or t > 1.0:
        raise GapSetError(f"mu={mu} outside closed gap {j}")
    if t == 1.0:
        return 0.0
    if t == 0.0:
        return math.pi
    phi0 = 2.0 * math.acos(math.sqrt(t))  # in (0, pi), sigma = -1
    if sigma == -1:
        return phi0
    if sigma == 1:
        return TWO_PI - phi0
    raise ValueError("sigma must be +1 or -1 for interior mu")


def arc(a, b):
    """Shorter-arc distance on the circle of circumference ``2pi``."""
    d = np.mod(np.abs(np.asarray(a) - np.asarray(b)), TWO_PI)
    return np.minimum(d, TWO_PI - d)


def dist(S: GapSet, n: int, phi: DirichletState, psi: DirichletState,
         return_bound: bool = False):
    """Weighted sup distance ``sup_j w_j |phi_j - psi_j|_T``.

    With ``return_bound`` also returns ``sup_{tail} w_k * pi``, the largest
    contribution the unrepresented tail coordinates could make.
    """
    if phi.S is not S or psi.S is not S:
        if not (phi.S == S and psi.S == S):
            raise ValueError("states belong to different gap sets")
    w = metric_weights(S, n)
    value = float(np.max(w * arc(phi.phi, psi.phi), initial=0.0))
    if not return_bound:
        return value
    return value, tail_weight_sup(S, n) * math.pi


def weighted_sup(S: GapSet, n: int, v: np.ndarray) -> float:
    """``sup_j w_j |v_j|`` for a tangent vector (no wrapping)."""
    return float(np.max(metric_weights(S, n) * np.abs(v), initial=0.0))


def tail_weight_sup(S: GapSet, n: int) -> float:
    if S.tail is None:
        return 0.0
    from .spectrum import _one_plus_eta_pow
    terms = _tails.mul(S.tail.sqrt_gamma_terms(), _one_plus_eta_pow(S.tail, n, 0.5))
    return _tails.tail_sup(terms, S.first_tail_index)


def random_state(S: GapSet, rng: np.random.Generator) -> DirichletState:
    return DirichletState(S, rng.uniform(0.0, TWO_PI, len(S.gaps)))


def parse_phi(S: GapSet, spec: str | Sequence[float] | None) -> DirichletState:
    """Accept a JSON array, a path to one, a sequence, or ``None`` (all zeros)."""
    if spec is None:
        return DirichletState(S, np.zeros(len(S.gaps)))
    if isinstance(spec, str):
        text = spec.strip()
        if not text.startswith("["):
            with open(text, encoding="utf-8") as fh:
                text = fh.read()
        return DirichletState.from_json(S, text)
    return DirichletState(S, np.asarray(spec, dtype=float))
