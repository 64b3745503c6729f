"""Schwarzschild spacetime geometry in Schwarzschild coordinates (t, r, theta, phi).

Geometric units G = c = 1. Every function is vectorised over leading array
axes: pass scalars or equally shaped arrays for the coordinates and get back
arrays with the tensor indices appended as trailing axes.

Index convention for the connection: ``gamma[..., mu, alpha, beta]`` is
Gamma^mu_{alpha beta}.
"""

from __future__ import annotations

import contextlib
import contextvars
from dataclasses import dataclass
from enum import Enum

import numpy as np

T, R, TH, PH = 0, 1, 2, 3


class DomainError(ValueError):
    """Raised when a point lies outside the chart where a formula is valid."""


@dataclass(frozen=True)
class SpacetimePoint:
    t: float
    r: float
    theta: float
    phi: float

    def as_array(self) -> np.ndarray:
        return np.array([self.t, self.r, self.theta, self.phi], dtype=float)


@dataclass(frozen=True)
class TangentVector:
    components: np.ndarray
    base: SpacetimePoint

    def __post_init__(self):
        object.__setattr__(self, "components", np.asarray(self.components, dtype=float))
        if self.components.shape != (4,):
            raise ValueError("a tangent vector has exactly 4 components")

    def __add__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self, other)
        return TangentVector(self.components + other.components, self.base)

    def __sub__(self, other: "TangentVector") -> "TangentVector":
        _same_base(self, other)
        return TangentVector(self.components - other.components, self.base)

    def __mul__(self, a: float) -> "TangentVector":
        return TangentVector(a * self.components, self.base)

    __rmul__ = __mul__

    def __neg__(self) -> "TangentVector":
        return TangentVector(-self.components, self.base)


@dataclass(frozen=True)
class RiemannianPoint3:
    s: float
    theta: float
    phi: float


class CausalClass(str, Enum):
    TIMELIKE = "timelike"
    NULL = "null"
    SPACELIKE = "spacelike"


def _same_base(a: TangentVector, b: TangentVector) -> None:
    if a.base != b.base:
        raise ValueError(f"base point mismatch: {a.base} vs {b.base}")


def coordinate_basis(p: SpacetimePoint, index: int) -> TangentVector:
    e = np.zeros(4)
    e[index] = 1.0
    return TangentVector(e, p)


def lapse_squared(r, m):
    """1 - 2m/r, i.e. -g_tt."""
    return 1.0 - 2.0 * m / np.asarray(r, dtype=float)


def _check_exterior(r, m) -> None:
    r = np.asarray(r, dtype=float)
    if np.any(r <= 2.0 * m):
        bad = float(np.min(r))
        raise DomainError(f"r = {bad:g} is not outside the horizon r = 2m = {2.0 * m:g}")


def metric_components(r, theta, m) -> np.ndarray:
    """Schwarzschild metric g_{mu nu}; trailing shape (4, 4)."""
    _check_exterior(r, m)
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    b = lapse_squared(r, m)
    g = np.zeros(r.shape + (4, 4))
    g[..., T, T] = -b
    g[..., R, R] = 1.0 / b
    g[..., TH, TH] = r**2
    g[..., PH, PH] = (r * np.sin(theta)) ** 2
    return g


def metric_at(p: SpacetimePoint, m: float) -> np.ndarray:
    return metric_components(p.r, p.theta, m)


def inner_product(p: SpacetimePoint, m: float, a: TangentVector, b: TangentVector) -> float:
    if a.base != p or b.base != p:
        raise ValueError("tangent vectors must be based at the evaluation point")
    g = metric_at(p, m)
    return float(a.components @ g @ b.components)


def dot(g: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Node-wise g(a, b) for arrays of metrics (..., 4, 4) and vectors (..., 4)."""
    return np.einsum("...i,...ij,...j->...", a, g, b)


# Fault-injection hook used by the identity suite to prove that the checks can fail.
_christoffel_fault: contextvars.ContextVar[float] = contextvars.ContextVar(
    "christoffel_fault", default=0.0
)


@contextlib.contextmanager
def corrupted_christoffel(delta: float = 1e-3):
    """Perturb Gamma^theta_{r theta} by ``delta`` inside the block (test hook)."""
    token = _christoffel_fault.set(delta)
    try:
        yield
    finally:
        _christoffel_fault.reset(token)


def christoffel(r, theta, m) -> np.ndarray:
    """Closed-form Schwarzschild Christoffel symbols; trailing shape (4, 4, 4)."""
    _check_exterior(r, m)
    r, theta = np.broadcast_arrays(np.asarray(r, float), np.asarray(theta, float))
    b = lapse_squared(r, m)
    st, ct = np.sin(theta), np.cos(theta)
    gam = np.zeros(r.shape + (4, 4, 4))

    gam[..., T, T, R] = gam[..., T, R, T] = m / (r**2 * b)
    gam[..., R, T, T] = m * b / r**2
    gam[..., R, R, R] = -m / (r**2 * b)
    gam[..., R, TH, TH] = -r * b
    gam[..., R, PH, PH] = -r * b * st**2
    gam[..., TH, R, TH] = gam[..., TH, TH, R] = 1.0 / r
    gam[..., TH, PH, PH] = -st * ct
    gam[..., PH, R, PH] = gam[..., PH, PH, R] = 1.0 / r
    gam[..., PH, TH, PH] = gam[..., PH, PH, TH] = ct / st

    fault = _christoffel_fault.get()
    if fault:
        gam[..., TH, R, TH] += fault
        gam[..., TH, TH, R] += fault
    return gam


def static_potential(x, m, lam: float = 0.0):
    """sqrt(1 - 2m/r) for lam = 0, else sqrt(1 - 2m/s + lam^2 s^2)."""
    x = np.asarray(x, dtype=float)
    rad = 1.0 - 2.0 * m / x + lam**2 * x**2
    if np.any(rad < 0.0):
        raise DomainError(f"negative radicand in static potential (min {float(np.min(rad)):.3g})")
    out = np.sqrt(rad)
    return float(out) if out.ndim == 0 else out


def ads_sch_radicand(s, m, lam):
    s = np.asarray(s, dtype=float)
    return 1.0 - 2.0 * m / s + lam**2 * s**2


def ads_sch_metric3(s, theta, m, lam) -> np.ndarray:
    """Riemannian metric ds^2/(1-2m/s+lam^2 s^2) + s^2 g_S2; trailing shape (3, 3)."""
    s, theta = np.broadcast_arrays(np.asarray(s, float), np.asarray(theta, float))
    rad = ads_sch_radicand(s, m, lam)
    if np.any(rad <= 0.0):
        raise DomainError("point at or inside the horizon s0 of the AdS-Schwarzschild metric")
    g = np.zeros(s.shape + (3, 3))
    g[..., 0, 0] = 1.0 / rad
    g[..., 1, 1] = s**2
    g[..., 2, 2] = (s * np.sin(theta)) ** 2
    return g


def causal_class(p: SpacetimePoint, m: float, v: TangentVector, tol: float = 1e-9) -> CausalClass:
    """Classify v by the sign of <v, v> relative to a metric-scaled Euclidean norm."""
    comps = v.components
    if not np.any(comps):
        raise ValueError("the zero vector has no causal character")
    g = metric_at(p, m)
    norm = float(comps @ g @ comps)
    ref = float(np.sum(np.abs(np.diag(g)) * comps**2))
    if abs(norm) <= tol * ref:
        return CausalClass.NULL
    return CausalClass.TIMELIKE if norm < 0 else CausalClass.SPACELIKE
