"""The four surface families and the slice-level identities they rest on.

Families: surfaces in the static slice t = 0, in the umbilical slices
t = rho_lam(r), in the outgoing null cone t = r + 2m log(r/2m - 1), and in
static cylinders over a base surface in the t = 0 slice ("convex static").
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from enum import Enum
from functools import lru_cache

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import BPoly

from . import spacetime as st
from .extrinsic import (
    mean_curvature_vector,
    null_frame,
    dual_mean_curvature,
    umbilical_normal,
)
from .mesh import (
    ParameterGrid,
    Partials,
    Profile,
    SurfaceSample,
    evaluate_profile,
    partials,
    profile_from_dict,
    spectral_tail_fraction,
)

DOMAIN_DELTA = 1e-6
ODE_TOL = 1e-12
TAIL_LIMIT = 1e-6


class Family(str, Enum):
    STATIC_SLICE = "StaticSlice"
    UMBILICAL_SLICE = "UmbilicalSlice"
    NULL_CONE = "NullCone"
    CONVEX_STATIC = "ConvexStatic"


class GateError(ValueError):
    """A surface fails one of the admissibility gates of its family."""


@dataclass(frozen=True)
class SurfaceSpec:
    family: Family
    m: float = 1.0
    u: Profile | None = None
    tau: Profile | None = None
    sigma_hat: Profile | None = None
    lam: float | None = None

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))
        for name in ("u", "tau", "sigma_hat"):
            val = getattr(self, name)
            if val is not None:
                object.__setattr__(self, name, profile_from_dict(val))
        if self.m < 0:
            raise ValueError("mass parameter must be nonnegative")
        need = {
            Family.STATIC_SLICE: {"u"},
            Family.UMBILICAL_SLICE: {"u", "lam"},
            Family.NULL_CONE: {"u"},
            Family.CONVEX_STATIC: {"sigma_hat", "tau"},
        }[self.family]
        for name in ("u", "tau", "sigma_hat", "lam"):
            present = getattr(self, name) is not None
            if present != (name in need):
                verb = "requires" if name in need else "does not take"
                raise ValueError(f"{self.family.value} {verb} '{name}'")
        if self.lam is not None and self.lam <= 0:
            raise ValueError("slice parameter lambda must be positive")

    def to_dict(self) -> dict:
        out: dict = {"family": self.family.value, "m": self.m}
        for name in ("u", "tau", "sigma_hat"):
            val = getattr(self, name)
            if val is not None:
                out[name] = val.to_dict()
        if self.lam is not None:
            out["lam"] = self.lam
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "SurfaceSpec":
        return cls(**data)


# ---------------------------------------------------------------------------
# horizon root and the rho_lambda ODE


def s0_root(m: float, lam: float) -> float:
    """Unique positive root of 1 - 2m/s + lam^2 s^2 = 0 (bisection, then Newton)."""
    if m < 0 or lam <= 0:
        raise ValueError("s0 requires m >= 0 and lam > 0")
    if m == 0:
        return 0.0

    def g(s):
        return lam**2 * s**3 + s - 2.0 * m

    lo, hi = 0.0, 2.0 * m
    if g(hi) < 0:
        raise ArithmeticError("no positive root in (0, 2m]")
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            hi = mid
        else:
            lo = mid
        if hi - lo <= 1e-15 * hi:
            break
    s = 0.5 * (lo + hi)
    for _ in range(4):
        step = g(s) / (3.0 * lam**2 * s**2 + 1.0)
        s -= step
        if abs(step) <= 1e-16 * s:
            break
    return s


def rho_rhs(s, m, lam):
    """rho'(s) = lam s / ((1 - 2m/s) sqrt(1 - 2m/s + lam^2 s^2))."""
    s = np.asarray(s, dtype=float)
    b = 1.0 - 2.0 * m / s
    f = np.sqrt(b + lam**2 * s**2)
    return lam * s / (b * f)


def rho_rhs_derivative(s, m, lam):
    s = np.asarray(s, dtype=float)
    b = 1.0 - 2.0 * m / s
    f2 = b + lam**2 * s**2
    f = np.sqrt(f2)
    db = 2.0 * m / s**2
    df = (db + 2.0 * lam**2 * s) / (2.0 * f)
    return lam / (b * f) - lam * s * (db * f + b * df) / (b * f) ** 2


def tortoise_profile(s, m):
    """s + 2m log(s/2m - 1): the outgoing null cone through r = 4m at t = 4m."""
    s = np.asarray(s, dtype=float)
    if m == 0:
        return s
    return s + 2.0 * m * np.log(s / (2.0 * m) - 1.0)


@dataclass(frozen=True)
class RhoTable:
    """Quintic Hermite table of rho_lam anchored at rho_lam(4m) = 4m."""

    lam: float
    m: float
    s: np.ndarray = field(repr=False)
    values: np.ndarray = field(repr=False)
    derivatives: np.ndarray = field(repr=False)
    interpolant: BPoly = field(repr=False)
    order: int = 5

    @property
    def s_min(self) -> float:
        return float(self.s[0])

    @property
    def s_max(self) -> float:
        return float(self.s[-1])

    def _check(self, s):
        s = np.asarray(s, dtype=float)
        if np.any(s < self.s_min * (1 - 1e-14)) or np.any(s > self.s_max * (1 + 1e-14)):
            raise st.DomainError(
                f"s outside rho table range [{self.s_min:g}, {self.s_max:g}]"
            )
        return s

    def __call__(self, s):
        return self.interpolant(self._check(s))

    def derivative(self, s):
        return self.interpolant.derivative()(self._check(s))


def _integrate_dop853(nodes, anchor_index, m, lam):
    """Values at ``nodes`` by adaptive DOP853 runs from the anchor both ways."""

    def rhs(s, y):
        return rho_rhs(s, m, lam)

    anchor = nodes[anchor_index]
    values = np.empty_like(nodes)
    values[anchor_index] = anchor
    up = nodes[anchor_index:]
    if len(up) > 1:
        sol = solve_ivp(rhs, (anchor, up[-1]), [anchor], method="DOP853",
                        t_eval=up, rtol=ODE_TOL, atol=ODE_TOL)
        values[anchor_index:] = sol.y[0]
    down = nodes[: anchor_index + 1][::-1]
    if len(down) > 1:
        sol = solve_ivp(rhs, (anchor, down[-1]), [anchor], method="DOP853",
                        t_eval=down, rtol=ODE_TOL, atol=ODE_TOL)
        values[: anchor_index + 1] = sol.y[0][::-1]
    return values


def _integrate_gauss(nodes, anchor_index, m, lam, order=12):
    """Values at ``nodes`` by composite Gauss-Legendre quadrature of rho'.

    The right-hand side does not involve rho, so each increment between
    neighbouring nodes is a plain integral and the increments carry no
    accumulated solver noise.
    """
    x, w = np.polynomial.legendre.leggauss(order)
    a, b = nodes[:-1], nodes[1:]
    mid, half = 0.5 * (a + b), 0.5 * (b - a)
    pts = mid[:, None] + half[:, None] * x[None, :]
    inc = half * (rho_rhs(pts, m, lam) @ w)
    values = np.empty_like(nodes)
    values[anchor_index] = nodes[anchor_index]
    values[anchor_index + 1:] = nodes[anchor_index] + np.cumsum(inc[anchor_index:])
    values[:anchor_index] = nodes[anchor_index] - np.cumsum(inc[:anchor_index][::-1])[::-1]
    return values


def solve_rho_lambda(m: float, lam: float, s_min: float, s_max: float,
                     n_samples: int = 2001, method: str = "gauss") -> RhoTable:
    """Tabulate rho_lam on [s_min, s_max] with rho_lam(4m) = 4m.

    ``method="gauss"`` integrates the right-hand side interval by interval;
    ``method="dop853"`` runs an adaptive 8(5,3) Runge-Kutta solve outward and
    inward from the anchor.
    """
    if m <= 0:
        raise ValueError("the rho table needs m > 0")
    floor = 2.0 * m * (1.0 + DOMAIN_DELTA)
    if s_min < floor:
        raise st.DomainError(f"s_min = {s_min} too close to the horizon 2m = {2 * m}")
    anchor = 4.0 * m
    if not (s_min <= anchor <= s_max):
        raise ValueError("the table range must contain the anchor s = 4m")

    # samples uniform in log(s - 2m) so that spacing shrinks near the horizon
    u = np.linspace(np.log(s_min - 2 * m), np.log(s_max - 2 * m), n_samples)
    nodes = np.unique(np.concatenate([2 * m + np.exp(u), [anchor]]))
    nodes[0], nodes[-1] = s_min, s_max
    ia = int(np.searchsorted(nodes, anchor))

    if method == "gauss":
        values = _integrate_gauss(nodes, ia, m, lam)
    elif method == "dop853":
        values = _integrate_dop853(nodes, ia, m, lam)
    else:
        raise ValueError(f"unknown method {method!r}")
    d1 = rho_rhs(nodes, m, lam)
    d2 = rho_rhs_derivative(nodes, m, lam)
    interp = BPoly.from_derivatives(nodes, np.stack([values, d1, d2], axis=1))
    return RhoTable(lam, m, nodes, values, d1, interp)


@lru_cache(maxsize=64)
def _cached_rho_table(m: float, lam: float, s_min: float, s_max: float) -> RhoTable:
    return solve_rho_lambda(m, lam, s_min, s_max)


def rho_table_for(m: float, lam: float, s_lo: float, s_hi: float) -> RhoTable:
    """A cached table covering [s_lo, s_hi] and the anchor, on a coarse bracket."""
    lo = min(s_lo, 4 * m)
    hi = max(s_hi, 4 * m)
    # round the bracket outward so nearby requests share a table
    lo_key = 2 * m + (lo - 2 * m) * 0.5
    hi_key = float(2.0 ** math.ceil(math.log2(hi)) * 1.5)
    return _cached_rho_table(float(m), float(lam), float(max(lo_key, 2 * m * (1 + 2 * DOMAIN_DELTA))), hi_key)


# ---------------------------------------------------------------------------
# intrinsic radial graphs in 3-metrics A(s) ds^2 + s^2 g_S2


@dataclass
class RadialGraph3:
    """The graph s = u(theta, phi) in a warped 3-metric A(s) ds^2 + s^2 g_S2."""

    grid: ParameterGrid
    u: Partials
    A: np.ndarray
    dA: np.ndarray

    @property
    def s(self):
        return self.u.value

    @property
    def tangents(self):
        out = np.zeros(self.grid.shape + (2, 3))
        out[..., :, 0] = self.u.first
        out[..., 0, 1] = 1.0
        out[..., 1, 2] = 1.0
        return out

    @property
    def metric3(self):
        s, th = self.s, self.grid.theta
        g = np.zeros(self.grid.shape + (3, 3))
        g[..., 0, 0] = self.A
        g[..., 1, 1] = s**2
        g[..., 2, 2] = (s * np.sin(th)) ** 2
        return g

    @property
    def christoffel3(self):
        s, th = self.s, self.grid.theta
        sn, cs = np.sin(th), np.cos(th)
        gam = np.zeros(self.grid.shape + (3, 3, 3))
        gam[..., 0, 0, 0] = self.dA / (2.0 * self.A)
        gam[..., 0, 1, 1] = -s / self.A
        gam[..., 0, 2, 2] = -s * sn**2 / self.A
        gam[..., 1, 0, 1] = gam[..., 1, 1, 0] = 1.0 / s
        gam[..., 1, 2, 2] = -sn * cs
        gam[..., 2, 0, 2] = gam[..., 2, 2, 0] = 1.0 / s
        gam[..., 2, 1, 2] = gam[..., 2, 2, 1] = cs / sn
        return gam

    @property
    def induced_metric(self):
        X = self.tangents
        return np.einsum("...ai,...ij,...bj->...ab", X, self.metric3, X)

    @property
    def inverse_metric(self):
        return np.linalg.inv(self.induced_metric)

    @property
    def normal(self):
        """Outward unit normal (contravariant), from the covector d(s - u)."""
        s, th = self.s, self.grid.theta
        cov = np.stack([np.ones_like(s), -self.u.d_theta, -self.u.d_phi], axis=-1)
        ginv = np.zeros(self.grid.shape + (3,))
        ginv[..., 0] = 1.0 / self.A
        ginv[..., 1] = 1.0 / s**2
        ginv[..., 2] = 1.0 / (s * np.sin(th)) ** 2
        vec = ginv * cov
        return vec / np.sqrt(np.sum(vec * cov, axis=-1))[..., None]

    @property
    def second_fundamental_form(self):
        X = self.tangents
        dd = np.zeros(self.grid.shape + (2, 2, 3))
        dd[..., 0] = self.u.second
        hess = dd + np.einsum("...kij,...ai,...bj->...abk", self.christoffel3, X, X)
        return -np.einsum("...abi,...ij,...j->...ab", hess, self.metric3, self.normal)

    @property
    def mean_curvature(self):
        return np.einsum("...ab,...ab->...", self.inverse_metric, self.second_fundamental_form)

    @property
    def area_density(self):
        g = self.induced_metric
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        return np.sqrt(det) / np.sin(self.grid.theta)

    def integrate(self, values) -> float:
        return self.grid.quadrature(np.asarray(values) * self.area_density)

    def area(self) -> float:
        return self.integrate(1.0)


def slice_graph(u: Partials | np.ndarray, grid: ParameterGrid, m: float) -> RadialGraph3:
    """Graph in the t = 0 slice, metric dr^2/(1-2m/r) + r^2 g_S2."""
    u = u if isinstance(u, Partials) else partials(u, grid)
    b = st.lapse_squared(u.value, m)
    db = 2.0 * m / u.value**2
    return RadialGraph3(grid, u, 1.0 / b, -db / b**2)


def ads_graph(u: Partials | np.ndarray, grid: ParameterGrid, m: float, lam: float) -> RadialGraph3:
    """Graph in (M, gbar) with gbar = ds^2/f^2 + s^2 g_S2, f^2 = 1 - 2m/s + lam^2 s^2."""
    u = u if isinstance(u, Partials) else partials(u, grid)
    s = u.value
    f2 = st.ads_sch_radicand(s, m, lam)
    if np.any(f2 <= 0):
        raise st.DomainError("graph reaches the horizon s0 of (M, gbar)")
    df2 = 2.0 * m / s**2 + 2.0 * lam**2 * s
    return RadialGraph3(grid, u, 1.0 / f2, -df2 / f2**2)


# ---------------------------------------------------------------------------
# builders


def _profile_partials(profile, grid: ParameterGrid) -> Partials:
    return partials(evaluate_profile(profile, grid), grid)


def _compose(u: Partials, value, d1, d2) -> Partials:
    """Partials of T = F(u) from the chart derivatives F', F'' at u."""
    return Partials(
        value=value,
        d_theta=d1 * u.d_theta,
        d_phi=d1 * u.d_phi,
        d_theta_theta=d2 * u.d_theta**2 + d1 * u.d_theta_theta,
        d_theta_phi=d2 * u.d_theta * u.d_phi + d1 * u.d_theta_phi,
        d_phi_phi=d2 * u.d_phi**2 + d1 * u.d_phi_phi,
    )


def _check_outside(u: np.ndarray, m: float) -> None:
    if np.any(u <= 2.0 * m):
        raise st.DomainError(
            f"profile reaches r = {float(np.min(u)):g} <= 2m = {2 * m:g}"
        )


def build_static_slice(u, m: float, grid: ParameterGrid, spec=None) -> SurfaceSample:
    up = _profile_partials(u, grid)
    _check_outside(up.value, m)
    zero = Partials.constant(np.zeros(grid.shape))
    return SurfaceSample(grid, zero, up, m, spec=spec)


def build_umbilical_slice(u, m: float, lam: float, grid: ParameterGrid, spec=None,
                          table: RhoTable | None = None) -> SurfaceSample:
    up = _profile_partials(u, grid)
    _check_outside(up.value, m)
    s = up.value
    if table is None:
        table = rho_table_for(m, lam, float(s.min()), float(s.max()))
    T = _compose(up, table(s), rho_rhs(s, m, lam), rho_rhs_derivative(s, m, lam))
    surf = SurfaceSample(grid, T, up, m, spec=spec,
                         frame_seed=("e0", umbilical_normal(s, m, lam)))
    surf.extras["lam"] = lam
    return surf


def build_null_cone(u, m: float, grid: ParameterGrid, spec=None) -> SurfaceSample:
    up = _profile_partials(u, grid)
    _check_outside(up.value, m)
    s = up.value
    b = st.lapse_squared(s, m)
    d2 = -2.0 * m / (s - 2.0 * m) ** 2 if m > 0 else np.zeros_like(s)
    T = _compose(up, tortoise_profile(s, m), 1.0 / b, d2)
    return SurfaceSample(grid, T, up, m, spec=spec)


def _lift(vec3: np.ndarray) -> np.ndarray:
    out = np.zeros(vec3.shape[:-1] + (4,))
    out[..., 1:] = vec3
    return out


@dataclass(frozen=True)
class ConvexStaticGate:
    passed: bool
    margin: float
    convexity: float
    potential_term_min: float

    def __bool__(self):
        return self.passed


def convex_static_tensor(base: RadialGraph3, m: float):
    """(h_hat, g_hat, Omega^{-1} nu_hat(Omega)) for a base graph in the t = 0 slice."""
    s = base.s
    nu_s = base.normal[..., 0]
    omega = np.sqrt(st.lapse_squared(s, m))
    domega = (m / s**2) / omega
    return base.second_fundamental_form, base.induced_metric, nu_s * domega / omega


def _min_relative_eigenvalue(P, g):
    """Smallest eigenvalue of g^{-1} P for symmetric P and SPD g, node-wise."""
    chol = np.linalg.cholesky(g)
    linv = np.linalg.inv(chol)
    sym = np.einsum("...ij,...jk,...lk->...il", linv, P, linv)
    return np.linalg.eigvalsh(sym)[..., 0]


def convex_static_check(sigma_hat, m: float, grid: ParameterGrid, tol: float = 1e-12) -> ConvexStaticGate:
    """Gate h_hat >= Omega^{-1} nu_hat(Omega) g_hat together with h_hat > 0."""
    up = _profile_partials(sigma_hat, grid)
    _check_outside(up.value, m)
    base = slice_graph(up, grid, m)
    h, g, pot = convex_static_tensor(base, m)
    margin = float(np.min(_min_relative_eigenvalue(h - pot[..., None, None] * g, g)))
    convexity = float(np.min(_min_relative_eigenvalue(h, g)))
    passed = margin >= -tol and convexity > 0.0
    return ConvexStaticGate(passed, margin, convexity, float(np.min(pot)))


def build_convex_static(sigma_hat, tau, m: float, grid: ParameterGrid, spec=None,
                        check: bool = True) -> SurfaceSample:
    base_p = _profile_partials(sigma_hat, grid)
    _check_outside(base_p.value, m)
    tau_vals = evaluate_profile(tau, grid)
    tail = spectral_tail_fraction(tau_vals, grid)
    if tail > TAIL_LIMIT:
        raise GateError(f"time profile under-resolved: top-octave energy fraction {tail:.2e}")
    if check:
        gate = convex_static_check(base_p.value, m, grid)
        if not gate:
            raise GateError(
                f"base surface not convex static (margin {gate.margin:.3e}, "
                f"convexity {gate.convexity:.3e})"
            )
    tp = partials(tau_vals, grid)
    base = slice_graph(base_p, grid, m)
    nu = _lift(base.normal)
    zero = Partials.constant(np.zeros(grid.shape))
    projected = SurfaceSample(grid, zero, base_p, m, spec=None, frame_seed=("nu", nu))
    surf = SurfaceSample(grid, tp, base_p, m, spec=spec, frame_seed=("nu", nu),
                         projected=projected)
    surf.extras["base_graph"] = base
    return surf


def build_from_spec(spec: SurfaceSpec, grid: ParameterGrid, m: float | None = None) -> SurfaceSample:
    if m is not None and spec.m != m:
        spec = replace(spec, m=m)
    if spec.family is Family.STATIC_SLICE:
        return build_static_slice(spec.u, spec.m, grid, spec)
    if spec.family is Family.UMBILICAL_SLICE:
        return build_umbilical_slice(spec.u, spec.m, spec.lam, grid, spec)
    if spec.family is Family.NULL_CONE:
        return build_null_cone(spec.u, spec.m, grid, spec)
    return build_convex_static(spec.sigma_hat, spec.tau, spec.m, grid, spec)


# ---------------------------------------------------------------------------
# projection calculus for surfaces in static cylinders


@dataclass(frozen=True)
class ProjectionReport:
    metric: float
    inverse_metric: float
    volume_element: float
    area: float
    area_projected: float

    @property
    def area_monotone(self) -> bool:
        return self.area_projected >= self.area * (1.0 - 1e-14)


def _tau_terms(surface: SurfaceSample):
    f = np.sqrt(st.lapse_squared(surface.r, surface.m))
    dtau = surface.time.first
    ginv = np.linalg.inv(surface.induced_metric)
    grad2 = np.einsum("...ab,...a,...b->...", ginv, dtau, dtau)
    return f, dtau, ginv, grad2


def project_surface(surface: SurfaceSample) -> tuple[SurfaceSample, ProjectionReport]:
    """Projected surface along d/dt and residuals of the metric relations."""
    proj = surface.projected
    if proj is None:
        zero = Partials.constant(np.zeros(surface.grid.shape))
        proj = SurfaceSample(surface.grid, zero, surface.radius, surface.m)
    f, dtau, ginv, grad2 = _tau_terms(surface)
    g = surface.induced_metric
    ghat = proj.induced_metric
    scale = float(np.max(np.abs(ghat)))
    rel = g + (f**2)[..., None, None] * np.einsum("...a,...b->...ab", dtau, dtau)
    metric_res = float(np.max(np.abs(ghat - rel))) / scale

    up = np.einsum("...ab,...b->...a", ginv, dtau)
    inv_formula = ginv - ((f**2) / (1.0 + f**2 * grad2))[..., None, None] * np.einsum(
        "...a,...b->...ab", up, up
    )
    ghat_inv = np.linalg.inv(ghat)
    inv_scale = float(np.max(np.abs(ghat_inv)))
    inv_res = float(np.max(np.abs(ghat_inv - inv_formula))) / inv_scale

    vol = surface.area_density * np.sqrt(1.0 + f**2 * grad2)
    vol_res = float(np.max(np.abs(proj.area_density - vol) / proj.area_density))

    from .mesh import surface_area

    report = ProjectionReport(metric_res, inv_res, vol_res, surface_area(surface), surface_area(proj))
    return proj, report


@dataclass(frozen=True)
class PointwiseProjection:
    j_identity: float
    mean_curvature_relation: float
    min_mean_curvature_excess: float
    lhs_density: np.ndarray = field(repr=False)
    projected_density: np.ndarray = field(repr=False)


def projection_pointwise_identity(surface: SurfaceSample) -> PointwiseProjection:
    """Residuals of -<J, d/dt> = -<H, nu> f sqrt(1 + f^2 |grad tau|^2) and of
    -<H, nu> = H_hat + (tangential tau term) . (h_hat - f^{-1} nu(f) g_hat)."""
    base = surface.extras.get("base_graph") or slice_graph(surface.radius, surface.grid, surface.m)
    nu = _lift(base.normal)
    G = surface.spacetime_metric
    f, dtau, ginv, grad2 = _tau_terms(surface)
    H = mean_curvature_vector(surface)
    frame = null_frame(surface, ("nu", nu))
    J = dual_mean_curvature(surface, frame)
    dt = np.zeros_like(nu)
    dt[..., 0] = 1.0

    minus_j_dt = -st.dot(G, J, dt)
    minus_h_nu = -st.dot(G, H, nu)
    boost = np.sqrt(1.0 + f**2 * grad2)
    rhs_j = minus_h_nu * f * boost
    jscale = max(1.0, float(np.max(np.abs(minus_j_dt))))
    j_res = float(np.max(np.abs(minus_j_dt - rhs_j))) / jscale

    h_hat, g_hat, pot = convex_static_tensor(base, surface.m)
    H_hat = base.mean_curvature
    up = np.einsum("...ab,...b->...a", ginv, dtau)
    weight = ((f**2) / (1.0 + f**2 * grad2))[..., None, None] * np.einsum("...a,...b->...ab", up, up)
    corr = np.einsum("...ab,...ab->...", weight, h_hat - pot[..., None, None] * g_hat)
    hscale = max(1.0, float(np.max(np.abs(minus_h_nu))))
    h_res = float(np.max(np.abs(minus_h_nu - (H_hat + corr)))) / hscale
    return PointwiseProjection(
        j_identity=j_res,
        mean_curvature_relation=h_res,
        min_mean_curvature_excess=float(np.min(minus_h_nu - H_hat)),
        lhs_density=minus_j_dt,
        projected_density=H_hat * f * boost,
    )


# ---------------------------------------------------------------------------
# identities on (M, gbar) and on the slices


def conformal_killing_divergence(s, m: float, lam: float):
    """div_gbar(s f d/ds) - 3 f, expanded with the product rule."""
    s = np.asarray(s, dtype=float)
    f2 = st.ads_sch_radicand(s, m, lam)
    if np.any(f2 <= 0):
        raise st.DomainError("point at or inside the horizon s0")
    f = np.sqrt(f2)
    df = (m / s**2 + lam**2 * s) / f
    # sqrt(det gbar) = s^2 sin(theta) / f, vector component X^s = s f
    vol = s**2 / f
    dvol = 2.0 * s / f - s**2 * df / f2
    X = s * f
    dX = f + s * df
    div = (dvol * X + vol * dX) / vol
    return div - 3.0 * f


def horizon_flux(m: float, lam: float) -> float:
    return 4.0 * math.pi * s0_root(m, lam) ** 3


def level_set_flux(s_level: float, m: float, lam: float, grid: ParameterGrid) -> float:
    """Integral of <nu, s f d/ds> over the level set s = s_level in (M, gbar)."""
    u = Partials.constant(np.full(grid.shape, float(s_level)))
    graph = ads_graph(u, grid, m, lam)
    nu = graph.normal
    s = graph.s
    f = np.sqrt(st.ads_sch_radicand(s, m, lam))
    pairing = graph.A * nu[..., 0] * s * f
    return graph.integrate(pairing)


def horizon_flux_extrapolated(m: float, lam: float, grid: ParameterGrid | None = None,
                              eps0: float = 1e-2, levels: int = 5) -> float:
    """Richardson extrapolation eps -> 0 of the level-set flux at s0 + eps."""
    from .mesh import build_grid

    grid = grid or build_grid(8, 16)
    s0 = s0_root(m, lam)
    eps = eps0 * s0 * 0.5 ** np.arange(levels)
    table = [np.array([level_set_flux(s0 + e, m, lam, grid) for e in eps])]
    # error expansion in integer powers of eps
    for k in range(1, levels):
        prev = table[-1]
        fac = 2.0**k
        table.append((fac * prev[1:] - prev[:-1]) / (fac - 1.0))
    return float(table[-1][0])


def umbilical_isometry_residual(s, theta, m: float, lam: float) -> float:
    """max |Psi^* g - gbar| over the sample points (relative)."""
    s = np.asarray(s, dtype=float)
    theta = np.asarray(theta, dtype=float)
    g4 = st.metric_components(s, theta, m)
    rp = rho_rhs(s, m, lam)
    jac = np.zeros(s.shape + (3, 4))
    jac[..., 0, 0] = rp
    jac[..., 0, 1] = 1.0
    jac[..., 1, 2] = 1.0
    jac[..., 2, 3] = 1.0
    pull = np.einsum("...ai,...ij,...bj->...ab", jac, g4, jac)
    g3 = st.ads_sch_metric3(s, theta, m, lam)
    return float(np.max(np.abs(pull - g3) / np.abs(g3).max(axis=(-1, -2))[..., None, None]))


def null_generator_residual(s, m: float) -> float:
    """<V, V> for the radial generator V = t'(s) d/dt + d/dr of the null cone."""
    s = np.asarray(s, dtype=float)
    b = st.lapse_squared(s, m)
    tp = 1.0 / b
    return float(np.max(np.abs(-b * tp**2 + 1.0 / b) * b))
