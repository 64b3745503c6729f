"""Both sides of the Gibbons-Penrose inequality and the proof-chain checks.

The central quantity is

    lhs = -integral <J, d/dt> dmu + 16 pi m,    rhs = sqrt(16 pi |Sigma|),

evaluated on SurfaceSamples built by :mod:`gpverify.slices`. Everything else
here decomposes the lhs along the argument for one of the four families and
checks each link numerically.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import spacetime as st
from .extrinsic import (
    dual_mean_curvature,
    j_identity_residuals,
    killing_flux,
    mean_curvature_norm_integral,
    mean_curvature_vector,
    null_expansion,
    null_frame,
    past_expansion,
)
from .mesh import (
    HarmonicProfile,
    ParameterGrid,
    NotSpacelikeError,
    SurfaceSample,
    build_grid,
    evaluate_profile,
    integrate_scalar,
    partials,
    real_sph_harm,
    spectral_tail_fraction,
    surface_area,
)
from .slices import (
    Family,
    GateError,
    SurfaceSpec,
    ads_graph,
    build_from_spec,
    build_umbilical_slice,
    build_null_cone,
    convex_static_check,
    project_surface,
    projection_pointwise_identity,
    s0_root,
    slice_graph,
)

FOUR_PI = 4.0 * math.pi
IDENTITY_TOL = 1e-9
INEQUALITY_TOL = 1e-8


def _dt(surface: SurfaceSample) -> np.ndarray:
    v = np.zeros(surface.grid.shape + (4,))
    v[..., st.T] = 1.0
    return v


def penrose_lhs(surface: SurfaceSample, m: float | None = None) -> float:
    m = surface.m if m is None else m
    J = dual_mean_curvature(surface)
    return -integrate_scalar(surface, st.dot(surface.spacetime_metric, J, _dt(surface))) + 16 * math.pi * m


def penrose_rhs(surface: SurfaceSample) -> float:
    return math.sqrt(16.0 * math.pi * surface_area(surface))


def penrose_gap(surface: SurfaceSample) -> float:
    return penrose_lhs(surface) - penrose_rhs(surface)


def penrose_lhs_frame_form(surface: SurfaceSample, frame=None, m: float | None = None) -> float:
    """-integral <H, L><Lbar, d/dt> dmu + 16 pi m in the given (or default) frame."""
    m = surface.m if m is None else m
    frame = frame if frame is not None else null_frame(surface)
    G = surface.spacetime_metric
    H = mean_curvature_vector(surface)
    dens = st.dot(G, H, frame.L) * st.dot(G, frame.Lbar, _dt(surface))
    return -integrate_scalar(surface, dens) + 16 * math.pi * m


# ---------------------------------------------------------------------------
# Minkowski


@dataclass(frozen=True)
class ObserverSpec:
    """Constant future unit timelike vector of Minkowski space, Cartesian components."""

    T0: tuple[float, float, float, float] = (1.0, 0.0, 0.0, 0.0)

    def __post_init__(self):
        t, x, y, z = self.T0
        norm = -t * t + x * x + y * y + z * z
        if abs(norm + 1.0) > 1e-12 or t <= 0:
            raise ValueError(f"observer must be future unit timelike, got <T0,T0> = {norm}")

    @classmethod
    def boosted(cls, rapidity: float, axis: str = "z") -> "ObserverSpec":
        comp = {"x": 1, "y": 2, "z": 3}[axis]
        v = [math.cosh(rapidity), 0.0, 0.0, 0.0]
        v[comp] = math.sinh(rapidity)
        return cls(tuple(v))

    def field(self, surface: SurfaceSample) -> np.ndarray:
        """Components of T0 in the spherical coordinate basis at the surface nodes."""
        t0, vx, vy, vz = self.T0
        r, th, ph = surface.r, surface.theta, surface.phi
        sn, cs, sp, cp = np.sin(th), np.cos(th), np.sin(ph), np.cos(ph)
        out = np.zeros(surface.grid.shape + (4,))
        out[..., 0] = t0
        out[..., 1] = sn * cp * vx + sn * sp * vy + cs * vz
        out[..., 2] = (cs * cp * vx + cs * sp * vy - sn * vz) / r
        out[..., 3] = (-sp * vx + cp * vy) / (r * sn)
        return out


@dataclass(frozen=True)
class MinkowskiReport:
    j_form: float
    expansion_form: float
    rhs: float
    observer_flux: float

    @property
    def j_gap(self) -> float:
        return self.j_form - self.rhs

    @property
    def expansion_gap(self) -> float:
        return self.expansion_form - self.rhs

    @property
    def agreement(self) -> float:
        return abs(self.j_form - self.expansion_form)


def minkowski_penrose(surface: SurfaceSample, observer: ObserverSpec | None = None) -> MinkowskiReport:
    if surface.m != 0:
        raise ValueError("minkowski_penrose needs an m = 0 surface")
    observer = observer or ObserverSpec()
    T0 = observer.field(surface)
    G = surface.spacetime_metric
    J = dual_mean_curvature(surface)
    j_form = -integrate_scalar(surface, st.dot(G, J, T0))
    theta = null_expansion(surface, gauge=T0)
    flux = killing_flux(surface, T0)
    return MinkowskiReport(j_form, integrate_scalar(surface, theta), penrose_rhs(surface), flux)


# ---------------------------------------------------------------------------
# static slice


def static_slice_reduction(surface: SurfaceSample, m: float | None = None) -> tuple[float, float]:
    """(integral H sqrt(1-2m/r) dmu + 16 pi m computed in the slice, penrose_lhs)."""
    m = surface.m if m is None else m
    graph = slice_graph(surface.radius, surface.grid, m)
    f = np.sqrt(st.lapse_squared(graph.s, m))
    reduced = graph.integrate(graph.mean_curvature * f) + 16 * math.pi * m
    return reduced, penrose_lhs(surface, m)


# ---------------------------------------------------------------------------
# umbilical slice


def bulk_integral(graph, m: float, lam: float, n_radial: int = 64) -> float:
    """integral over the region between the horizon s0 and the graph of f dvol."""
    s0 = s0_root(m, lam)
    x, w = np.polynomial.legendre.leggauss(n_radial)
    u = graph.s
    half = 0.5 * (u - s0)
    s = s0 + half[..., None] * (x + 1.0)
    f = np.sqrt(st.ads_sch_radicand(s, m, lam))
    # gbar volume density s^2/f against ds and the unit-sphere measure
    radial = half * np.sum(w * f * (s**2 / f), axis=-1)
    return graph.grid.quadrature(radial)


@dataclass(frozen=True)
class UmbilicalDecomposition:
    hf_integral: float
    bulk: float
    horizon: float
    extrinsic: float

    @property
    def intrinsic(self) -> float:
        return self.hf_integral - self.bulk - self.horizon

    @property
    def residual(self) -> float:
        return abs(self.intrinsic - self.extrinsic)


def umbilical_decomposition(surface: SurfaceSample, m: float | None = None,
                            lam: float | None = None, n_radial: int = 64) -> UmbilicalDecomposition:
    """Split -integral <J, d/dt> into integral Hf - 6 lam^2 integral f dvol - 8 pi lam^2 s0^3."""
    m = surface.m if m is None else m
    lam = surface.extras["lam"] if lam is None else lam
    graph = ads_graph(surface.radius, surface.grid, m, lam)
    f = np.sqrt(st.ads_sch_radicand(graph.s, m, lam))
    hf = graph.integrate(graph.mean_curvature * f)
    bulk = 6.0 * lam**2 * bulk_integral(graph, m, lam, n_radial)
    horizon = 8.0 * math.pi * lam**2 * s0_root(m, lam) ** 3
    extrinsic = penrose_lhs(surface, m) - 16 * math.pi * m
    return UmbilicalDecomposition(hf, bulk, horizon, extrinsic)


@dataclass(frozen=True)
class BHWResult:
    gap: float
    hf_integral: float
    bulk: float
    area: float
    s0: float
    min_mean_curvature: float

    @property
    def mean_convex(self) -> bool:
        return self.min_mean_curvature > 0.0


def _bhw_unit_lambda(u_values: np.ndarray, grid: ParameterGrid, m: float, n_radial: int) -> BHWResult:
    graph = ads_graph(partials(u_values, grid), grid, m, 1.0)
    f = np.sqrt(st.ads_sch_radicand(graph.s, m, 1.0))
    H = graph.mean_curvature
    hf = graph.integrate(f * H)
    bulk = 6.0 * bulk_integral(graph, m, 1.0, n_radial)
    area = graph.area()
    s0 = s0_root(m, 1.0)
    gap = hf - bulk - math.sqrt(16 * math.pi * area) + 8 * math.pi * s0
    return BHWResult(gap, hf, bulk, area, s0, float(np.min(H)))


def bhw_check(u, m: float, grid: ParameterGrid, lam: float = 1.0, n_radial: int = 64) -> BHWResult:
    """Gap of integral fH - 6 lam^2 integral f dvol >= sqrt(16 pi |Sigma|) - 8 pi s0.

    Works intrinsically in (M, gbar), so the graph may dip below s = 2m. For
    lam != 1 lengths are rescaled by lam, the lam = 1 inequality is evaluated
    with mass lam m, and the gap is scaled back by 1/lam.
    """
    u_vals = evaluate_profile(u, grid)
    res = _bhw_unit_lambda(lam * u_vals, grid, lam * m, n_radial)
    if lam == 1.0:
        return res
    return BHWResult(
        gap=res.gap / lam,
        hf_integral=res.hf_integral / lam,
        bulk=res.bulk / lam,
        area=res.area / lam**2,
        s0=res.s0 / lam,
        min_mean_curvature=res.min_mean_curvature * lam,
    )


@dataclass(frozen=True)
class AssemblyCheck:
    penrose_gap: float
    bhw_gap: float
    root_term: float

    @property
    def residual(self) -> float:
        return abs(self.penrose_gap - self.bhw_gap - self.root_term)

    @property
    def gap_difference(self) -> float:
        return abs(self.penrose_gap - self.bhw_gap)


def final_assembly_check(surface: SurfaceSample, m: float | None = None, lam: float | None = None) -> AssemblyCheck:
    """penrose_gap = bhw_gap + (16 pi m - 8 pi lam^2 s0^3 - 8 pi s0); the bracket vanishes."""
    m = surface.m if m is None else m
    lam = surface.extras["lam"] if lam is None else lam
    bhw = bhw_check(surface.radius.value, m, surface.grid, lam)
    s0 = s0_root(m, lam)
    root = 16 * math.pi * m - 8 * math.pi * lam**2 * s0**3 - 8 * math.pi * s0
    return AssemblyCheck(penrose_gap(surface), bhw.gap, root)


def umbilical_mean_curvature(surface: SurfaceSample) -> np.ndarray:
    graph = ads_graph(surface.radius, surface.grid, surface.m, surface.extras["lam"])
    return graph.mean_curvature


# ---------------------------------------------------------------------------
# null cone


@dataclass(frozen=True)
class LimitRow:
    lam: float
    gap: float
    gap_difference: float
    density_difference: float
    min_mean_curvature: float


@dataclass(frozen=True)
class NullConeLimitReport:
    gap_null_cone: float
    min_expansion: float
    rows: tuple[LimitRow, ...]

    @property
    def monotone(self) -> bool:
        d = [r.gap_difference for r in self.rows]
        s = [r.density_difference for r in self.rows]
        return all(b < a for a, b in zip(d, d[1:])) and all(b < a for a, b in zip(s, s[1:]))


def _lhs_density(surface: SurfaceSample) -> np.ndarray:
    J = dual_mean_curvature(surface)
    return -st.dot(surface.spacetime_metric, J, _dt(surface)) * surface.area_density


def null_cone_limit_study(u, m: float, lambdas: Sequence[float], grid: ParameterGrid) -> NullConeLimitReport:
    """Track the umbilical surfaces t = rho_lam(u) against the null-cone surface."""
    cone = build_null_cone(u, m, grid)
    theta = null_expansion(cone)
    if np.any(theta <= 0):
        raise GateError("future outward null expansion is not positive")
    gap_inf = penrose_gap(cone)
    dens_inf = _lhs_density(cone)
    scale = float(np.max(np.abs(dens_inf)))
    rows = []
    for lam in lambdas:
        surf = build_umbilical_slice(u, m, lam, grid)
        gap = penrose_gap(surf)
        dd = float(np.max(np.abs(_lhs_density(surf) - dens_inf))) / scale
        rows.append(LimitRow(float(lam), gap, abs(gap - gap_inf), dd,
                             float(np.min(umbilical_mean_curvature(surf)))))
    return NullConeLimitReport(gap_inf, float(np.min(theta)), tuple(rows))


# ---------------------------------------------------------------------------
# convex static


@dataclass(frozen=True)
class ConvexStaticChain:
    lhs_integral: float
    projected_integral: float
    area: float
    area_projected: float
    m: float
    gate_margin: float

    @property
    def link_pointwise(self) -> float:
        """-integral <J, d/dt> - integral_hat H_hat f dmu_hat."""
        return self.lhs_integral - self.projected_integral

    @property
    def link_static(self) -> float:
        """integral_hat H_hat f dmu_hat - (sqrt(16 pi |Sigma_hat|) - 16 pi m)."""
        return self.projected_integral - (math.sqrt(16 * math.pi * self.area_projected) - 16 * math.pi * self.m)

    @property
    def link_area(self) -> float:
        """sqrt(16 pi |Sigma_hat|) - sqrt(16 pi |Sigma|)."""
        return math.sqrt(16 * math.pi * self.area_projected) - math.sqrt(16 * math.pi * self.area)

    @property
    def gap(self) -> float:
        return self.lhs_integral + 16 * math.pi * self.m - math.sqrt(16 * math.pi * self.area)

    def links(self) -> dict[str, float]:
        return {"pointwise": self.link_pointwise, "static": self.link_static, "area": self.link_area}


def convex_static_chain(surface: SurfaceSample, m: float | None = None) -> ConvexStaticChain:
    m = surface.m if m is None else m
    gate = convex_static_check(surface.radius.value, m, surface.grid)
    if not gate:
        raise GateError(f"base surface fails the convex-static gate (margin {gate.margin:.3e})")
    proj, rep = project_surface(surface)
    base = surface.extras.get("base_graph") or slice_graph(surface.radius, surface.grid, m)
    f = np.sqrt(st.lapse_squared(base.s, m))
    projected = proj.grid.quadrature(base.mean_curvature * f * proj.area_density)
    lhs = penrose_lhs(surface, m) - 16 * math.pi * m
    return ConvexStaticChain(lhs, projected, rep.area, rep.area_projected, m, gate.margin)


# ---------------------------------------------------------------------------
# surface families


@dataclass(frozen=True)
class FamilySpec:
    family: Family
    base_radius: float = 3.0
    l_max: int = 4
    amplitude: float = 0.1
    count: int = 100
    seed: int = 0
    m: float = 1.0
    lam: float = 1.0
    tau_amplitude: float = 0.1

    def __post_init__(self):
        object.__setattr__(self, "family", Family(self.family))


@dataclass(frozen=True)
class FamilyMember:
    index: int
    spec: SurfaceSpec | None
    reason: str | None = None

    @property
    def accepted(self) -> bool:
        return self.reason is None


_REFERENCE_GRID = None


def _reference_grid() -> ParameterGrid:
    global _REFERENCE_GRID
    if _REFERENCE_GRID is None:
        _REFERENCE_GRID = build_grid(32, 64)
    return _REFERENCE_GRID


def random_harmonic_terms(rng: np.random.Generator, l_max: int, amplitude: float) -> tuple:
    """Coefficients of a random perturbation with sup-norm amplitude * U(0.25, 1).

    Gaussian coefficients are damped by (l(l+1))^-2 so that curvature, not just
    height, stays a small perturbation of the round sphere.
    """
    if amplitude == 0:
        return ()
    lm = [(l, m) for l in range(1, l_max + 1) for m in range(-l, l + 1)]
    z = rng.standard_normal(len(lm)) / np.array([(l * (l + 1)) ** 2 for l, _ in lm], dtype=float)
    grid = _reference_grid()
    pert = sum(c * real_sph_harm(l, m, grid.theta, grid.phi) for (l, m), c in zip(lm, z))
    scale = amplitude * rng.uniform(0.25, 1.0) / float(np.max(np.abs(pert)))
    return tuple((l, m, float(c * scale)) for (l, m), c in zip(lm, z))


def family_candidate(fs: FamilySpec, index: int) -> SurfaceSpec:
    rng = np.random.default_rng([fs.seed, index])
    terms = random_harmonic_terms(rng, fs.l_max, fs.amplitude)
    radial = HarmonicProfile(fs.base_radius, terms, relative=True)
    if fs.family is Family.STATIC_SLICE:
        return SurfaceSpec(fs.family, fs.m, u=radial)
    if fs.family is Family.UMBILICAL_SLICE:
        return SurfaceSpec(fs.family, fs.m, u=radial, lam=fs.lam)
    if fs.family is Family.NULL_CONE:
        return SurfaceSpec(fs.family, fs.m, u=radial)
    tau_terms = random_harmonic_terms(rng, fs.l_max, fs.tau_amplitude * fs.base_radius)
    return SurfaceSpec(fs.family, fs.m, sigma_hat=radial, tau=HarmonicProfile(0.0, tau_terms))


def gate_surface(spec: SurfaceSpec, grid: ParameterGrid) -> tuple[SurfaceSample | None, str | None, dict]:
    """Build and gate one surface; returns (surface, rejection reason, margins)."""
    margins: dict = {}
    try:
        surface = build_from_spec(spec, grid)
    except NotSpacelikeError as exc:
        return None, f"not spacelike: {exc}", margins
    except st.DomainError as exc:
        return None, f"domain: {exc}", margins
    except GateError as exc:
        return None, f"not convex static: {exc}", margins
    except ValueError as exc:
        return None, f"invalid: {exc}", margins
    margins["spacelike"] = surface.spacelike_margin
    fam = spec.family
    if fam is Family.STATIC_SLICE:
        H = slice_graph(surface.radius, grid, spec.m).mean_curvature
        margins["mean_convex"] = float(np.min(H))
        if np.min(H) <= 0:
            return surface, "not mean-convex", margins
    elif fam is Family.UMBILICAL_SLICE:
        H = umbilical_mean_curvature(surface)
        margins["mean_convex"] = float(np.min(H))
        if np.min(H) <= 0:
            return surface, "not mean-convex", margins
    elif fam is Family.NULL_CONE:
        theta = null_expansion(surface)
        margins["expansion"] = float(np.min(theta))
        if np.min(theta) <= 0:
            return surface, "future null expansion not positive", margins
    else:
        gate = convex_static_check(surface.radius.value, spec.m, grid)
        margins["convex_static"] = gate.margin
    return surface, None, margins


def generate_family(fs: FamilySpec, grid: ParameterGrid | None = None) -> list[FamilyMember]:
    """Deterministic candidate list with gate verdicts; raises if nothing passes."""
    grid = grid or _reference_grid()
    members = []
    for i in range(fs.count):
        spec = family_candidate(fs, i)
        _, reason, _ = gate_surface(spec, grid)
        members.append(FamilyMember(i, spec, reason))
    if fs.count and not any(mb.accepted for mb in members):
        raise GateError(f"all {fs.count} candidates rejected; first reason: {members[0].reason}")
    return members


# ---------------------------------------------------------------------------
# reports


@dataclass
class InequalityReport:
    family: str
    m: float
    lam: float | None
    resolution: tuple[int, int]
    lhs: float
    rhs: float
    gap: float
    killing_flux: float
    mean_curvature_l1: float
    identity_residuals: dict = field(default_factory=dict)
    gate_margins: dict = field(default_factory=dict)
    min_past_expansion: float = float("nan")
    min_future_expansion: float = float("nan")
    equality_case: bool = False
    convergence: dict = field(default_factory=dict)
    extra: dict = field(default_factory=dict)

    @property
    def tolerance(self) -> float:
        return max(INEQUALITY_TOL, 10.0 * abs(self.killing_flux))

    @property
    def holds(self) -> bool:
        return self.gap >= -self.tolerance

    def to_dict(self) -> dict:
        out = asdict(self)
        out["resolution"] = list(self.resolution)
        out["tolerance"] = self.tolerance
        out["holds"] = self.holds
        return out


def _is_symmetry_sphere(surface: SurfaceSample) -> bool:
    r = surface.radius
    return bool(np.ptp(r.value) < 1e-12 * np.max(r.value) and np.ptp(surface.time.first) < 1e-12)


def evaluate_surface(surface: SurfaceSample, margins: dict | None = None) -> InequalityReport:
    spec = surface.spec
    family = spec.family if spec is not None else None
    lhs = penrose_lhs(surface)
    rhs = penrose_rhs(surface)
    flux = killing_flux(surface)
    frame = null_frame(surface)
    residuals = dict(j_identity_residuals(surface, frame))
    residuals["frame_form"] = abs(penrose_lhs_frame_form(surface, frame) - lhs)
    extra: dict = {}
    lam = surface.extras.get("lam")
    if family is Family.STATIC_SLICE:
        reduced, general = static_slice_reduction(surface)
        residuals["static_reduction"] = abs(reduced - general)
    elif family is Family.UMBILICAL_SLICE:
        dec = umbilical_decomposition(surface)
        residuals["umbilical_decomposition"] = dec.residual
        asm = final_assembly_check(surface)
        residuals["assembly"] = asm.residual
        extra["bhw_gap"] = asm.bhw_gap
    elif family is Family.CONVEX_STATIC:
        _, rep = project_surface(surface)
        pw = projection_pointwise_identity(surface)
        residuals.update(
            projection_metric=rep.metric,
            projection_inverse=rep.inverse_metric,
            projection_volume=rep.volume_element,
            pointwise_j=pw.j_identity,
            pointwise_h=pw.mean_curvature_relation,
        )
        chain = convex_static_chain(surface)
        extra["chain_links"] = chain.links()
    return InequalityReport(
        family=family.value if family else "unspecified",
        m=surface.m,
        lam=lam,
        resolution=surface.grid.shape,
        lhs=lhs,
        rhs=rhs,
        gap=lhs - rhs,
        killing_flux=flux,
        mean_curvature_l1=mean_curvature_norm_integral(surface),
        identity_residuals=residuals,
        gate_margins=dict(margins or {}),
        min_past_expansion=float(np.min(past_expansion(surface, frame))),
        min_future_expansion=float(np.min(null_expansion(surface, frame))),
        equality_case=_is_symmetry_sphere(surface),
        extra=extra,
    )


def verify_spec(spec: SurfaceSpec, grid: ParameterGrid) -> tuple[InequalityReport | None, str | None]:
    surface, reason, margins = gate_surface(spec, grid)
    if reason is not None:
        return None, reason
    return evaluate_surface(surface, margins), None


def run_family(fs: FamilySpec, grid: ParameterGrid, threads: int = 1) -> list[tuple[FamilyMember, InequalityReport | None]]:
    """Gate and evaluate every candidate; order of results follows the index."""

    def job(i: int):
        spec = family_candidate(fs, i)
        surface, reason, margins = gate_surface(spec, grid)
        if reason is not None:
            return FamilyMember(i, spec, reason), None
        return FamilyMember(i, spec), evaluate_surface(surface, margins)

    if threads <= 1:
        return [job(i) for i in range(fs.count)]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(job, range(fs.count)))


# ---------------------------------------------------------------------------
# convergence


@dataclass
class ConvergenceSeries:
    name: str
    resolutions: list[tuple[int, int]]
    values: list[float]
    errors: list[float]
    orders: list[float]
    status: str

    def to_dict(self) -> dict:
        return asdict(self)


def _orders(errors: Sequence[float], floor: float) -> tuple[list[float], str]:
    """Observed orders between consecutive doublings whose errors clear the floor."""
    errs = list(errors)
    if all(e <= floor for e in errs):
        return [], "rounding-floor"
    orders = [math.log2(a / b) for a, b in zip(errs, errs[1:]) if a > floor and b > floor]
    above = [e for e in errs if e > floor]
    if any(b > a for a, b in zip(above, above[1:])) or any(
        a <= floor < b for a, b in zip(errs, errs[1:])
    ):
        return orders, "inconclusive"
    if orders and min(orders) < 1.5:
        return orders, "under-resolved"
    return orders, "converged"


def richardson_series(name: str, resolutions, values, exact: float | None = None) -> ConvergenceSeries:
    """Errors against ``exact`` or, lacking it, against the finest value."""
    vals = list(values)
    if exact is None:
        ref = vals[-1]
        errors = [abs(v - ref) for v in vals[:-1]]
    else:
        errors = [abs(v - exact) for v in vals]
    floor = 1e-13 * max(1.0, max(abs(v) for v in vals))
    orders, status = _orders(errors, floor)
    return ConvergenceSeries(name, [tuple(r) for r in resolutions], vals, errors, orders, status)


@dataclass
class ConvergenceReport:
    series: dict[str, ConvergenceSeries]
    tail_fraction: float

    @property
    def flags(self) -> dict[str, str]:
        out = {k: s.status for k, s in self.series.items()}
        if self.tail_fraction > 1e-6:
            out = {k: ("under-resolved" if v != "rounding-floor" else v) for k, v in out.items()}
        return out


def convergence_study(spec: SurfaceSpec, resolutions: Sequence[tuple[int, int]]) -> ConvergenceReport:
    if len(resolutions) < 3:
        raise ValueError("a convergence study needs at least three resolutions")
    for (a, b), (c, d) in zip(resolutions, resolutions[1:]):
        if (c, d) != (2 * a, 2 * b):
            raise ValueError("resolutions must form a doubling sequence")
    areas, lhss, fluxes = [], [], []
    tail = 0.0
    for nt, np_ in resolutions:
        grid = build_grid(nt, np_)
        surface = build_from_spec(spec, grid)
        areas.append(surface_area(surface))
        lhss.append(penrose_lhs(surface))
        fluxes.append(killing_flux(surface))
        tail = spectral_tail_fraction(surface.radius.value, grid)
    series = {
        "area": richardson_series("area", resolutions, areas),
        "penrose_lhs": richardson_series("penrose_lhs", resolutions, lhss),
        "killing_flux": richardson_series("killing_flux", resolutions, fluxes, exact=0.0),
    }
    return ConvergenceReport(series, tail)


def parallel_map(fn: Callable, items: Sequence, threads: int = 1) -> list:
    if threads <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
