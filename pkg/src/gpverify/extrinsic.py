"""Extrinsic geometry of spacelike 2-surfaces in Schwarzschild.

Vectors are arrays with a trailing axis of 4 coordinate components
(t, r, theta, phi) and leading node axes matching the surface grid.
Sign conventions: the mean curvature vector is the trace of the normal part
of the second derivative, so it points inward on round spheres, and the
variation of area along a normal field V is ``-integral <H, V>``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import spacetime as st
from .mesh import SurfaceSample, integrate_scalar

FRAME_TOL = 1e-10


@dataclass(frozen=True)
class InducedMetric:
    g: np.ndarray
    inverse: np.ndarray
    det: np.ndarray

    @property
    def sqrt_det(self) -> np.ndarray:
        return np.sqrt(self.det)

    def inverse_residual(self) -> float:
        eye = np.einsum("...ab,...bc->...ac", self.inverse, self.g) - np.eye(2)
        return float(np.max(np.abs(eye)))


@dataclass(frozen=True)
class NormalFrame:
    """Orthonormal normal pair (e0, nu) and the null normals built from it."""

    e0: np.ndarray
    nu: np.ndarray
    L: np.ndarray
    Lbar: np.ndarray

    @classmethod
    def from_orthonormal(cls, e0: np.ndarray, nu: np.ndarray) -> "NormalFrame":
        return cls(e0, nu, e0 + nu, -e0 + nu)

    def rescaled(self, a) -> "NormalFrame":
        """Boost L -> a L, Lbar -> Lbar / a; keeps <L, Lbar> fixed."""
        a = np.asarray(a, dtype=float)[..., None]
        return NormalFrame(self.e0, self.nu, a * self.L, self.Lbar / a)


class DegenerateFrameError(ValueError):
    pass


def induced_metric(surface: SurfaceSample) -> InducedMetric:
    g = surface.induced_metric
    det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
    if np.any(det <= 0.0) or np.any(g[..., 0, 0] <= 0.0):
        idx = np.unravel_index(np.argmin(det), det.shape)
        raise st.DomainError(
            f"induced metric not SPD at node {idx}: eigenvalues "
            f"{np.linalg.eigvalsh(g[idx])}"
        )
    inv = np.empty_like(g)
    inv[..., 0, 0] = g[..., 1, 1] / det
    inv[..., 1, 1] = g[..., 0, 0] / det
    inv[..., 0, 1] = inv[..., 1, 0] = -g[..., 0, 1] / det
    return InducedMetric(g, inv, det)


def _cache(surface: SurfaceSample, key: str, build):
    if key not in surface.extras:
        surface.extras[key] = build()
    return surface.extras[key]


def _gmetric(surface: SurfaceSample) -> InducedMetric:
    return _cache(surface, "_induced", lambda: induced_metric(surface))


def tangential_coefficients(surface: SurfaceSample, vec: np.ndarray) -> np.ndarray:
    """c^a with vec^T = c^a dF_a."""
    G = surface.spacetime_metric
    pair = np.einsum("...i,...ij,...aj->...a", vec, G, surface.tangents)
    return np.einsum("...ab,...b->...a", _gmetric(surface).inverse, pair)


def normal_part(surface: SurfaceSample, vec: np.ndarray) -> np.ndarray:
    c = tangential_coefficients(surface, vec)
    return vec - np.einsum("...a,...ai->...i", c, surface.tangents)


def covariant_hessian(surface: SurfaceSample) -> np.ndarray:
    """D_a dF_b as spacetime vectors, shape (..., 2, 2, 4)."""
    gam = st.christoffel(surface.r, surface.theta, surface.m)
    df = surface.tangents
    return surface.second_derivatives + np.einsum("...mij,...ai,...bj->...abm", gam, df, df)


def mean_curvature_vector(surface: SurfaceSample) -> np.ndarray:
    def build():
        hess = covariant_hessian(surface)
        trace = np.einsum("...ab,...abm->...m", _gmetric(surface).inverse, hess)
        return normal_part(surface, trace)

    return _cache(surface, "_H", build)


def second_fundamental_form(surface: SurfaceSample, normal: np.ndarray) -> np.ndarray:
    """h_ab = -<D_a dF_b, n>; positive on round spheres for the outward normal."""
    G = surface.spacetime_metric
    return -np.einsum("...abi,...ij,...j->...ab", covariant_hessian(surface), G, normal)


def _unit(G, v, sign_target):
    norm2 = st.dot(G, v, v)
    if np.any(np.sign(norm2) != sign_target) or np.any(np.abs(norm2) < 1e-300):
        raise DegenerateFrameError("normal space is degenerate; surface not spacelike")
    return v / np.sqrt(np.abs(norm2))[..., None]


def _basis_vector(surface: SurfaceSample, index: int) -> np.ndarray:
    v = np.zeros(surface.grid.shape + (4,))
    v[..., index] = 1.0
    return v


def null_frame(surface: SurfaceSample, seed: tuple[str, np.ndarray] | None = None) -> NormalFrame:
    """Orthonormal normal frame by Gram-Schmidt, then L = e0 + nu, Lbar = -e0 + nu.

    The timelike leg is seeded with d/dt and the spacelike leg with d/dr unless
    ``seed`` (or the surface's own ``frame_seed``) supplies one of them. The
    outward side is the one with <nu, d/dr> > 0.
    """
    G = surface.spacetime_metric
    seed = seed if seed is not None else surface.frame_seed
    dt = _basis_vector(surface, st.T)
    dr = _basis_vector(surface, st.R)

    if seed is not None and seed[0] == "nu":
        nu = _unit(G, normal_part(surface, seed[1]), 1.0)
        nu = nu * np.sign(st.dot(G, nu, dr))[..., None]
        e0 = normal_part(surface, dt)
        e0 = e0 - st.dot(G, e0, nu)[..., None] * nu
        e0 = _unit(G, e0, -1.0)
    else:
        start = dt if seed is None else seed[1]
        e0 = _unit(G, normal_part(surface, start), -1.0)
        nu = normal_part(surface, dr)
        nu = nu + st.dot(G, nu, e0)[..., None] * e0
        nu = _unit(G, nu, 1.0)
        nu = nu * np.sign(st.dot(G, nu, dr))[..., None]
    # future-directed: <e0, d/dt> < 0
    e0 = e0 * -np.sign(st.dot(G, e0, dt))[..., None]
    return NormalFrame.from_orthonormal(e0, nu)


def frame_residuals(surface: SurfaceSample, frame: NormalFrame) -> dict[str, float]:
    G = surface.spacetime_metric
    df = surface.tangents
    ortho = max(
        float(np.max(np.abs(np.einsum("...i,...ij,...aj->...a", v, G, df))))
        for v in (frame.L, frame.Lbar)
    )
    return {
        "LL": float(np.max(np.abs(st.dot(G, frame.L, frame.L)))),
        "LbLb": float(np.max(np.abs(st.dot(G, frame.Lbar, frame.Lbar)))),
        "LLb_minus_2": float(np.max(np.abs(st.dot(G, frame.L, frame.Lbar) - 2.0))),
        "tangency": ortho,
    }


def dual_mean_curvature(surface: SurfaceSample, frame: NormalFrame | None = None) -> np.ndarray:
    """J = (<H, L> Lbar - <H, Lbar> L) / 2 for a frame with <L, Lbar> = 2."""
    frame = frame if frame is not None else null_frame(surface)
    G = surface.spacetime_metric
    norm = st.dot(G, frame.L, frame.Lbar)
    # strongly boosted frames (large lam) carry rounding of order |L||Lbar| eps
    scale = np.maximum(1.0, st.dot(np.abs(G), np.abs(frame.L), np.abs(frame.Lbar)))
    if np.max(np.abs(norm - 2.0) / scale) > FRAME_TOL:
        raise ValueError("null frame violates <L, Lbar> = 2")
    H = mean_curvature_vector(surface)
    hl = st.dot(G, H, frame.L)[..., None]
    hlb = st.dot(G, H, frame.Lbar)[..., None]
    return 0.5 * (hl * frame.Lbar - hlb * frame.L)


def gauge_frame(surface: SurfaceSample, frame: NormalFrame, gauge: np.ndarray) -> NormalFrame:
    """Rescale the frame so that <Lbar, gauge> = 1."""
    G = surface.spacetime_metric
    if np.any(st.dot(G, gauge, gauge) >= 0.0):
        raise ValueError("gauge vector is not timelike at every node")
    a = st.dot(G, frame.Lbar, gauge)
    return frame.rescaled(a)


def null_expansion(
    surface: SurfaceSample, frame: NormalFrame | None = None, gauge: np.ndarray | None = None
) -> np.ndarray:
    """Future outward expansion -<H, L> in the gauge <Lbar, gauge> = 1 (default d/dt)."""
    frame = frame if frame is not None else null_frame(surface)
    gauge = gauge if gauge is not None else _basis_vector(surface, st.T)
    fr = gauge_frame(surface, frame, gauge)
    H = mean_curvature_vector(surface)
    return -st.dot(surface.spacetime_metric, H, fr.L)


def past_expansion(
    surface: SurfaceSample, frame: NormalFrame | None = None, gauge: np.ndarray | None = None
) -> np.ndarray:
    """-<H, Lbar> in the same gauge as null_expansion."""
    frame = frame if frame is not None else null_frame(surface)
    gauge = gauge if gauge is not None else _basis_vector(surface, st.T)
    fr = gauge_frame(surface, frame, gauge)
    H = mean_curvature_vector(surface)
    return -st.dot(surface.spacetime_metric, H, fr.Lbar)


def killing_flux(surface: SurfaceSample, killing: np.ndarray | None = None) -> float:
    """Integral of <H, K> over the surface, K = d/dt unless given."""
    K = killing if killing is not None else _basis_vector(surface, st.T)
    H = mean_curvature_vector(surface)
    return integrate_scalar(surface, st.dot(surface.spacetime_metric, H, K))


def mean_curvature_norm_integral(surface: SurfaceSample) -> float:
    H = mean_curvature_vector(surface)
    return integrate_scalar(surface, np.sqrt(np.abs(st.dot(surface.spacetime_metric, H, H))))


def j_identity_residuals(surface: SurfaceSample, frame: NormalFrame | None = None) -> dict[str, float]:
    """Pointwise <J, H> = 0 and <J, J> + <H, H> = 0, scaled by max |<H, H>|."""
    G = surface.spacetime_metric
    H = mean_curvature_vector(surface)
    J = dual_mean_curvature(surface, frame)
    hh = st.dot(G, H, H)
    scale = max(1.0, float(np.max(np.abs(hh))))
    normal_J = normal_part(surface, J) - J
    return {
        "JH": float(np.max(np.abs(st.dot(G, J, H)))) / scale,
        "JJ_plus_HH": float(np.max(np.abs(st.dot(G, J, J) + hh))) / scale,
        "J_normal": float(np.max(np.abs(normal_J)) / np.sqrt(scale)),
    }


@dataclass(frozen=True)
class ExtrinsicField:
    H: np.ndarray
    J: np.ndarray
    frame: NormalFrame
    theta_plus: np.ndarray
    II: np.ndarray


def extrinsic_field(surface: SurfaceSample, gauge: np.ndarray | None = None) -> ExtrinsicField:
    frame = null_frame(surface)
    ii = np.stack(
        [second_fundamental_form(surface, frame.e0), second_fundamental_form(surface, frame.nu)],
        axis=-3,
    )
    return ExtrinsicField(
        H=mean_curvature_vector(surface),
        J=dual_mean_curvature(surface, frame),
        frame=frame,
        theta_plus=null_expansion(surface, frame, gauge),
        II=ii,
    )


# ---------------------------------------------------------------------------
# the spherically symmetric umbilical slice t = rho(r)


def umbilical_normal(r, m, lam) -> np.ndarray:
    """Future unit normal (f/b) d/dt + lam r d/dr of the slice t = rho_lam(r)."""
    r = np.asarray(r, dtype=float)
    b = st.lapse_squared(r, m)
    f = st.static_potential(r, m, lam)
    out = np.zeros(r.shape + (4,))
    out[..., st.T] = f / b
    out[..., st.R] = lam * r
    return out


def hypersurface_second_form(m: float, lam: float, s: float, theta: float = np.pi / 3) -> np.ndarray:
    """Second fundamental form <D_{e_i} e0, e_j> of the umbilical slice in the
    adapted orthonormal frame (e1 radial, e2, e3 angular), as a 3x3 matrix."""
    if s <= 2.0 * m:
        raise st.DomainError(f"s = {s} is not outside the horizon 2m = {2 * m}")
    b = 1.0 - 2.0 * m / s
    f = st.static_potential(s, m, lam)
    db = 2.0 * m / s**2
    df = (m / s**2 + lam**2 * s) / f
    rho_p = lam * s / (b * f)

    e0 = np.array([f / b, lam * s, 0.0, 0.0])
    de0_dr = np.array([df / b - f * db / b**2, lam, 0.0, 0.0])
    frame = np.array(
        [
            [f * rho_p, f, 0.0, 0.0],
            [0.0, 0.0, 1.0 / s, 0.0],
            [0.0, 0.0, 0.0, 1.0 / (s * np.sin(theta))],
        ]
    )
    gam = st.christoffel(s, theta, m)
    g = st.metric_components(s, theta, m)
    out = np.empty((3, 3))
    for i, X in enumerate(frame):
        D = X[st.R] * de0_dr + np.einsum("mab,a,b->m", gam, X, e0)
        for j, Y in enumerate(frame):
            out[i, j] = D @ g @ Y
    return out


def hypersurface_second_form_diagonal(m, lam, s) -> tuple[float, float, float]:
    p = hypersurface_second_form(m, lam, s)
    return float(p[0, 0]), float(p[1, 1]), float(p[2, 2])
