"""Spectral discretisation of closed star-shaped surfaces over S^2.

Nodes are Gauss-Legendre in cos(theta) times uniform in phi, so no node sits
on a pole. Scalar fields are ``(n_theta, n_phi)`` arrays. Derivatives are
taken per Fourier mode in phi: a smooth field's k-th mode has the form
``sin(theta)**(k % 2) * q(cos(theta))`` with q a polynomial, and q is
differentiated exactly with a barycentric matrix on the Gauss nodes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Sequence

import numpy as np
from numpy.polynomial import legendre
from scipy import special


@dataclass(frozen=True)
class ParameterGrid:
    n_theta: int
    n_phi: int
    x: np.ndarray = field(repr=False)
    theta_nodes: np.ndarray = field(repr=False)
    phi_nodes: np.ndarray = field(repr=False)
    weights: np.ndarray = field(repr=False)
    diff_matrix: np.ndarray = field(repr=False)

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_theta, self.n_phi)

    @property
    def size(self) -> int:
        return self.n_theta * self.n_phi

    @cached_property
    def theta(self) -> np.ndarray:
        return np.broadcast_to(self.theta_nodes[:, None], self.shape)

    @cached_property
    def phi(self) -> np.ndarray:
        return np.broadcast_to(self.phi_nodes[None, :], self.shape)

    def quadrature(self, values: np.ndarray) -> float:
        """Sum of values * weights (unit-sphere measure), compensated."""
        return math.fsum((np.asarray(values) * self.weights).ravel())


def _barycentric_diff_matrix(x: np.ndarray, gl_weights: np.ndarray) -> np.ndarray:
    # barycentric weights of Gauss-Legendre nodes: (-1)^j sqrt((1 - x_j^2) w_j)
    n = len(x)
    w = (-1.0) ** np.arange(n) * np.sqrt((1.0 - x**2) * gl_weights)
    dx = x[:, None] - x[None, :]
    np.fill_diagonal(dx, 1.0)
    d = (w[None, :] / w[:, None]) / dx
    np.fill_diagonal(d, 0.0)
    np.fill_diagonal(d, -d.sum(axis=1))
    return d


def build_grid(n_theta: int, n_phi: int) -> ParameterGrid:
    if n_theta < 8 or n_phi < 16:
        raise ValueError(f"grid {n_theta}x{n_phi} below the minimum 8x16")
    if n_phi % 2:
        raise ValueError("n_phi must be even")
    x, w = legendre.leggauss(n_theta)
    # order nodes by increasing theta, i.e. decreasing cos(theta)
    x, w = x[::-1].copy(), w[::-1].copy()
    theta = np.arccos(x)
    phi = 2.0 * np.pi * np.arange(n_phi) / n_phi
    weights = np.outer(w, np.full(n_phi, 2.0 * np.pi / n_phi))
    dmat = _barycentric_diff_matrix(x, w)
    return ParameterGrid(n_theta, n_phi, x, theta, phi, weights, dmat)


@dataclass(frozen=True)
class Partials:
    """First and second parameter derivatives of a scalar field."""

    value: np.ndarray
    d_theta: np.ndarray
    d_phi: np.ndarray
    d_theta_theta: np.ndarray
    d_theta_phi: np.ndarray
    d_phi_phi: np.ndarray

    @property
    def first(self) -> np.ndarray:
        return np.stack([self.d_theta, self.d_phi], axis=-1)

    @property
    def second(self) -> np.ndarray:
        out = np.empty(self.value.shape + (2, 2))
        out[..., 0, 0] = self.d_theta_theta
        out[..., 0, 1] = out[..., 1, 0] = self.d_theta_phi
        out[..., 1, 1] = self.d_phi_phi
        return out

    @classmethod
    def constant(cls, value: np.ndarray) -> "Partials":
        z = np.zeros_like(value)
        return cls(value, z, z, z, z, z)


def partials(values: np.ndarray, grid: ParameterGrid) -> Partials:
    """Spectral first and second derivatives of a node field."""
    f = np.asarray(values, dtype=float)
    if f.shape != grid.shape:
        raise ValueError(f"field shape {f.shape} does not match grid {grid.shape}")
    coeffs = np.fft.rfft(f, axis=1)
    k = np.arange(coeffs.shape[1])
    odd = (k % 2).astype(bool)
    s = np.sin(grid.theta_nodes)[:, None]
    x = grid.x[:, None]
    d = grid.diff_matrix

    q = np.where(odd, coeffs / s, coeffs)
    dq = d @ q
    ddq = d @ dq
    h_t = np.where(odd, x * q - s**2 * dq, -s * dq)
    h_tt = np.where(odd, -s * q - 3.0 * s * x * dq + s**3 * ddq, -x * dq + s**2 * ddq)

    ik = 1j * k.astype(float)
    nyquist = grid.n_phi // 2
    ik_first = ik.copy()
    ik_first[nyquist] = 0.0
    n = grid.n_phi
    return Partials(
        value=f,
        d_theta=np.fft.irfft(h_t, n=n, axis=1),
        d_phi=np.fft.irfft(ik_first * coeffs, n=n, axis=1),
        d_theta_theta=np.fft.irfft(h_tt, n=n, axis=1),
        d_theta_phi=np.fft.irfft(ik_first * h_t, n=n, axis=1),
        d_phi_phi=np.fft.irfft(-(k.astype(float) ** 2) * coeffs, n=n, axis=1),
    )


def differentiate(values: np.ndarray, grid: ParameterGrid) -> tuple[np.ndarray, np.ndarray]:
    p = partials(values, grid)
    return p.d_theta, p.d_phi


def spectral_tail_fraction(values: np.ndarray, grid: ParameterGrid) -> float:
    """Share of spectral energy in the top octave of either direction.

    Fourier modes above n_phi/4 and Legendre degrees of the reduced polynomial
    above n_theta/2 count as the top octave. The constant mode is left out of
    the total so a small perturbation of a large sphere is judged on its own.
    """
    f = np.asarray(values, dtype=float)
    coeffs = np.fft.rfft(f, axis=1) / grid.n_phi
    k = np.arange(coeffs.shape[1])
    s = np.sin(grid.theta_nodes)[:, None]
    q = np.where(k % 2 == 1, coeffs / s, coeffs)
    # Legendre analysis of q by Gauss quadrature
    w = grid.weights[:, 0] * grid.n_phi / (2.0 * np.pi)
    vander = legendre.legvander(grid.x, grid.n_theta - 1)
    norms = 2.0 / (2.0 * np.arange(grid.n_theta) + 1.0)
    lc = (vander * w[:, None]).T @ q / norms[:, None]
    energy = np.abs(lc) ** 2 * norms[:, None]
    mean_energy = energy[0, 0]
    energy[0, 0] = 0.0
    total = energy.sum()
    if total <= 1e-26 * mean_energy or total == 0.0:
        return 0.0
    deg = np.arange(grid.n_theta)[:, None]
    tail = (deg > grid.n_theta // 2) | (k[None, :] > grid.n_phi // 4)
    return float(energy[tail].sum() / total)


def real_sph_harm(l: int, m: int, theta, phi) -> np.ndarray:
    """Orthonormal real spherical harmonic Y_lm (m < 0 selects the sine branch)."""
    if abs(m) > l:
        raise ValueError(f"|m| = {abs(m)} exceeds l = {l}")
    theta = np.asarray(theta, dtype=float)
    phi = np.asarray(phi, dtype=float)
    y = special.sph_harm_y(l, abs(m), theta, phi)
    if m == 0:
        return y.real
    sign = (-1.0) ** m
    if m > 0:
        return np.sqrt(2.0) * sign * y.real
    return np.sqrt(2.0) * sign * y.imag


# ---------------------------------------------------------------------------
# profile catalogue


class Profile:
    """A scalar function on S^2 evaluated at grid nodes."""

    kind = "abstract"

    def evaluate(self, grid: ParameterGrid) -> np.ndarray:  # pragma: no cover
        raise NotImplementedError

    def to_dict(self) -> dict:  # pragma: no cover
        raise NotImplementedError


@dataclass(frozen=True)
class ConstantProfile(Profile):
    value: float
    kind = "constant"

    def evaluate(self, grid):
        return np.full(grid.shape, float(self.value))

    def to_dict(self):
        return {"kind": self.kind, "value": self.value}


@dataclass(frozen=True)
class HarmonicProfile(Profile):
    """base + sum c Y_lm, or base * (1 + sum c Y_lm) when ``relative``."""

    base: float
    terms: tuple[tuple[int, int, float], ...] = ()
    relative: bool = False
    kind = "harmonics"

    def evaluate(self, grid):
        pert = np.zeros(grid.shape)
        for l, m, c in self.terms:
            pert += c * real_sph_harm(int(l), int(m), grid.theta, grid.phi)
        if self.relative:
            return self.base * (1.0 + pert)
        return self.base + pert

    def to_dict(self):
        return {
            "kind": self.kind,
            "base": self.base,
            "terms": [[int(l), int(m), float(c)] for l, m, c in self.terms],
            "relative": self.relative,
        }


@dataclass(frozen=True)
class EllipsoidProfile(Profile):
    """Radial function of the ellipsoid with semi-axes (a, b, c) about the origin."""

    axes: tuple[float, float, float]
    kind = "ellipsoid"

    def evaluate(self, grid):
        a, b, c = self.axes
        st, ct = np.sin(grid.theta), np.cos(grid.theta)
        cp, sp = np.cos(grid.phi), np.sin(grid.phi)
        inv2 = (st * cp / a) ** 2 + (st * sp / b) ** 2 + (ct / c) ** 2
        return 1.0 / np.sqrt(inv2)

    def to_dict(self):
        return {"kind": self.kind, "axes": list(self.axes)}


@dataclass(frozen=True)
class TabulatedProfile(Profile):
    """Per-node values read from a text file whose header names the grid.

    File format: a first line ``# n_theta n_phi`` followed by n_theta rows of
    n_phi whitespace-separated numbers, rows ordered by increasing theta.
    """

    path: str
    kind = "tabulated"

    def evaluate(self, grid):
        values = load_tabulated(self.path)
        if values.shape != grid.shape:
            raise ValueError(
                f"tabulated grid {values.shape} in {self.path} does not match "
                f"requested resolution {grid.shape}"
            )
        return values

    def to_dict(self):
        return {"kind": self.kind, "path": self.path}


def load_tabulated(path: str | Path) -> np.ndarray:
    text = Path(path).read_text().splitlines()
    if not text or not text[0].startswith("#"):
        raise ValueError(f"{path}: missing '# n_theta n_phi' header")
    n_theta, n_phi = (int(v) for v in text[0][1:].split())
    values = np.loadtxt(text[1:], ndmin=2)
    if values.shape != (n_theta, n_phi):
        raise ValueError(f"{path}: header says {n_theta}x{n_phi}, body is {values.shape}")
    return values


def save_tabulated(path: str | Path, values: np.ndarray) -> None:
    values = np.asarray(values, dtype=float)
    header = f"{values.shape[0]} {values.shape[1]}"
    np.savetxt(path, values, header=header, comments="# ", fmt="%.17g")


def profile_from_dict(data: dict | float | int | Profile) -> Profile:
    if isinstance(data, Profile):
        return data
    if isinstance(data, (int, float)):
        return ConstantProfile(float(data))
    kind = data.get("kind")
    if kind == "constant":
        return ConstantProfile(float(data["value"]))
    if kind == "harmonics":
        terms = tuple((int(l), int(m), float(c)) for l, m, c in data.get("terms", []))
        return HarmonicProfile(float(data["base"]), terms, bool(data.get("relative", False)))
    if kind == "ellipsoid":
        return EllipsoidProfile(tuple(float(a) for a in data["axes"]))
    if kind == "tabulated":
        return TabulatedProfile(str(data["path"]))
    raise ValueError(f"unknown profile kind {kind!r}")


def evaluate_profile(profile, grid: ParameterGrid) -> np.ndarray:
    if isinstance(profile, np.ndarray):
        if profile.shape != grid.shape:
            raise ValueError("profile array does not match grid")
        return profile
    return profile_from_dict(profile).evaluate(grid)


# ---------------------------------------------------------------------------
# embedded surfaces


class NotSpacelikeError(ValueError):
    """The induced metric fails to be positive definite at some node."""


@dataclass
class SurfaceSample:
    """A spacelike graph t = T(theta, phi), r = R(theta, phi) sampled on a grid.

    ``time`` and ``radius`` carry the profile values with their first and
    second parameter derivatives. ``frame_seed`` optionally names a normal
    vector field ("e0" or "nu", array (..., 4)) that the null frame should
    start from; the builders set it to the hypersurface normal of their
    family.
    """

    grid: ParameterGrid
    time: Partials
    radius: Partials
    m: float
    spec: object = None
    frame_seed: tuple[str, np.ndarray] | None = None
    projected: "SurfaceSample | None" = None
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        from .spacetime import _check_exterior

        _check_exterior(self.radius.value, self.m)
        ev = self.induced_metric_eigenvalues
        if np.any(ev[..., 0] <= 0.0):
            idx = np.unravel_index(np.argmin(ev[..., 0]), ev.shape[:2])
            raise NotSpacelikeError(
                f"induced metric not positive definite at node {tuple(int(i) for i in idx)}: "
                f"eigenvalues {ev[idx]}"
            )

    @property
    def t(self) -> np.ndarray:
        return self.time.value

    @property
    def r(self) -> np.ndarray:
        return self.radius.value

    @property
    def theta(self) -> np.ndarray:
        return self.grid.theta

    @property
    def phi(self) -> np.ndarray:
        return self.grid.phi

    @cached_property
    def tangents(self) -> np.ndarray:
        """dF[..., a, mu] = d F^mu / d x_a with x = (theta, phi)."""
        out = np.zeros(self.grid.shape + (2, 4))
        out[..., :, 0] = self.time.first
        out[..., :, 1] = self.radius.first
        out[..., 0, 2] = 1.0
        out[..., 1, 3] = 1.0
        return out

    @cached_property
    def second_derivatives(self) -> np.ndarray:
        """ddF[..., a, b, mu]; the angular coordinates are linear in the chart."""
        out = np.zeros(self.grid.shape + (2, 2, 4))
        out[..., 0] = self.time.second
        out[..., 1] = self.radius.second
        return out

    @cached_property
    def spacetime_metric(self) -> np.ndarray:
        from .spacetime import metric_components

        return metric_components(self.r, self.theta, self.m)

    @cached_property
    def induced_metric(self) -> np.ndarray:
        df = self.tangents
        return np.einsum("...ai,...ij,...bj->...ab", df, self.spacetime_metric, df)

    @cached_property
    def induced_metric_eigenvalues(self) -> np.ndarray:
        return np.linalg.eigvalsh(self.induced_metric)

    @property
    def spacelike_margin(self) -> float:
        """Smallest induced-metric eigenvalue relative to the largest."""
        ev = self.induced_metric_eigenvalues
        return float(np.min(ev[..., 0] / ev[..., 1]))

    @cached_property
    def area_density(self) -> np.ndarray:
        """sqrt(det g_ab) / sin(theta): density against the grid weights."""
        g = self.induced_metric
        det = g[..., 0, 0] * g[..., 1, 1] - g[..., 0, 1] ** 2
        return np.sqrt(det) / np.sin(self.theta)


# ---------------------------------------------------------------------------
# integration over embedded surfaces


def integrate_scalar(surface, values) -> float:
    """Integral of a node field against the induced area element of ``surface``."""
    return surface.grid.quadrature(np.asarray(values) * surface.area_density)


def surface_area(surface) -> float:
    return integrate_scalar(surface, 1.0)


def embed_surface(spec, grid: ParameterGrid, m: float | None = None):
    """Build the SurfaceSample described by ``spec`` on ``grid``."""
    from .slices import build_from_spec

    return build_from_spec(spec, grid, m)


def resolution_sequence(start: Sequence[int], levels: int) -> list[tuple[int, int]]:
    nt, np_ = start
    return [(nt * 2**i, np_ * 2**i) for i in range(levels)]
