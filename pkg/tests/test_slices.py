import math

import mpmath
import numpy as np
import pytest
import sympy as sp
from hypothesis import given, settings, strategies as hs

from gpverify import slices as sl
from gpverify import spacetime as st
from gpverify.mesh import ConstantProfile, EllipsoidProfile, HarmonicProfile, surface_area


def test_s0_root_unit_case():
    assert sl.s0_root(1.0, 1.0) == pytest.approx(1.0, abs=1e-15)


@settings(max_examples=50, deadline=None)
@given(m=hs.floats(1e-3, 10), lam=hs.floats(1e-2, 50))
def test_s0_root_matches_mpmath(m, lam):
    ref = mpmath.findroot(lambda s: lam**2 * s**3 + s - 2 * m, 2 * m / (1 + 4 * lam**2 * m**2) ** 0.5)
    assert sl.s0_root(m, lam) == pytest.approx(float(ref), rel=1e-12)


def test_s0_root_degenerate_inputs():
    assert sl.s0_root(0.0, 1.0) == 0.0
    with pytest.raises(ValueError):
        sl.s0_root(1.0, 0.0)


@pytest.mark.parametrize("m,lam", [(1.0, 1.0), (0.5, 2.0), (1.0, 30.0)])
def test_rho_table_against_mpmath_quadrature(m, lam):
    table = sl.solve_rho_lambda(m, lam, 2 * m * 1.01, 40 * m)
    for s in [2.1 * m, 3 * m, 7 * m, 35 * m]:
        ref = 4 * m + float(mpmath.quad(lambda x: float(sl.rho_rhs(float(x), m, lam)), [4 * m, s]))
        assert float(table(s)) == pytest.approx(ref, rel=1e-11, abs=1e-11)


def test_rho_table_derivative_matches_rhs():
    table = sl.solve_rho_lambda(1.0, 1.0, 2.02, 50.0)
    s = np.random.default_rng(0).uniform(2.02, 50.0, 500)
    err = np.abs(table.derivative(s) - sl.rho_rhs(s, 1.0, 1.0)) / np.abs(sl.rho_rhs(s, 1.0, 1.0))
    assert np.max(err) < 1e-10


def test_rho_table_gauss_and_dop853_agree():
    a = sl.solve_rho_lambda(1.0, 3.0, 2.05, 30.0, n_samples=400)
    b = sl.solve_rho_lambda(1.0, 3.0, 2.05, 30.0, n_samples=400, method="dop853")
    assert np.max(np.abs(a.values - b.values)) < 1e-9


def test_rho_table_range_and_anchor():
    table = sl.solve_rho_lambda(1.0, 1.0, 2.5, 10.0)
    assert float(table(4.0)) == pytest.approx(4.0, abs=1e-14)
    with pytest.raises(st.DomainError):
        table(11.0)
    with pytest.raises(st.DomainError):
        sl.solve_rho_lambda(1.0, 1.0, 2.0, 10.0)
    with pytest.raises(ValueError):
        sl.solve_rho_lambda(1.0, 1.0, 5.0, 10.0)


def test_rho_approaches_tortoise_for_large_lambda():
    s = np.linspace(2.5, 20, 50)
    diffs = [np.max(np.abs(sl.rho_rhs(s, 1.0, lam) - 1 / (1 - 2 / s))) for lam in (1, 10, 100)]
    assert diffs[0] > diffs[1] > diffs[2]


def test_divergence_identity_against_sympy():
    s, m, lam = sp.symbols("s m lam", positive=True)
    f = sp.sqrt(1 - 2 * m / s + lam**2 * s**2)
    vol = s**2 / f
    div = sp.diff(vol * s * f, s) / vol
    fn = sp.lambdify((s, m, lam), sp.simplify(div - 3 * f), "numpy")
    rng = np.random.default_rng(5)
    for _ in range(20):
        mm, ll = rng.uniform(0.1, 3), rng.uniform(0.1, 3)
        x = sl.s0_root(mm, ll) + rng.uniform(0.01, 10, 50)
        assert np.max(np.abs(fn(x, mm, ll))) < 1e-12
        assert np.max(np.abs(sl.conformal_killing_divergence(x, mm, ll))) < 1e-12


def test_divergence_rejects_inside_horizon():
    with pytest.raises(st.DomainError):
        sl.conformal_killing_divergence(np.array([0.5]), 1.0, 1.0)


@pytest.mark.parametrize("m,lam", [(1.0, 1.0), (0.5, 2.0), (2.0, 0.3)])
def test_horizon_flux_by_extrapolation(m, lam):
    exact = sl.horizon_flux(m, lam)
    assert sl.horizon_flux_extrapolated(m, lam) == pytest.approx(exact, rel=1e-10)


def test_umbilical_isometry_and_null_generators():
    rng = np.random.default_rng(2)
    s = 2.0 + rng.uniform(0.01, 20, 300)
    th = rng.uniform(0.1, 3.0, 300)
    assert sl.umbilical_isometry_residual(s, th, 1.0, 1.5) < 1e-13
    assert sl.null_generator_residual(s, 1.0) < 1e-13


def test_surface_spec_validation_and_round_trip():
    spec = sl.SurfaceSpec("UmbilicalSlice", 1.0, u={"kind": "constant", "value": 3.0}, lam=2.0)
    assert sl.SurfaceSpec.from_dict(spec.to_dict()) == spec
    with pytest.raises(ValueError, match="requires 'lam'"):
        sl.SurfaceSpec("UmbilicalSlice", 1.0, u=3.0)
    with pytest.raises(ValueError, match="does not take 'tau'"):
        sl.SurfaceSpec("StaticSlice", 1.0, u=3.0, tau=0.0)
    with pytest.raises(ValueError):
        sl.SurfaceSpec("StaticSlice", -1.0, u=3.0)
    with pytest.raises(ValueError):
        sl.SurfaceSpec("Hyperboloid", 1.0, u=3.0)


def test_builders_on_symmetry_spheres(grid16):
    u = ConstantProfile(5.0)
    stat = sl.build_static_slice(u, 1.0, grid16)
    assert np.all(stat.t == 0)
    umb = sl.build_umbilical_slice(u, 1.0, 1.0, grid16)
    table = sl.solve_rho_lambda(1.0, 1.0, 2.5, 10.0)
    assert np.allclose(umb.t, float(table(5.0)), atol=1e-12)
    cone = sl.build_null_cone(u, 1.0, grid16)
    assert np.allclose(cone.t, 5.0 + 2.0 * math.log(1.5), atol=1e-14)
    with pytest.raises(st.DomainError):
        sl.build_static_slice(ConstantProfile(1.9), 1.0, grid16)


def test_convex_static_gate_photon_sphere(grid16):
    assert sl.convex_static_check(4.0, 1.0, grid16).passed
    assert not sl.convex_static_check(2.5, 1.0, grid16).passed
    at_three = sl.convex_static_check(3.0, 1.0, grid16)
    assert at_three.passed and abs(at_three.margin) < 1e-12


def test_convex_static_gate_is_convexity_at_zero_mass(grid32):
    assert sl.convex_static_check(EllipsoidProfile((1.0, 1.5, 2.0)), 0.0, grid32).passed
    dimpled = HarmonicProfile(1.0, ((4, 0, 0.25),), relative=True)
    assert not sl.convex_static_check(dimpled, 0.0, grid32).passed


def test_convex_static_builder_rejects_rough_time_profile(grid16):
    rough = HarmonicProfile(0.0, ((14, 3, 0.5),))
    with pytest.raises(sl.GateError, match="under-resolved"):
        sl.build_convex_static(5.0, rough, 1.0, grid16)
    with pytest.raises(sl.GateError):
        sl.build_convex_static(2.5, 0.0, 1.0, grid16)


def test_projection_relations(grid32):
    sigma = HarmonicProfile(5.0, ((2, 1, 0.04), (3, -2, 0.03)), relative=True)
    tau = HarmonicProfile(0.0, ((1, 0, 0.5), (2, 2, 0.3)))
    surf = sl.build_convex_static(sigma, tau, 1.0, grid32)
    proj, rep = sl.project_surface(surf)
    assert max(rep.metric, rep.inverse_metric, rep.volume_element) < 1e-13
    assert rep.area_monotone and rep.area_projected > rep.area
    assert surface_area(proj) == pytest.approx(rep.area_projected)
    pw = sl.projection_pointwise_identity(surf)
    assert pw.j_identity < 1e-12 and pw.mean_curvature_relation < 1e-12
    assert pw.min_mean_curvature_excess >= -1e-12


def test_level_set_flux_approaches_horizon_value(grid16):
    m, lam = 1.0, 1.0
    s0 = sl.s0_root(m, lam)
    errs = [abs(sl.level_set_flux(s0 + e, m, lam, grid16) - sl.horizon_flux(m, lam)) for e in (1e-2, 5e-3)]
    assert errs[1] < errs[0]
