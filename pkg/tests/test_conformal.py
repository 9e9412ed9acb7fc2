import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smms.conformal import (
    conformal_change,
    conformal_change_inf,
    conformal_coefficient,
    covariance_residual,
    power,
    product,
    reparametrize,
    transformed_curvature,
    weighted_conformal_laplacian,
    weighted_conformal_laplacian_values,
)
from smms.grid import RadialGrid, derivative
from smms.warped_smms import (
    INF,
    RadialProfile,
    WarpedSmms,
    curvature_at,
    curvature_profile,
    gaussian_model,
    sphere_model,
)


def trig(a0, a1, kind="cos", r1=math.pi):
    """``a0 + a1 cos r`` or ``a0 + a1 sin r`` with exact derivatives."""
    if kind == "cos":
        return RadialProfile.closed_form(lambda r: a0 + a1 * np.cos(r), lambda r: -a1 * np.sin(r),
                                         lambda r: -a1 * np.cos(r), 0.0, r1)
    return RadialProfile.closed_form(lambda r: a0 + a1 * np.sin(r), lambda r: a1 * np.cos(r),
                                     lambda r: -a1 * np.sin(r), 0.0, r1)


def unit_sphere(n=4, m=2.0):
    return sphere_model(n, m, radius=1.0)


def test_identity_change():
    s = unit_sphere()
    same = conformal_change(s, trig(1.0, 0.0))
    r = np.linspace(0.1, 3.0, 30)
    assert same.r1 == pytest.approx(math.pi, abs=1e-12)
    assert np.allclose(same.psi(r), s.psi(r), atol=1e-12)
    assert np.allclose(same.density(r), 1.0)


def test_rejects_nonpositive_factor():
    with pytest.raises(ValueError):
        conformal_change(unit_sphere(), trig(0.2, 0.5))
    with pytest.raises(ValueError):
        conformal_change(gaussian_model(4, 3), gaussian_model(4, 3).density)


@pytest.mark.parametrize("m,n", [(3, 4), (2, 3), (10, 5)])
def test_gaussian_to_hyperbolic(m, n):
    g = gaussian_model(n, m)
    k = math.sqrt(m + n - 1)
    hyp = conformal_change(g, g.density, hat_r_max=3.0)
    for rh in (0.2, 1.0, 2.9):
        c = curvature_at(hyp, rh)
        assert c.K_rad == pytest.approx(-1 / k**2, abs=1e-8)
        assert c.K_sph == pytest.approx(-1 / k**2, abs=1e-8)
        assert hyp.density(rh) == pytest.approx(1.0, abs=1e-12)


def test_inverse_change_is_identity():
    s = unit_sphere()
    u = trig(1.0, 0.3)
    once = conformal_change(s, u)
    rep = reparametrize(s, u)
    back = conformal_change(once, power(rep.pull_back(u), -1.0))
    r = np.linspace(0.05, math.pi - 0.05, 40)
    assert back.r1 == pytest.approx(math.pi, abs=1e-10)
    assert np.max(np.abs(back.psi(r) - s.psi(r))) < 1e-9
    assert np.max(np.abs(back.psi.d2(r) - s.psi.d2(r))) < 1e-8


def test_group_law():
    s = unit_sphere()
    u1, u2 = trig(1.0, 0.3), trig(1.0, 0.2, "sin")
    first = conformal_change(s, u1)
    rep = reparametrize(s, u1)
    two_step = conformal_change(first, rep.pull_back(u2))
    direct = conformal_change(s, product(u1, u2))
    assert two_step.r1 == pytest.approx(direct.r1, rel=1e-10)
    rh = np.linspace(0.05, direct.r1 - 0.05, 40)
    assert np.max(np.abs(two_step.psi(rh) - direct.psi(rh))) < 1e-9
    assert np.max(np.abs(two_step.density(rh) - direct.density(rh))) < 1e-9


def test_transformed_curvature_trivial_factor():
    s = gaussian_model(4, 5)
    grid = RadialGrid(0, s.r1, 65)
    tc = transformed_curvature(s, RadialProfile.constant(1.0, s.r0, s.r1), grid)
    prof = curvature_profile(s, grid)
    ok = tc.regular
    assert np.allclose(tc.Rphi[ok], prof.Rphi[ok], atol=1e-12)
    assert np.allclose(tc.Ricphi_sph[ok], prof.Ricphi_sph[ok], atol=1e-12)
    assert np.allclose(tc.r_hat, tc.r, atol=1e-12)


def _dual_path(s, u, npts=65, hat_r_max=None):
    tc = transformed_curvature(s, u, RadialGrid(s.r0, s.r1, npts))
    changed = conformal_change(s, u, hat_r_max)
    ok = tc.regular & (tc.r_hat < changed.r1)
    worst = 0.0
    for r_hat, a, b, c in zip(tc.r_hat[ok], tc.Ricphi_rad[ok], tc.Ricphi_sph[ok], tc.Rphi[ok]):
        p = curvature_at(changed, r_hat)
        worst = max(worst, abs(p.Ricphi_rad - a), abs(p.Ricphi_sph - b), abs(p.Rphi - c))
    return worst


def test_transformed_curvature_gaussian_dual_path():
    g = gaussian_model(4, 3)
    assert _dual_path(g, g.density, hat_r_max=3.0) < 1e-7


@given(a=st.floats(-0.4, 0.4), b=st.floats(-0.3, 0.3))
@settings(max_examples=10, deadline=None)
def test_transformed_curvature_random_factor(a, b):
    s = unit_sphere(4, 2.0)
    u = RadialProfile.closed_form(
        lambda r: 1 + a * np.cos(r) + b * np.cos(2 * r),
        lambda r: -a * np.sin(r) - 2 * b * np.sin(2 * r),
        lambda r: -a * np.cos(r) - 4 * b * np.cos(2 * r),
        0.0, math.pi)
    if np.min(u(np.linspace(0, math.pi, 200))) < 0.2:
        return
    assert _dual_path(s, u) < 1e-7


def test_laplacian_of_constant_is_weighted_scalar():
    s = gaussian_model(4, 3)
    lw = weighted_conformal_laplacian(s, RadialProfile.constant(1.0, s.r0, s.r1), 129)
    prof = curvature_profile(s, RadialGrid(s.r0, s.r1, 129))
    ok = prof.regular
    assert np.allclose(lw(prof.r)[ok], prof.Rphi[ok], rtol=1e-12, atol=1e-12)


def test_conformal_coefficient():
    assert conformal_coefficient(0, 4) == pytest.approx(4 * 3 / 2)
    assert conformal_coefficient(0, 3) == pytest.approx(8.0)
    assert conformal_coefficient(INF, 4) == 4.0


def test_laplacian_against_finite_differences():
    s = unit_sphere(5, 1.5)
    phi = trig(0.0, 0.5)
    s = WarpedSmms(5, s.psi, 1.5, phi, "phi")
    w = trig(1.0, 0.3, "sin")
    r = np.linspace(0, math.pi, 2049)
    h = r[1] - r[0]
    wv = w(r)
    exact = weighted_conformal_laplacian_values(s, r, *w.sample(r))
    d1, d2 = derivative(wv, h, 1), derivative(wv, h, 2)
    inner = slice(200, -200)
    ri = r[inner]
    lap = d2[inner] + (4 * np.cos(ri) / np.sin(ri) + 0.5 * np.sin(ri)) * d1[inner]
    rphi = curvature_profile(s, RadialGrid(0, math.pi, 2049)).Rphi
    fd = -4 * (1.5 + 4) / (1.5 + 3) * lap + (rphi * wv)[inner]
    assert np.max(np.abs(fd - exact[inner])) < 1e-8


def test_covariance_trivial_factor():
    s = unit_sphere()
    assert covariance_residual(s, RadialProfile.constant(1.0, 0, math.pi), trig(1, 0.2, "sin")) == 0.0


def test_covariance_sphere_convergence():
    s = unit_sphere(4, 2.0)
    u, w = trig(1.0, 0.3), trig(1.0, 0.2, "sin")
    res = [covariance_residual(s, u, w, n) for n in (257, 513, 1025)]
    assert res[-1] < 1e-6
    assert math.log2(res[0] / res[1]) >= 2 and math.log2(res[1] / res[2]) >= 2


def test_scalar_curvature_transform_exponent():
    s = unit_sphere(4, 2.0)
    m, n = 2.0, 4
    u = trig(1.0, 0.3)
    grid = RadialGrid(0, math.pi, 129)
    r = grid.r
    tc = transformed_curvature(s, u, grid, with_r_hat=False)
    ok = tc.regular
    uu = u(r)
    covariant = uu ** ((m + n + 2) / 2) * weighted_conformal_laplacian_values(
        s, r, *power(u, -(m + n - 2) / 2).sample(r))
    flipped = uu ** ((m + n + 2) / 2) * weighted_conformal_laplacian_values(
        s, r, *power(u, -(m + n + 2) / 2).sample(r))
    assert np.max(np.abs(covariant[ok] - tc.Rphi[ok])) < 1e-11
    assert np.max(np.abs(flipped[ok] - tc.Rphi[ok])) > 1.0


def test_infinite_change_shifts_potential():
    g = gaussian_model(4, INF)
    f = RadialProfile.closed_form(lambda r: 0.1 * r**2, lambda r: 0.2 * r,
                                  lambda r: 0.2 + 0 * r, g.r0, g.r1)
    out = conformal_change_inf(g, f)
    assert curvature_at(out, 1.0).Ricphi_rad == pytest.approx(1.2)
    assert curvature_at(out, 1.0).K_sph == 0.0
