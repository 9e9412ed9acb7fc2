import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from smms.grid import RadialGrid
from smms.warped_smms import (
    INF,
    QeSolveError,
    RadialProfile,
    SingularPointError,
    WarpedSmms,
    build_model,
    curvature_at,
    curvature_profile,
    custom_grid_model,
    euclidean_model,
    gaussian_limit_gap,
    gaussian_model,
    hyperbolic_gaussian_model,
    hyperbolic_scale_potential,
    kim_kim_mu,
    load_model_config,
    parse_dim,
    profile_table,
    qe_residual,
    qe_scale_residual,
    solve_qe_ode,
    sphere_area,
    sphere_model,
    weighted_volume,
)


def test_parse_dim():
    assert parse_dim("inf") == INF
    assert parse_dim(" Infinity ") == INF
    assert parse_dim("2.5") == 2.5
    assert parse_dim(0) == 0.0
    with pytest.raises(ValueError):
        parse_dim(-1)
    with pytest.raises(ValueError):
        parse_dim("nan")


def test_sphere_area():
    assert sphere_area(1) == pytest.approx(2 * math.pi)
    assert sphere_area(2) == pytest.approx(4 * math.pi)
    assert sphere_area(3) == pytest.approx(2 * math.pi**2)


def test_model_invariants():
    with pytest.raises(ValueError):
        euclidean_model(2, 1)
    with pytest.raises(ValueError):
        WarpedSmms(4, gaussian_model(4, 2).psi, INF, gaussian_model(4, 2).density, "v")
    with pytest.raises(ValueError):
        custom_grid_model(4, 2, np.linspace(0, 1, 65), np.linspace(0, 1, 65))


@pytest.mark.parametrize("m", [0, 1.5, 2, 7])
@pytest.mark.parametrize("n", [3, 4, 6])
def test_normalized_sphere_ricci(n, m):
    s = sphere_model(n, m)
    for r in (0.3, 1.7, 4.0):
        c = curvature_at(s, r)
        expected = (n - 1) / (m + n - 1)
        assert c.Ric_rad == pytest.approx(expected, abs=1e-12)
        assert c.Ric_sph == pytest.approx(expected, abs=1e-12)


def test_euclidean_flat():
    for m in (0, 2, INF):
        c = curvature_at(euclidean_model(4, m), 0.4)
        for value in (c.K_rad, c.K_sph, c.R, c.Ricphi_rad, c.Ricphi_sph, c.Rphi):
            assert value == pytest.approx(0.0, abs=1e-14)


@pytest.mark.parametrize("m,n", [(2, 3), (3, 4), (10, 5)])
def test_hyperbolic_sectional(m, n):
    s = hyperbolic_gaussian_model(n, m)
    for r in (0.1, 1.0, 2.9):
        c = curvature_at(s, r)
        assert c.K_rad == pytest.approx(-1 / (m + n - 1), abs=1e-12)
        assert c.K_sph == pytest.approx(-1 / (m + n - 1), abs=1e-12)


def test_singular_point():
    s = sphere_model(4, 2)
    with pytest.raises(SingularPointError):
        curvature_at(s, 0.0)
    with pytest.raises(SingularPointError):
        curvature_at(gaussian_model(4, 2), gaussian_model(4, 2).r1)
    with pytest.raises(ValueError):
        curvature_at(s, -1.0)


@given(m=st.floats(0, 50), r=st.floats(0.05, 3.0))
@settings(max_examples=60, deadline=None)
def test_trivial_density_reduces(m, r):
    s = sphere_model(4, 2, radius=1.3)
    s = WarpedSmms(4, s.psi, m, RadialProfile.constant(1.0, s.r0, s.r1), "v")
    c = curvature_at(s, r)
    assert c.Ricphi_rad == pytest.approx(c.Ric_rad, abs=1e-12)
    assert c.Ricphi_sph == pytest.approx(c.Ric_sph, abs=1e-12)
    assert c.Rphi == pytest.approx(c.R, abs=1e-12)


def _bumpy_model(n, m, density="v"):
    psi = RadialProfile.closed_form(
        lambda r: np.sin(r) * (1 + 0.1 * np.cos(r)),
        lambda r: np.cos(r) * (1 + 0.1 * np.cos(r)) - 0.1 * np.sin(r) ** 2,
        lambda r: -np.sin(r) * (1 + 0.1 * np.cos(r)) - 0.3 * np.sin(r) * np.cos(r),
        0.0, math.pi)
    phi = RadialProfile.closed_form(
        lambda r: 0.4 * np.cos(r) + 0.1 * np.cos(2 * r),
        lambda r: -0.4 * np.sin(r) - 0.2 * np.sin(2 * r),
        lambda r: -0.4 * np.cos(r) - 0.4 * np.cos(2 * r),
        0.0, math.pi)
    if density == "phi":
        return WarpedSmms(n, psi, m, phi, "phi")
    v = RadialProfile.closed_form(
        lambda r: np.exp(-phi(r) / m),
        lambda r: -phi.d1(r) / m * np.exp(-phi(r) / m),
        lambda r: ((phi.d1(r) / m) ** 2 - phi.d2(r) / m) * np.exp(-phi(r) / m),
        0.0, math.pi)
    return WarpedSmms(n, psi, m, v, "v")


@given(m=st.floats(0.5, 30), r=st.floats(0.1, 3.0))
@settings(max_examples=50, deadline=None)
def test_phi_and_v_forms_agree(m, r):
    a = curvature_at(_bumpy_model(4, m, "v"), r)
    b = curvature_at(_bumpy_model(4, m, "phi"), r)
    for key in ("Ricphi_rad", "Ricphi_sph", "Rphi"):
        assert getattr(a, key) == pytest.approx(getattr(b, key), rel=1e-10, abs=1e-10)


def test_large_m_approaches_infinite_formulas():
    base = _bumpy_model(4, 2.0, "phi")
    limit = curvature_at(base.with_m(INF), 1.1)
    gaps = []
    for m in (100, 200, 400):
        c = curvature_at(base.with_m(m), 1.1)
        gaps.append(abs(c.Rphi - limit.Rphi))
    assert gaps[1] / gaps[0] == pytest.approx(0.5, abs=0.01)
    assert gaps[2] / gaps[1] == pytest.approx(0.5, abs=0.01)


def test_curvature_matches_finite_differences():
    # grid-sampled psi and v: derivatives come from finite differences only
    errors = []
    for npts in (129, 257, 513):
        r = np.linspace(0, math.pi, npts)
        exact = _bumpy_model(4, 3.0)
        sampled = custom_grid_model(4, 3.0, r, exact.psi(r), v=exact.density(r))
        inner = (r > 0.5) & (r < 2.5)
        a = curvature_profile(exact, RadialGrid(0, math.pi, npts))
        b = curvature_profile(sampled, RadialGrid(0, math.pi, npts))
        errors.append(max(np.max(np.abs(a.channels[k][inner] - b.channels[k][inner]))
                          for k in ("K_rad", "K_sph", "Ricphi_rad", "Ricphi_sph", "Rphi")))
    assert errors[-1] < 1e-6
    assert errors[0] / errors[1] > 4 and errors[1] / errors[2] > 4


@pytest.mark.parametrize("m", [2, 5, 100])
@pytest.mark.parametrize("n", [3, 4, 5])
def test_gaussian_is_quasi_einstein(n, m):
    s = gaussian_model(n, m)
    assert max(qe_residual(s, 1.0)) < 1e-10
    mu = kim_kim_mu(s, 1.0)
    mu = mu[~np.isnan(mu)]
    assert np.max(np.abs(mu - (m - 1) / (m + n - 1))) < 1e-10
    assert s.mu == pytest.approx((m - 1) / (m + n - 1))


def test_infinite_gaussian():
    s = gaussian_model(4, INF)
    assert max(qe_residual(s, 1.0)) < 1e-14
    dmu = kim_kim_mu(s, 1.0)
    assert np.nanmax(np.abs(dmu)) < 1e-12


def test_sphere_einstein_constants():
    n, m = 4, 2
    s = sphere_model(n, m, radius=1.0)
    assert max(qe_residual(s, 3.0)) < 1e-11
    assert kim_kim_mu(s, 3.0, 1.0) == pytest.approx(3.0, abs=1e-12)
    s = sphere_model(n, m)
    lam = (n - 1) / (m + n - 1)
    assert max(qe_residual(s, lam)) < 1e-12


def test_kim_kim_negative_control_and_guards():
    s = _bumpy_model(4, 3.0)
    mu = kim_kim_mu(s, 1.0)
    assert np.nanmax(mu) - np.nanmin(mu) > 1e-2
    with pytest.raises(ValueError):
        kim_kim_mu(sphere_model(4, 0), 1.0)


def test_qe_scale_residuals():
    s = hyperbolic_gaussian_model(4, 3)
    assert max(qe_scale_residual(s, s.scale, 1.0)) < 1e-9
    sphere = sphere_model(4, 2)
    one = RadialProfile.constant(1.0, sphere.r0, sphere.r1)
    # zero up to cancellation in 1 - psi'^2 next to the poles
    assert max(qe_scale_residual(sphere, one, sphere.qe_constant)) < 1e-10
    k = math.sqrt(6)
    shifted = RadialProfile.closed_form(lambda r: np.cosh(r / k) + 0.1, s.scale.d1, s.scale.d2,
                                        s.r0, s.r1)
    assert max(qe_scale_residual(s, shifted, 1.0)) > 1e-2


def test_hyperbolic_potential_solves_qe_equation():
    n, m = 4, 3
    k = math.sqrt(m + n - 1)
    r = np.linspace(0.1, 3, 50)
    f, df, d2f = hyperbolic_scale_potential(n, m, r)
    ric = -(n - 1) / k**2
    mu = (m - 1) / k**2
    assert np.allclose(ric + d2f + df**2 / (m + n - 2), mu, atol=1e-13)
    assert np.allclose(ric + df / (k * np.tanh(r / k)), mu, atol=1e-13)


def test_solve_qe_recovers_hyperbolic():
    n, m = 4, 3
    k = math.sqrt(m + n - 1)
    sol = solve_qe_ode(n, m, (m - 1) / k**2, (m + n - 2) / k**2, r_max=3.0)
    r = np.linspace(0, 3, 301)
    assert np.max(np.abs(sol.model.psi(r) - k * np.sinh(r / k))) < 1e-8
    assert np.max(np.abs(sol.f(r) - hyperbolic_scale_potential(n, m, r)[0])) < 1e-8
    assert sol.lam == pytest.approx(1.0, abs=1e-12)


def test_solve_qe_closed_is_sphere():
    n, m, mu = 4, 3, 1 / 3
    sol = solve_qe_ode(n, m, mu, closed=True)
    radius = math.sqrt((n - 1) / mu)
    assert sol.model.closed
    assert sol.r_end == pytest.approx(math.pi * radius, abs=1e-8)
    r = np.linspace(0, sol.r_end, 201)
    assert np.max(np.abs(sol.model.psi(r) - radius * np.sin(r / radius))) < 1e-8
    assert sol.lam > 0 and sol.mu > 0
    with pytest.raises(QeSolveError):
        solve_qe_ode(n, m, -0.2, closed=True)


@pytest.mark.parametrize("b", [0.2, 0.5, 1.2])
def test_solve_qe_open_feeds_back(b):
    sol = solve_qe_ode(4, 3, 1 / 3, b, r_max=2.5)
    assert max(qe_scale_residual(sol.model, sol.u, sol.lam)) < 1e-7


def test_solve_qe_guards():
    with pytest.raises(ValueError):
        solve_qe_ode(4, 1, 0.1, 0.1)
    with pytest.raises(ValueError):
        solve_qe_ode(4, INF, 0.1, 0.1)


def test_weighted_volume_unit_sphere():
    s = sphere_model(4, 2, radius=1.0)
    assert weighted_volume(s) == pytest.approx(8 * math.pi**2 / 3, rel=1e-9)
    g = gaussian_model(4, 3)
    assert weighted_volume(g, offset=-3) == pytest.approx(
        sphere_area(3) * 6**2 * (2 / 3), rel=1e-9)  # hemisphere of radius sqrt(6)


def test_weighted_volume_fourth_order():
    s = sphere_model(4, 2, radius=1.0)
    exact = 8 * math.pi**2 / 3
    errs = [abs(weighted_volume(s, npts=N) - exact) for N in (257, 513, 1025)]
    for a, b in zip(errs, errs[1:]):
        assert 14 < a / b < 18


def test_gaussian_limit_gap_leading_rate():
    gaps = [gaussian_limit_gap(4, m) for m in (100, 200, 400)]
    assert gaps[0] > gaps[1] > gaps[2]
    assert gaps[1] / gaps[0] == pytest.approx((100 + 3) / (200 + 3), abs=1e-3)


def test_config_and_profile(tmp_path):
    path = tmp_path / "model.json"
    path.write_text(json.dumps({"family": "gaussian", "n": 4, "m": "inf", "N": 129}))
    model, npts = load_model_config(path)
    assert math.isinf(model.m) and npts == 129
    with pytest.raises(ValueError):
        build_model("torus", 4, 2)
    table = profile_table(gaussian_model(4, 5), 129)
    assert list(table) == ["r", "psi", "v", "f", "K_rad", "K_sph", "R", "Rphi"]
    assert np.all(np.isfinite(table["K_sph"]))
    assert np.isnan(table["Rphi"][-1])
    flat = profile_table(euclidean_model(4, 2), 65)
    for key in ("K_rad", "K_sph", "R", "Rphi"):
        assert np.allclose(flat[key], 0.0)
