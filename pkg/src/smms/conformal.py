"""Conformal changes ``(u^-2 g, u^-(m+n) v^m dvol)`` of radial models.

After the change the radial coordinate is reparametrized to arclength,
``dr_hat = dr/u``, so the new model is again of the form
``dr_hat^2 + psi_hat^2 dtheta^2`` with ``psi_hat = psi/u`` and ``v_hat = v/u``.
Radial derivatives transform by ``d/dr_hat = u d/dr``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy.integrate import quad, solve_ivp

from .grid import DEFAULT_N, RadialGrid, derivative, extrapolate_ends
from .warped_smms import (
    SINGULAR_RTOL,
    RadialProfile,
    WarpedSmms,
    _curvature_arrays,
    curvature_profile,
    require_finite,
)


def conformal_coefficient(m: float, n: int) -> float:
    """``4(m+n-1)/(m+n-2)``, tending to 4 as m -> inf."""
    if math.isinf(m):
        return 4.0
    return 4.0 * (m + n - 1) / (m + n - 2)


def power(u: RadialProfile, p: float) -> RadialProfile:
    """``u^p`` with exact derivatives."""

    def data(r):
        uu, du, d2u = u.sample(r)
        y = uu**p
        return y, p * y * du / uu, p * y * (d2u / uu + (p - 1) * (du / uu) ** 2)

    return RadialProfile.closed_form(lambda r: data(r)[0], lambda r: data(r)[1],
                                     lambda r: data(r)[2], u.r0, u.r1)


def product(a: RadialProfile, b: RadialProfile) -> RadialProfile:
    def data(r):
        (x, dx, d2x), (y, dy, d2y) = a.sample(r), b.sample(r)
        return x * y, dx * y + x * dy, d2x * y + 2 * dx * dy + x * d2y

    return RadialProfile.closed_form(lambda r: data(r)[0], lambda r: data(r)[1],
                                     lambda r: data(r)[2], a.r0, a.r1)


def check_conformal_factor(u: RadialProfile, r0: float, r1: float, samples: int = 257) -> None:
    """Reject factors that are not strictly positive on the open interval."""
    probe = np.linspace(r0, r1, samples)[1:-1]
    values = np.asarray(u(probe), dtype=float)
    if not np.all(np.isfinite(values)) or np.any(values <= 0):
        raise ValueError("conformal factor must be strictly positive")


@dataclass(frozen=True)
class Reparametrization:
    """Arclength coordinate of ``u^-2 g``: ``old(r_hat)`` and ``new(r)``."""

    length: float
    old: Callable
    new: Callable
    factor: RadialProfile

    def pull_back(self, p: RadialProfile) -> RadialProfile:
        """Express a function of the old coordinate as a function of ``r_hat``."""
        u = self.factor

        def data(rh):
            t = self.old(rh)
            uu, du = u(t), u.d1(t)
            y, dy, d2y = p.sample(t)
            return y, uu * dy, uu * (du * dy + uu * d2y)

        return RadialProfile.closed_form(lambda rh: data(rh)[0], lambda rh: data(rh)[1],
                                         lambda rh: data(rh)[2], 0.0, self.length)


def reparametrize(s: WarpedSmms, u: RadialProfile, hat_r_max: float | None = None,
                  rtol: float = 1e-13, atol: float = 1e-14) -> Reparametrization:
    """Solve ``dr/dr_hat = u(r)``.

    When u vanishes at the far end the new metric is complete there and the
    new interval is infinite; ``hat_r_max`` then truncates it.
    """
    check_conformal_factor(u, s.r0, s.r1)
    ends = np.asarray(u(np.array([s.r0, s.r1])), dtype=float)
    floor = SINGULAR_RTOL * max(1.0, float(np.max(np.abs(u(np.linspace(s.r0, s.r1, 9))))))
    if hat_r_max is None:
        if not np.all(ends > floor):
            raise ValueError("factor vanishes at an end; pass hat_r_max to truncate")
        length, _ = quad(lambda t: 1.0 / float(u(t)), s.r0, s.r1, epsabs=1e-14, epsrel=1e-13,
                         limit=200)
    else:
        length = float(hat_r_max)

    def rhs(_, y):
        return [float(u(min(max(y[0], s.r0), s.r1)))]

    sol = solve_ivp(rhs, (0.0, length), [s.r0], method="DOP853", rtol=rtol, atol=atol,
                    dense_output=True)
    if not sol.success:
        raise RuntimeError(sol.message)
    if sol.y[0, -1] > s.r1 + 1e-9:
        raise ValueError("hat_r_max lies beyond the end of the model")
    dense = sol.sol

    def old(rh):
        rh = np.asarray(rh, dtype=float)
        return np.clip(dense(rh.ravel())[0].reshape(rh.shape), s.r0, s.r1)

    def new(r):
        r = np.atleast_1d(np.asarray(r, dtype=float))
        out = np.array([quad(lambda t: 1.0 / float(u(t)), s.r0, x, epsabs=1e-14,
                             epsrel=1e-13, limit=200)[0] for x in r.ravel()])
        return out.reshape(r.shape)

    return Reparametrization(length, old, new, u)


def _quotient(p: RadialProfile, u: RadialProfile, rep: Reparametrization) -> RadialProfile:
    """``p/u`` as a function of ``r_hat``."""

    def data(rh):
        t = rep.old(rh)
        return _quotient_data(*p.sample(t), *u.sample(t))

    return RadialProfile.closed_form(lambda rh: data(rh)[0], lambda rh: data(rh)[1],
                                     lambda rh: data(rh)[2], 0.0, rep.length)


def _shifted_potential(phi: RadialProfile, u: RadialProfile, m: float,
                       rep: Reparametrization) -> RadialProfile:
    """``phi + m log u`` as a function of ``r_hat`` (the potential of ``v/u``)."""

    def data(rh):
        t = rep.old(rh)
        uu, du, d2u = u.sample(t)
        y, dy, d2y = phi.sample(t)
        g = dy + m * du / uu
        d2 = uu * (d2y + m * (d2u / uu - (du / uu) ** 2))
        return y + m * np.log(uu), uu * g, d2

    return RadialProfile.closed_form(lambda rh: data(rh)[0], lambda rh: data(rh)[1],
                                     lambda rh: data(rh)[2], 0.0, rep.length)


def conformal_change(s: WarpedSmms, u: RadialProfile, hat_r_max: float | None = None,
                     mu: float | None = None) -> WarpedSmms:
    """The model ``(u^-2 g, (v/u)^m dvol_{u^-2 g})`` in its own arclength coordinate."""
    require_finite(s.m, "conformal_change (use conformal_change_inf)")
    rep = reparametrize(s, u, hat_r_max)
    psi = _quotient(s.psi, u, rep)
    if s.density_kind == "v":
        density = _quotient(s.density, u, rep)
    else:
        density = _shifted_potential(s.density, u, s.m, rep)
    return WarpedSmms(s.n, psi, s.m, density, s.density_kind, mu, f"conformal({s.label})")


def conformal_change_inf(s: WarpedSmms, f: RadialProfile, mu: float | None = None) -> WarpedSmms:
    """m = inf limit of a change by ``u = exp(f/(m+n-2))``: metric fixed, measure times ``e^-f``."""
    phi = s.density if s.density_kind == "phi" else None
    if phi is None:
        raise ValueError("m = inf models store phi")

    def data(r):
        a, b = phi.sample(r), f.sample(r)
        return tuple(x + y for x, y in zip(a, b))

    density = RadialProfile.closed_form(lambda r: data(r)[0], lambda r: data(r)[1],
                                        lambda r: data(r)[2], s.r0, s.r1)
    return WarpedSmms(s.n, s.psi, s.m, density, "phi", mu, f"conformal({s.label})")


# ------------------------------------------------------------- curvature

def weighted_laplacian_values(s: WarpedSmms, r, w, dw, d2w):
    """``Lap_phi w = w'' + ((n-1) psi'/psi - phi') w'`` for radial w."""
    psi, dpsi, _ = s.psi.sample(r)
    dphi = s.phi_data(r)[1]
    if s.finite and s.m == 0:
        dphi = np.zeros_like(psi)
    with np.errstate(divide="ignore", invalid="ignore"):
        return d2w + ((s.n - 1) * dpsi / psi - dphi) * dw


@dataclass(frozen=True)
class TransformedCurvature:
    """Bakry-Emery eigenvalues and weighted scalar curvature of ``u^-2 g``, sampled at old radii."""

    r: np.ndarray
    r_hat: np.ndarray
    Ricphi_rad: np.ndarray
    Ricphi_sph: np.ndarray
    Rphi: np.ndarray
    regular: np.ndarray


def transformed_curvature(s: WarpedSmms, u: RadialProfile, grid: RadialGrid | None = None,
                          with_r_hat: bool = True) -> TransformedCurvature:
    """Weighted curvature of the changed model evaluated by the transformation formulas.

    The tensor formulas give quantities measured with ``g``; eigenvalues with
    respect to ``u^-2 g`` carry an extra factor ``u^2``, as does the scalar.
    """
    require_finite(s.m, "transformed_curvature")
    check_conformal_factor(u, s.r0, s.r1)
    grid = grid or s.grid()
    r = grid.r
    n, m = s.n, s.m
    prof = curvature_profile(s, grid)
    psi, dpsi, _ = s.psi.sample(r)
    uu, du, d2u = u.sample(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        lap_phi_u = weighted_laplacian_values(s, r, uu, du, d2u)
        grad_sq = du**2 / uu**2
        iso = lap_phi_u / uu - (m + n - 1) * grad_sq
        ric_rad = prof.Ricphi_rad + (m + n - 2) * d2u / uu + iso
        ric_sph = prof.Ricphi_sph + (m + n - 2) * dpsi * du / (psi * uu) + iso
        scal = prof.Rphi + 2 * (m + n - 1) * lap_phi_u / uu - (m + n) * (m + n - 1) * grad_sq
    positive = uu > SINGULAR_RTOL * max(1.0, float(np.max(np.abs(uu))))
    regular = prof.regular & positive
    r_hat = np.full_like(r, np.nan)
    if with_r_hat:
        r_hat[positive] = reparametrize_length(u, s.r0, r[positive])
    return TransformedCurvature(r, r_hat, uu**2 * ric_rad, uu**2 * ric_sph, uu**2 * scal, regular)


def reparametrize_length(u: RadialProfile, r0: float, r) -> np.ndarray:
    """``integral_{r0}^{r} dt/u(t)`` at each r, by cumulative fine quadrature."""
    r = np.asarray(r, dtype=float)
    out = np.empty_like(r)
    prev_x, acc = r0, 0.0
    for i in np.argsort(r):
        acc += quad(lambda t: 1.0 / float(u(t)), prev_x, r[i], epsabs=1e-15, epsrel=1e-13,
                    limit=200)[0]
        out[i] = acc
        prev_x = r[i]
    return out


# ------------------------------------------------- conformal Laplacian

def weighted_conformal_laplacian_values(s: WarpedSmms, r, w, dw, d2w):
    """``-4(m+n-1)/(m+n-2) Lap_phi w + Rphi w`` at radii r (NaN at singular nodes)."""
    _, regular, values = _curvature_arrays(s, r)
    out = -conformal_coefficient(s.m, s.n) * weighted_laplacian_values(s, r, w, dw, d2w) \
        + values["Rphi"] * w
    return np.where(regular, out, np.nan)


def weighted_conformal_laplacian(s: WarpedSmms, w: RadialProfile, npts: int = DEFAULT_N) -> RadialProfile:
    """``L w`` as a grid profile; singular end nodes are filled by extrapolation."""
    grid = s.grid(npts)
    r = grid.r
    values = weighted_conformal_laplacian_values(s, r, *w.sample(r))
    ok = np.isfinite(values)
    return RadialProfile.from_samples(r, extrapolate_ends(values, ok))


# ------------------------------------------------------- covariance

def _quotient_data(y, dy, d2y, uu, du, d2u):
    """``p/u`` and its first two ``r_hat`` derivatives from old-coordinate data."""
    return (y / uu, dy - y * du / uu,
            uu * (d2y - dy * du / uu - y * d2u / uu + y * du**2 / uu**2))


def _hat_operator(s: WarpedSmms, r, u_data, w_vals, h, accuracy):
    """``L_hat w`` on a uniform old-coordinate grid.

    The changed geometry ``psi/u``, ``v/u`` is evaluated exactly by the chain
    rule; ``w`` is differentiated numerically with ``d/dr_hat = u D_r``.
    """
    n, m = s.n, s.m
    uu, du, d2u = u_data
    psi_h, dpsi_h, d2psi_h = _quotient_data(*s.psi.sample(r), uu, du, d2u)
    v_h, dv_h, d2v_h = _quotient_data(*s.v_data(r), uu, du, d2u)
    dw_h = uu * derivative(w_vals, h, 1, accuracy)
    d2w_h = uu * derivative(dw_h, h, 1, accuracy)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_rad = -d2psi_h / psi_h
        k_sph = (1 - dpsi_h**2) / psi_h**2
        scal = (n - 1) * (2 * k_rad + (n - 2) * k_sph)
        hh = dpsi_h / psi_h
        lap_v = d2v_h + (n - 1) * hh * dv_h
        rphi = scal - 2 * m * lap_v / v_h - m * (m - 1) * (dv_h / v_h) ** 2
        lap_phi_w = d2w_h + ((n - 1) * hh + m * dv_h / v_h) * dw_h
    return -conformal_coefficient(m, n) * lap_phi_w + rphi * w_vals


def covariance_residual(s: WarpedSmms, u: RadialProfile, w: RadialProfile,
                        npts: int = DEFAULT_N, accuracy: int = 4,
                        exponent: float | None = None) -> float:
    """Max over interior nodes of ``|L_hat w - u^((m+n+2)/2) L(u^(-(m+n-2)/2) w)|``.

    ``w`` is a function on the manifold given in the old coordinate.  Both
    operators differentiate their argument by finite differences, so the
    residual measures discretization error and shrinks under refinement.
    ``exponent`` overrides the inner power ``-(m+n-2)/2`` (used to test
    alternative forms of the identity).
    """
    require_finite(s.m, "covariance_residual")
    check_conformal_factor(u, s.r0, s.r1)
    grid = s.grid(npts)
    r, h = grid.r, grid.h
    m, n = s.m, s.n
    u_data = u.sample(r)
    ones = (np.ones_like(r), np.zeros_like(r), np.zeros_like(r))
    w_vals = np.asarray(w(r), dtype=float)
    inner = -(m + n - 2) / 2 if exponent is None else exponent
    lhs = _hat_operator(s, r, u_data, w_vals, h, accuracy)
    rhs = u_data[0] ** ((m + n + 2) / 2) * _hat_operator(s, r, ones, u_data[0] ** inner * w_vals,
                                                        h, accuracy)
    keep = s.nonsingular(r)
    keep[:2] = keep[-2:] = False
    return float(np.max(np.abs(lhs - rhs)[keep]))
