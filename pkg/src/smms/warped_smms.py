"""Rotationally symmetric smooth metric measure spaces.

A model is ``dr^2 + psi(r)^2 dtheta^2`` over the round unit ``S^{n-1}`` with
weighted measure ``v^m dvol``.  All curvature is reduced to two eigenvalue
channels: *radial* (the ``dr`` direction) and *spherical* (any unit vector
tangent to the orbit spheres).

Warped-product curvature used throughout::

    K_rad = -psi''/psi                      sectional curvature of planes containing dr
    K_sph = (1 - psi'^2)/psi^2              sectional curvature of tangential planes
    Ric   = ((n-1) K_rad,  K_rad + (n-2) K_sph)
    R     = (n-1) (2 K_rad + (n-2) K_sph)
    Hess h = (h'',  psi' h'/psi)            for radial h

With these, the Bakry-Emery tensor ``Ric - m v^{-1} Hess v`` and the weighted
scalar curvature ``R - 2m v^{-1} Lap v - m(m-1) v^{-2} |dv|^2`` follow
channelwise.  For ``m = inf`` the density is stored as ``phi`` and the limits
``Ric + Hess phi`` and ``R + 2 Lap phi - |dphi|^2`` are used instead.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy.integrate import solve_ivp
from scipy.interpolate import CubicSpline
from scipy.special import gamma

from .grid import DEFAULT_N, MIN_N, RadialGrid, derivative, extrapolate_ends

INF = math.inf
SINGULAR_RTOL = 1e-12


class SingularPointError(ValueError):
    """Raised when a pointwise quantity is requested where psi or v vanishes."""


class QeSolveError(RuntimeError):
    pass


# ---------------------------------------------------------------- DimParam

def parse_dim(value) -> float:
    """Parse a dimensional parameter: a real ``m >= 0`` or ``"inf"``."""
    if isinstance(value, str):
        text = value.strip().lower()
        if text in ("inf", "infinity", "+inf", "∞"):
            return INF
        value = float(text)
    m = float(value)
    if math.isnan(m) or m < 0:
        raise ValueError(f"dimensional parameter must be >= 0 or 'inf', got {value!r}")
    return m


def format_dim(m: float) -> str:
    return "inf" if math.isinf(m) else repr(float(m))


def require_finite(m: float, what: str) -> None:
    if math.isinf(m):
        raise ValueError(f"{what} requires finite m")


def sphere_area(dim: int) -> float:
    """Area of the unit ``dim``-sphere in R^{dim+1}."""
    return float(2.0 * math.pi ** ((dim + 1) / 2) / gamma((dim + 1) / 2))


# ----------------------------------------------------------- RadialProfile

@dataclass(frozen=True)
class RadialProfile:
    """A scalar function of r on [r0, r1] with first and second derivatives.

    Closed-form profiles wrap three vectorized callables.  Grid profiles hold
    samples; derivatives come from fourth-order finite differences and
    off-grid values from cubic splines of the sampled arrays.
    """

    r0: float
    r1: float
    value_fn: Callable = field(repr=False)
    d1_fn: Callable = field(repr=False)
    d2_fn: Callable = field(repr=False)
    kind: str = "closed-form"
    npts: int | None = None

    @classmethod
    def closed_form(cls, f, df, d2f, r0, r1):
        return cls(float(r0), float(r1), f, df, d2f)

    @classmethod
    def constant(cls, c, r0, r1):
        c = float(c)
        return cls.closed_form(
            lambda r: np.full_like(np.asarray(r, dtype=float), c),
            lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            lambda r: np.zeros_like(np.asarray(r, dtype=float)),
            r0,
            r1,
        )

    @classmethod
    def from_samples(cls, r, y, dy=None, d2y=None):
        r = np.asarray(r, dtype=float)
        y = np.asarray(y, dtype=float)
        if r.ndim != 1 or r.shape != y.shape:
            raise ValueError("samples must be 1-d arrays of equal length")
        if r.size < MIN_N:
            raise ValueError(f"grid profiles need at least {MIN_N} samples")
        steps = np.diff(r)
        h = steps.mean()
        if np.any(steps <= 0) or np.max(np.abs(steps - h)) > 1e-9 * max(1.0, abs(h)):
            raise ValueError("grid profiles need a uniform increasing grid")
        dy = derivative(y, h, 1) if dy is None else np.asarray(dy, dtype=float)
        d2y = derivative(y, h, 2) if d2y is None else np.asarray(d2y, dtype=float)
        splines = [CubicSpline(r, arr) for arr in (y, dy, d2y)]
        cache = (r, y, dy, d2y)

        def lookup(idx):
            def fn(x):
                x = np.asarray(x, dtype=float)
                if x.shape == r.shape and np.array_equal(x, r):
                    return cache[idx + 1].copy()
                return splines[idx](x)

            return fn

        return cls(float(r[0]), float(r[-1]), lookup(0), lookup(1), lookup(2), "grid", r.size)

    def __call__(self, r):
        return self.value_fn(r)

    def value(self, r):
        return self.value_fn(r)

    def d1(self, r):
        return self.d1_fn(r)

    def d2(self, r):
        return self.d2_fn(r)

    def sample(self, r):
        r = np.asarray(r, dtype=float)
        return (
            np.asarray(self.value_fn(r), dtype=float),
            np.asarray(self.d1_fn(r), dtype=float),
            np.asarray(self.d2_fn(r), dtype=float),
        )


# --------------------------------------------------------------- WarpedSmms

@dataclass(frozen=True)
class WarpedSmms:
    """``(I x S^{n-1}, dr^2 + psi^2 dtheta^2, v^m dvol, m)``.

    ``density`` is ``v`` when ``density_kind == "v"`` and ``phi`` (with
    ``v = exp(-phi/m)``) when ``density_kind == "phi"``.  ``qe_constant`` and
    ``scale`` record a known quasi-Einstein constant and quasi-Einstein scale
    when the model carries one.
    """

    n: int
    psi: RadialProfile
    m: float
    density: RadialProfile
    density_kind: str = "v"
    mu: float | None = None
    label: str = "custom"
    qe_constant: float | None = None
    scale: RadialProfile | None = None

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 3:
            raise ValueError("dimension n must be an integer >= 3")
        object.__setattr__(self, "m", parse_dim(self.m))
        if self.density_kind not in ("v", "phi"):
            raise ValueError("density_kind must be 'v' or 'phi'")
        if math.isinf(self.m) and self.density_kind != "phi":
            raise ValueError("m = inf models store their density as phi")
        if abs(self.psi.r0 - self.density.r0) > 1e-12 or abs(self.psi.r1 - self.density.r1) > 1e-12:
            raise ValueError("warp and density profiles must share a domain")
        probe = np.linspace(self.r0, self.r1, 33)[1:-1]
        if np.any(self.psi(probe) <= 0):
            raise ValueError("psi must be positive on the open interval")
        if self.density_kind == "v" and np.any(self.density(probe) <= 0):
            raise ValueError("v must be positive on the open interval")

    @property
    def r0(self) -> float:
        return self.psi.r0

    @property
    def r1(self) -> float:
        return self.psi.r1

    @property
    def finite(self) -> bool:
        return not math.isinf(self.m)

    def _zero_floor(self, profile) -> float:
        probe = np.abs(np.asarray(profile(np.linspace(self.r0, self.r1, 9)), dtype=float))
        return SINGULAR_RTOL * max(1.0, float(np.max(probe)))

    def nonsingular(self, r, density: bool = True) -> np.ndarray:
        """Mask of radii where psi (and v, for finite m) is safely nonzero."""
        r = np.asarray(r, dtype=float)
        ok = np.asarray(self.psi(r)) > self._zero_floor(self.psi)
        if density and self.finite and self.density_kind == "v":
            ok &= np.asarray(self.density(r)) > self._zero_floor(self.density)
        return ok

    def pole_ends(self) -> tuple[bool, bool]:
        ends = np.abs(np.asarray(self.psi(np.array([self.r0, self.r1])), dtype=float))
        floor = self._zero_floor(self.psi)
        return bool(ends[0] <= floor), bool(ends[1] <= floor)

    @property
    def closed(self) -> bool:
        left, right = self.pole_ends()
        return left and right

    def grid(self, npts: int = DEFAULT_N) -> RadialGrid:
        return RadialGrid(self.r0, self.r1, npts)

    def v_data(self, r):
        """``(v, v', v'')`` for finite m."""
        require_finite(self.m, "v")
        if self.density_kind == "v":
            return self.density.sample(r)
        if self.m == 0:
            r = np.asarray(r, dtype=float)
            return np.ones_like(r), np.zeros_like(r), np.zeros_like(r)
        phi, dphi, d2phi = self.density.sample(r)
        v = np.exp(-phi / self.m)
        return v, -dphi * v / self.m, (dphi**2 / self.m**2 - d2phi / self.m) * v

    def phi_data(self, r):
        """``(phi, phi', phi'')`` with ``v = exp(-phi/m)``."""
        if self.density_kind == "phi":
            return self.density.sample(r)
        v, dv, d2v = self.density.sample(r)
        with np.errstate(divide="ignore", invalid="ignore"):
            return -self.m * np.log(v), -self.m * dv / v, -self.m * (d2v / v - (dv / v) ** 2)

    def with_mu(self, mu) -> "WarpedSmms":
        return WarpedSmms(self.n, self.psi, self.m, self.density, self.density_kind,
                          mu, self.label, self.qe_constant, self.scale)

    def with_m(self, m) -> "WarpedSmms":
        """Same metric and ``phi`` viewed at another dimensional parameter."""
        if self.density_kind != "phi":
            raise ValueError("changing m keeps phi fixed; model must store phi")
        return WarpedSmms(self.n, self.psi, m, self.density, "phi", self.mu, self.label)

    def describe(self) -> dict:
        return {"label": self.label, "n": self.n, "m": format_dim(self.m),
                "r0": self.r0, "r1": self.r1, "mu": self.mu}


# ---------------------------------------------------------------- curvature

_CHANNELS = ("K_rad", "K_sph", "Ric_rad", "Ric_sph", "R", "Ricphi_rad", "Ricphi_sph", "Rphi")


@dataclass(frozen=True)
class CurvaturePoint:
    r: float
    K_rad: float
    K_sph: float
    Ric_rad: float
    Ric_sph: float
    R: float
    Ricphi_rad: float
    Ricphi_sph: float
    Rphi: float


@dataclass(frozen=True)
class CurvatureProfile:
    """Curvature channels sampled on a grid; ``regular`` marks usable nodes."""

    r: np.ndarray
    regular: np.ndarray
    channels: dict

    def __getattr__(self, name):
        channels = self.__dict__.get("channels", {})
        if name in channels:
            return channels[name]
        raise AttributeError(name)

    def filled(self, degree: int = 4) -> dict:
        """Channels with singular end nodes replaced by extrapolation."""
        return {k: extrapolate_ends(a, self.regular, degree) for k, a in self.channels.items()}


def _curvature_arrays(s: WarpedSmms, r):
    r = np.atleast_1d(np.asarray(r, dtype=float))
    n = s.n
    psi, dpsi, d2psi = s.psi.sample(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        k_rad = -d2psi / psi
        k_sph = (1.0 - dpsi**2) / psi**2
        h = dpsi / psi
        ric_rad = (n - 1) * k_rad
        ric_sph = k_rad + (n - 2) * k_sph
        scal = (n - 1) * (2.0 * k_rad + (n - 2) * k_sph)
        if s.finite:
            v, dv, d2v = s.v_data(r)
            m = s.m
            dlog = dv / v
            lap_v = d2v + (n - 1) * h * dv
            bre_rad = ric_rad - m * d2v / v
            bre_sph = ric_sph - m * h * dlog
            rphi = scal - 2.0 * m * lap_v / v - m * (m - 1) * dlog**2
        else:
            _, dphi, d2phi = s.phi_data(r)
            lap_phi = d2phi + (n - 1) * h * dphi
            bre_rad = ric_rad + d2phi
            bre_sph = ric_sph + h * dphi
            rphi = scal + 2.0 * lap_phi - dphi**2
    regular = s.nonsingular(r)
    values = dict(zip(_CHANNELS, (k_rad, k_sph, ric_rad, ric_sph, scal, bre_rad, bre_sph, rphi)))
    return r, regular, values


def curvature_at(s: WarpedSmms, r: float) -> CurvaturePoint:
    """All curvature channels at a single radius in the open interval."""
    r = float(r)
    if not (s.r0 <= r <= s.r1):
        raise ValueError(f"r = {r} outside [{s.r0}, {s.r1}]")
    _, regular, values = _curvature_arrays(s, r)
    if not regular[0]:
        raise SingularPointError(f"psi or v vanishes at r = {r}")
    return CurvaturePoint(r, *(float(values[k][0]) for k in _CHANNELS))


def curvature_profile(s: WarpedSmms, grid: RadialGrid | None = None) -> CurvatureProfile:
    grid = grid or s.grid()
    r, regular, values = _curvature_arrays(s, grid.r)
    values = {k: np.where(regular, a, np.nan) for k, a in values.items()}
    return CurvatureProfile(r, regular, values)


# ------------------------------------------------------- quasi-Einstein data

def qe_residual(s: WarpedSmms, lam: float, grid: RadialGrid | None = None):
    """Max deviation of the Bakry-Emery eigenvalues from ``lam``: (radial, spherical)."""
    prof = curvature_profile(s, grid)
    mask = prof.regular
    return (float(np.max(np.abs(prof.Ricphi_rad[mask] - lam))),
            float(np.max(np.abs(prof.Ricphi_sph[mask] - lam))))


def kim_kim_mu(s: WarpedSmms, lam: float, r=None):
    """Characteristic constant read off pointwise from the Bianchi-type identity.

    Finite m returns ``mu(r) = ((m+n) lam - Rphi) v^2 / m``, evaluated in the
    cancellation-free form ``((m+n) lam - R) v^2/m + 2 v Lap v + (m-1) v'^2``
    so that it stays accurate where ``v -> 0``.  For ``m = inf`` the returned
    quantity is ``mu' = -(Rphi + 2 lam (phi - n))``.

    With ``r=None`` the model's default grid is used and NaN marks nodes where
    psi vanishes.
    """
    if s.m == 0:
        raise ValueError("characteristic constant is undefined for m = 0")
    scalar = r is not None and np.ndim(r) == 0
    rr = s.grid().r if r is None else np.atleast_1d(np.asarray(r, dtype=float))
    _, regular, values = _curvature_arrays(s, rr)
    psi, dpsi, _ = s.psi.sample(rr)
    n = s.n
    with np.errstate(divide="ignore", invalid="ignore"):
        if s.finite:
            m = s.m
            v, dv, d2v = s.v_data(rr)
            lap_v = d2v + (n - 1) * dpsi / psi * dv
            out = ((m + n) * lam - values["R"]) * v**2 / m + 2.0 * v * lap_v + (m - 1) * dv**2
            ok = s.nonsingular(rr, density=False)
        else:
            phi = s.phi_data(rr)[0]
            out = -(values["Rphi"] + 2.0 * lam * (phi - n))
            ok = regular
    if scalar:
        if not ok[0]:
            raise SingularPointError(f"psi vanishes at r = {float(r)}")
        return float(out[0])
    return np.where(ok, out, np.nan)


def qe_scale_residual(s: WarpedSmms, u: RadialProfile, lam: float, grid: RadialGrid | None = None):
    """Residuals of the three conditions making ``u`` a quasi-Einstein scale.

    Returns max-abs values of: the tracefree part of
    ``uv Ric + (m+n-2) v Hess u - m u Hess v`` (radial component), the
    ``n lam v^2`` equation and the ``n mu u^2`` equation.
    """
    if s.mu is None:
        raise ValueError("model needs a characteristic constant mu")
    require_finite(s.m, "qe_scale_residual")
    grid = grid or s.grid()
    r, regular, values = _curvature_arrays(s, grid.r)
    psi, dpsi, _ = s.psi.sample(r)
    v, dv, d2v = s.v_data(r)
    uu, du, d2u = u.sample(r)
    n, m, mu = s.n, s.m, s.mu
    with np.errstate(divide="ignore", invalid="ignore"):
        h = dpsi / psi
        lap_u = d2u + (n - 1) * h * du
        lap_v = d2v + (n - 1) * h * dv
        t_rad = uu * v * values["Ric_rad"] + (m + n - 2) * v * d2u - m * uu * d2v
        t_sph = uu * v * values["Ric_sph"] + (m + n - 2) * v * h * du - m * uu * h * dv
        tracefree = (n - 1) / n * (t_rad - t_sph)
        lam_eq = ((uu * v) ** 2 * values["R"] + (m + 2 * n - 2) * uu * v**2 * lap_u
                  - m * uu**2 * v * lap_v - (m + n - 1) * n * v**2 * du**2
                  + m * n * uu * v * du * dv - n * lam * v**2)
        mu_eq = ((uu * v) ** 2 * values["R"] + (m + n - 2) * uu * v**2 * lap_u
                 - (m - n) * uu**2 * v * lap_v - (m + n - 2) * n * uu * v * du * dv
                 + (m - 1) * n * uu**2 * dv**2 - n * mu * uu**2)
    mask = s.nonsingular(r, density=False)
    return tuple(float(np.max(np.abs(a[mask]))) for a in (tracefree, lam_eq, mu_eq))


def weighted_volume(s: WarpedSmms, offset: float = 0, npts: int = DEFAULT_N) -> float:
    """``omega_{n-1} * integral of v^(m+offset) psi^(n-1) dr``; ``offset = -m`` gives Riemannian volume."""
    grid = s.grid(npts)
    r = grid.r
    psi = s.psi(r)
    if s.finite:
        v = s.v_data(r)[0]
        with np.errstate(divide="ignore", invalid="ignore"):
            weight = np.ones_like(v) if s.m + offset == 0 else v ** (s.m + offset)
    else:
        if offset != 0:
            raise ValueError("m = inf supports only offset 0 (density e^-phi)")
        weight = np.exp(-s.phi_data(r)[0])
    return sphere_area(s.n - 1) * grid.integrate(weight * psi ** (s.n - 1))


# ----------------------------------------------------------- model families

def _sin_warp(k, r0, r1):
    return RadialProfile.closed_form(
        lambda r: k * np.sin(np.asarray(r) / k),
        lambda r: np.cos(np.asarray(r) / k),
        lambda r: -np.sin(np.asarray(r) / k) / k,
        r0, r1)


def _sinh_warp(k, r0, r1):
    return RadialProfile.closed_form(
        lambda r: k * np.sinh(np.asarray(r) / k),
        lambda r: np.cosh(np.asarray(r) / k),
        lambda r: np.sinh(np.asarray(r) / k) / k,
        r0, r1)


def _flat_warp(r0, r1):
    return RadialProfile.closed_form(
        lambda r: np.asarray(r, dtype=float) * 1.0,
        lambda r: np.ones_like(np.asarray(r, dtype=float)),
        lambda r: np.zeros_like(np.asarray(r, dtype=float)),
        r0, r1)


def _trivial_density(m, r0, r1):
    if math.isinf(m):
        return RadialProfile.constant(0.0, r0, r1), "phi"
    return RadialProfile.constant(1.0, r0, r1), "v"


def gaussian_model(n: int, m, r_max: float = 8.0) -> WarpedSmms:
    """Positive elliptic m-Gaussian (quasi-Einstein constant 1).

    Finite m: hemisphere of radius ``k = sqrt(m+n-1)`` with ``v = cos(r/k)``.
    ``m = inf``: flat space on ``[0, r_max]`` with ``phi = r^2/2``.
    """
    m = parse_dim(m)
    if math.isinf(m):
        phi = RadialProfile.closed_form(
            lambda r: 0.5 * np.asarray(r, dtype=float) ** 2,
            lambda r: np.asarray(r, dtype=float) * 1.0,
            lambda r: np.ones_like(np.asarray(r, dtype=float)),
            0.0, r_max)
        return WarpedSmms(n, _flat_warp(0.0, r_max), m, phi, "phi", None, "gaussian", 1.0)
    k = math.sqrt(m + n - 1)
    r1 = k * math.pi / 2
    v = RadialProfile.closed_form(
        lambda r: np.cos(np.asarray(r) / k),
        lambda r: -np.sin(np.asarray(r) / k) / k,
        lambda r: -np.cos(np.asarray(r) / k) / k**2,
        0.0, r1)
    return WarpedSmms(n, _sin_warp(k, 0.0, r1), m, v, "v", (m - 1) / k**2, "gaussian", 1.0)


def sphere_model(n: int, m, radius: float | None = None) -> WarpedSmms:
    """Round sphere of the given radius (default ``sqrt(m+n-1)``) with trivial density.

    It is Einstein with ``lambda = (n-1)/radius^2``, hence quasi-Einstein with
    characteristic constant ``mu = lambda`` for every m.
    """
    m = parse_dim(m)
    if radius is None:
        if math.isinf(m):
            raise ValueError("m = inf sphere needs an explicit radius")
        radius = math.sqrt(m + n - 1)
    radius = float(radius)
    r1 = math.pi * radius
    lam = (n - 1) / radius**2
    density, kind = _trivial_density(m, 0.0, r1)
    return WarpedSmms(n, _sin_warp(radius, 0.0, r1), m, density, kind, lam, "sphere", lam)


def hyperbolic_gaussian_model(n: int, m, r_max: float = 3.0) -> WarpedSmms:
    """Hyperbolic space of curvature ``-1/(m+n-1)`` with trivial density.

    Carries the quasi-Einstein scale ``u = cosh(r/k)`` (constant 1) and the
    characteristic constant ``(m-1)/k^2`` of the Gaussian it represents.
    """
    m = parse_dim(m)
    require_finite(m, "hyperbolic-gaussian")
    k = math.sqrt(m + n - 1)
    u = RadialProfile.closed_form(
        lambda r: np.cosh(np.asarray(r) / k),
        lambda r: np.sinh(np.asarray(r) / k) / k,
        lambda r: np.cosh(np.asarray(r) / k) / k**2,
        0.0, r_max)
    density, kind = _trivial_density(m, 0.0, r_max)
    return WarpedSmms(n, _sinh_warp(k, 0.0, r_max), m, density, kind, (m - 1) / k**2,
                      "hyperbolic-gaussian", 1.0, u)


def hyperbolic_scale_potential(n: int, m: float, r):
    """``f = (m+n-2) log cosh(r/k)``, the potential of the hyperbolic scale, with f' and f''."""
    k = math.sqrt(m + n - 1)
    c = m + n - 2
    x = np.asarray(r, dtype=float) / k
    return c * np.log(np.cosh(x)), c * np.tanh(x) / k, c / (k * np.cosh(x)) ** 2


def tilted_sphere_model(n: int, m, amplitude: float = 1.0, radius: float = 1.0) -> WarpedSmms:
    """Round sphere carrying the potential ``phi = amplitude * cos(r/radius)``.

    Not quasi-Einstein unless ``amplitude = 0``.  Stored in phi form, so the
    same metric and measure can be viewed at any m (including inf).  For
    ``0 < m < 1`` and large amplitude the weighted scalar curvature becomes
    very negative and the weighted Yamabe constant is negative.
    """
    m = parse_dim(m)
    radius = float(radius)
    r1 = math.pi * radius
    amp = float(amplitude)
    phi = RadialProfile.closed_form(
        lambda r: amp * np.cos(np.asarray(r) / radius),
        lambda r: -amp * np.sin(np.asarray(r) / radius) / radius,
        lambda r: -amp * np.cos(np.asarray(r) / radius) / radius**2,
        0.0, r1)
    return WarpedSmms(n, _sin_warp(radius, 0.0, r1), m, phi, "phi", None, "tilted-sphere")


def euclidean_model(n: int, m, r_max: float = 1.0) -> WarpedSmms:
    m = parse_dim(m)
    density, kind = _trivial_density(m, 0.0, r_max)
    return WarpedSmms(n, _flat_warp(0.0, r_max), m, density, kind, None, "euclidean", 0.0)


def custom_grid_model(n: int, m, r, psi, v=None, phi=None, mu=None, label="custom-grid") -> WarpedSmms:
    m = parse_dim(m)
    if (v is None) == (phi is None):
        raise ValueError("give exactly one of v or phi")
    warp = RadialProfile.from_samples(r, psi)
    if v is not None:
        return WarpedSmms(n, warp, m, RadialProfile.from_samples(r, v), "v", mu, label)
    return WarpedSmms(n, warp, m, RadialProfile.from_samples(r, phi), "phi", mu, label)


LIMIT_CHANNELS = ("K_rad", "K_sph", "Ricphi_rad", "Ricphi_sph", "Rphi")


def gaussian_limit_gap(n: int, m: float, radii=None) -> float:
    """Max pointwise curvature difference between the m- and inf-Gaussians at fixed radii."""
    radii = np.linspace(0.25, 2.0, 8) if radii is None else np.asarray(radii, dtype=float)
    finite = gaussian_model(n, m)
    limit = gaussian_model(n, INF, r_max=max(8.0, float(np.max(radii)) + 1.0))
    gap = 0.0
    for r in radii:
        a, b = curvature_at(finite, r), curvature_at(limit, r)
        gap = max(gap, max(abs(getattr(a, k) - getattr(b, k)) for k in LIMIT_CHANNELS))
    return gap


FAMILIES = ("gaussian", "sphere", "hyperbolic-gaussian", "euclidean", "tilted-sphere", "custom-grid")


def build_model(family: str, n: int, m, params: dict | None = None) -> WarpedSmms:
    params = dict(params or {})
    if family == "gaussian":
        return gaussian_model(n, m, **params)
    if family == "sphere":
        return sphere_model(n, m, **params)
    if family == "hyperbolic-gaussian":
        return hyperbolic_gaussian_model(n, m, **params)
    if family == "euclidean":
        return euclidean_model(n, m, **params)
    if family == "tilted-sphere":
        return tilted_sphere_model(n, m, **params)
    if family == "custom-grid":
        return custom_grid_model(n, m, **params)
    raise ValueError(f"unknown family {family!r}; expected one of {', '.join(FAMILIES)}")


def load_model_config(path) -> tuple[WarpedSmms, int]:
    """Read ``{family, n, m, params, N}`` JSON; returns the model and grid size."""
    cfg = json.loads(Path(path).read_text(encoding="utf-8"))
    npts = int(cfg.get("N", DEFAULT_N))
    if npts < MIN_N:
        raise ValueError(f"N must be >= {MIN_N}")
    model = build_model(cfg["family"], int(cfg["n"]), cfg.get("m", 2), cfg.get("params"))
    return model, npts


def profile_table(s: WarpedSmms, npts: int = DEFAULT_N) -> dict:
    """Columns r, psi, v, f, K_rad, K_sph, R, Rphi; ``f`` is the density potential phi.

    Singular end nodes are filled by extrapolation except where a channel
    genuinely diverges (Rphi at a zero of v), which is left as NaN.
    """
    grid = s.grid(npts)
    r = grid.r
    prof = curvature_profile(s, grid)
    filled = prof.filled()
    psi = s.psi(r)
    phi = s.phi_data(r)[0]
    v = s.v_data(r)[0] if s.finite else np.full_like(r, np.nan)
    table = {"r": r, "psi": psi, "v": v, "f": phi}
    for key in ("K_rad", "K_sph", "R"):
        table[key] = filled[key]
    diverges = ~s.nonsingular(r) & s.nonsingular(r, density=False)
    table["Rphi"] = np.where(diverges, np.nan, filled["Rphi"])
    return table


# ------------------------------------------------------------ QE shooting

@dataclass(frozen=True)
class QeSolution:
    """Radial quasi-Einstein scale ``u = exp(f/(m+n-2))`` on a model with ``v = 1``."""

    model: WarpedSmms
    u: RadialProfile
    f: RadialProfile
    hess_f0: float
    lam: float
    mu: float
    r_end: float
    closed: bool


def _qe_rhs(n, m, mu):
    c = m + n - 2

    def rhs(r, y):
        psi, dpsi, _, df = y
        d2psi = (n - 2) * (1.0 - dpsi**2) / psi + dpsi * df - mu * psi
        d2f = mu + (n - 1) * d2psi / psi - df**2 / c
        return [dpsi, d2psi, df, d2f]

    return rhs


def _series_coefficients(n, m, mu, b):
    """Odd Taylor coefficients at a smooth origin.

    ``psi = r + a3 r^3 + a5 r^5`` and ``f' = b r + e3 r^3``; the
    ``r^3`` terms matter: dropping ``e3`` shifts the effective ``f''(0)`` by
    a relative ``O(r_start^2)``.
    """
    c = m + n - 2
    a3 = (b - mu) / (6.0 * (n - 1))
    a5 = (13 * b**2 * m * n - 10 * b**2 * m + b**2 * n**2 - 12 * b**2 * n + 8 * b**2
          - 14 * b * m * mu * n + 8 * b * m * mu - 14 * b * mu * n**2 + 36 * b * mu * n
          - 16 * b * mu + m * mu**2 * n + 2 * m * mu**2 + mu**2 * n**2 - 4 * mu**2) / (
        120.0 * (n - 1) ** 2 * (n + 2) * c)
    e3 = b * (2 * b * m - b * n - 4 * b - 2 * m * mu - 2 * mu * n + 4 * mu) / (3.0 * (n + 2) * c)
    return a3, a5, e3


def _series(r, n, m, mu, b, f0):
    a3, a5, e3 = _series_coefficients(n, m, mu, b)
    return np.array([r + a3 * r**3 + a5 * r**5, 1 + 3 * a3 * r**2 + 5 * a5 * r**4,
                     f0 + 0.5 * b * r**2 + 0.25 * e3 * r**4, b * r + e3 * r**3])


def _integrate_qe(n, m, mu, b, r_max, f0, rtol, atol, r_start, to_equator):
    def blowup(r, y):
        return 1e6 - abs(y[3]) - abs(y[1])

    blowup.terminal = True

    def equator(r, y):
        return y[1]

    equator.terminal = True
    equator.direction = -1
    events = [blowup] + ([equator] if to_equator else [])
    return solve_ivp(_qe_rhs(n, m, mu), (r_start, r_max), _series(r_start, n, m, mu, b, f0),
                     method="DOP853", rtol=rtol, atol=atol, dense_output=True, events=events)


def _equator_mismatch(n, m, mu, b, r_max, rtol, atol, r_start):
    """``f'`` where ``psi'`` first vanishes, or None if psi never turns."""
    sol = _integrate_qe(n, m, mu, b, r_max, 0.0, rtol, atol, r_start, True)
    if len(sol.t_events[1]) == 0:
        return None
    return float(sol.y_events[1][0][3])


def solve_qe_ode(n: int, m: float, mu: float, hess_f0: float | None = None, *, r_max: float = 3.0,
                 closed: bool = False, bracket: tuple[float, float] | None = None, f0: float = 0.0,
                 rtol: float = 1e-13, atol: float = 1e-12, r_start: float = 1e-3,
                 tol: float = 1e-7, max_bisect: int = 200) -> QeSolution:
    """Integrate ``Ric + Hess f + df (x) df/(m+n-2) = mu g`` radially with ``v = 1``.

    The smooth-origin data are ``psi(0) = 0``, ``psi'(0) = 1``, ``f'(0) = 0``;
    the free parameter is ``hess_f0 = f''(0)`` (``f(0)`` only rescales ``u``
    and hence ``lambda``).

    ``closed=True`` looks for a reflection-symmetric closed solution: the
    parameter is bisected over ``bracket`` (default ``(-mu, mu)``) until
    ``f' = 0`` where ``psi' = 0``, and the half solution is mirrored across
    that equator.  Marching straight into the far pole is avoided because the
    singular point there amplifies any error.
    """
    m = parse_dim(m)
    require_finite(m, "solve_qe_ode")
    if not m > 1:
        raise ValueError("solve_qe_ode requires m > 1")
    if int(n) != n or n < 3:
        raise ValueError("n must be an integer >= 3")
    c = m + n - 2

    if closed:
        if not mu > 0:
            raise QeSolveError("a closed solution needs a positive characteristic constant")
        lo, hi = bracket if bracket is not None else (-mu, mu)
        reach = max(r_max, 20.0 * math.sqrt((n - 1) / mu))
        g_lo = _equator_mismatch(n, m, mu, lo, reach, rtol, atol, r_start)
        g_hi = _equator_mismatch(n, m, mu, hi, reach, rtol, atol, r_start)
        if g_lo is None or g_hi is None or g_lo * g_hi > 0:
            raise QeSolveError("bracket does not straddle a closing solution")
        for _ in range(max_bisect):
            mid = 0.5 * (lo + hi)
            g_mid = _equator_mismatch(n, m, mu, mid, reach, rtol, atol, r_start)
            if g_mid is None:
                raise QeSolveError("solution stopped turning inside the bracket")
            if g_mid == 0.0:
                lo = hi = mid
                break
            if (g_lo < 0) == (g_mid < 0):
                lo, g_lo = mid, g_mid
            else:
                hi, g_hi = mid, g_mid
            if hi - lo < 1e-15 * max(1.0, abs(mid)):
                break
        hess_f0 = 0.5 * (lo + hi)
        r_max = reach
    if hess_f0 is None:
        raise ValueError("hess_f0 is required for an open solve")

    sol = _integrate_qe(n, m, mu, hess_f0, r_max, f0, rtol, atol, r_start, closed)
    if sol.status == -1:
        raise QeSolveError(sol.message)
    if closed:
        if len(sol.t_events[1]) == 0:
            raise QeSolveError("closing solution lost its equator")
        equator = float(sol.t_events[1][0])
        r_end = 2.0 * equator
    else:
        if sol.status == 1:
            raise QeSolveError(f"solution blows up at r = {sol.t[-1]:.6g} before r_max")
        equator = None
        r_end = float(r_max)

    dense = sol.sol
    rhs = _qe_rhs(n, m, mu)
    a3, a5, e3 = _series_coefficients(n, m, mu, hess_f0)

    def state(r):
        """(psi, psi', psi'', f, f', f'') at r, mirrored beyond the equator."""
        r = np.asarray(r, dtype=float)
        flat = np.atleast_1d(r).astype(float).ravel()
        sign = np.ones_like(flat)
        if equator is not None:
            far = flat > equator
            flat = np.where(far, 2.0 * equator - flat, flat)
            sign[far] = -1.0
        y = np.empty((4, flat.size))
        near = flat < r_start
        if np.any(near):
            y[:, near] = _series(flat[near], n, m, mu, hess_f0, f0)
        if np.any(~near):
            y[:, ~near] = dense(np.minimum(flat[~near], sol.t[-1]))
        with np.errstate(divide="ignore", invalid="ignore"):
            d = np.asarray(rhs(flat, y), dtype=float)
        x = flat
        d2psi = np.where(near, 6 * a3 * x + 20 * a5 * x**3, d[1])
        d2f = np.where(near, hess_f0 + 3 * e3 * x**2, d[3])
        out = np.stack([y[0], sign * y[1], d2psi, y[2], sign * y[3], d2f])
        return out.reshape((6,) + r.shape)

    psi = RadialProfile.closed_form(lambda r: state(r)[0], lambda r: state(r)[1],
                                    lambda r: state(r)[2], 0.0, r_end)
    f = RadialProfile.closed_form(lambda r: state(r)[3], lambda r: state(r)[4],
                                  lambda r: state(r)[5], 0.0, r_end)

    def u_data(r):
        st = state(r)
        u = np.exp(st[3] / c)
        return u, u * st[4] / c, u * (st[5] / c + (st[4] / c) ** 2)

    u = RadialProfile.closed_form(lambda r: u_data(r)[0], lambda r: u_data(r)[1],
                                  lambda r: u_data(r)[2], 0.0, r_end)
    # lambda from the scale equation at the origin, where u' = 0 and Lap u = n u''
    u0 = math.exp(f0 / c)
    scal0 = -n * (n - 1) * 6 * a3
    lam = (u0**2 * scal0 + (m + 2 * n - 2) * u0 * n * u0 * hess_f0 / c) / n
    model = WarpedSmms(n, psi, m, RadialProfile.constant(1.0, 0.0, r_end), "v", mu,
                       "qe-solution", lam, u)
    res = qe_scale_residual(model, u, lam, RadialGrid(0.0, r_end, DEFAULT_N))
    if max(res) > tol:
        raise QeSolveError(f"quasi-Einstein residual {max(res):.3e} exceeds {tol:.1e}")
    return QeSolution(model, u, f, float(hess_f0), float(lam), float(mu), r_end, closed)
