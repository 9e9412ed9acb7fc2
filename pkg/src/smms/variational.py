"""Energy functionals of radial models and their minimization.

Conformal factors are parametrized by ``w = u^{-(m+n-2)/2}``.  Three numbers
built from w drive everything:

    a(w) = (L w, w) = c |grad w|^2 + Rphi w^2      integrated against v^m dvol
    b(w) = ||w v^-1||_2^2
    S(w) = integral of w^p v^m dvol,   ||w||_p = S^(1/p)

with ``c = 4(m+n-1)/(m+n-2)``, ``p = 2(m+n)/(m+n-2)`` and ``q = 2(m+n)/n``.
The (m,mu)-energy quotient is ``(a + m mu b)/||w||_p^2``, the weighted Yamabe
quotient is ``a b^(m/n)/||w||_p^q`` and the tau-dependent m-energy quotient is
``(tau^(m/(m+n)) a + m tau^(-n/(m+n)) b)/||w||_p^2``.

Two discretizations are provided.  Profile-level evaluations
(:func:`yamabe_quotient`, :func:`energy_functional`, ...) use the
fourth-order open quadrature of :mod:`smms.grid`.  Minimization uses a
finite-element-like nodal discretization with strictly positive lumped
weights (:class:`EnergyDiscretization`), whose gradients are exact, so the
descent, the finite-difference gradient check and the Euler-Lagrange residual
all refer to the same discrete functional.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.linalg import eigh_tridiagonal, solve_banded

from .conformal import conformal_coefficient, transformed_curvature
from .grid import DEFAULT_N, RadialGrid
from .warped_smms import (
    INF,
    RadialProfile,
    WarpedSmms,
    _curvature_arrays,
    parse_dim,
    require_finite,
    sphere_area,
    weighted_volume,
)

DEFAULT_TOL = 1e-6
DEFAULT_MAX_ITER = 5000
NO_COMPACTNESS = "no compactness guarantee"


class NoInteriorMinimizer(ValueError):
    """The tau-optimization has no interior minimizer because (Lw, w) <= 0."""


class MinimizationError(RuntimeError):
    pass


def sobolev_exponent(m: float, n: int) -> float:
    return 2.0 * (m + n) / (m + n - 2)


def yamabe_exponent(m: float, n: int) -> float:
    return 2.0 * (m + n) / n


def _check_dims(s: WarpedSmms) -> None:
    require_finite(s.m, "energy minimization")
    if s.m < 0:
        raise ValueError("energies are defined here for m >= 0")


# ---------------------------------------------------------------- densities

def _densities(s: WarpedSmms, r):
    """``omega psi^(n-1)`` times ``v^m``, ``Rphi v^m`` and ``v^(m-2)`` at radii r.

    ``Rphi v^m`` is expanded as ``R v^m - 2m v^(m-1) Lap v - m(m-1) v^(m-2) v'^2``
    so that it stays finite where v vanishes.  All three vanish at poles.
    """
    n, m = s.n, s.m
    r = np.asarray(r, dtype=float)
    _, _, values = _curvature_arrays(s, r)
    psi, dpsi, _ = s.psi.sample(r)
    v, dv, d2v = s.v_data(r)
    pole = ~s.nonsingular(r, density=False)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        vol = sphere_area(n - 1) * psi ** (n - 1)
        curv = values["R"] * v**m
        if m != 0:
            lap_v = d2v + (n - 1) * dpsi / psi * dv
            curv = curv - 2.0 * m * v ** (m - 1) * lap_v
            if m != 1:
                curv = curv - m * (m - 1) * v ** (m - 2) * dv**2
        out = (vol * v**m, vol * curv, vol * v ** (m - 2))
    return tuple(np.where(pole, 0.0, a) for a in out)


def _open_integrals(s: WarpedSmms, grid: RadialGrid, *arrays):
    weights = grid.quad_weights()
    out = []
    for a in arrays:
        a = np.array(a, dtype=float)
        a[[0, -1]] = 0.0  # never used by the open rule, may be singular
        out.append(float(weights @ a))
    return out


# ---------------------------------------------------- profile-level values

def energy_functional(s: WarpedSmms, mu: float, npts: int = DEFAULT_N) -> float:
    """Integral of ``(Rphi + m mu v^-2) v^m dvol``; at ``m = inf`` of ``(Rphi + 2 mu (phi - n)) e^-phi dvol``."""
    grid = s.grid(npts)
    r = grid.r
    if s.finite:
        rho, rho_curv, rho_inv = _densities(s, r)
        integrand = rho_curv + (s.m * mu * rho_inv if s.m != 0 else 0.0)
    else:
        _, _, values = _curvature_arrays(s, r)
        phi = s.phi_data(r)[0]
        with np.errstate(invalid="ignore"):
            integrand = (values["Rphi"] + 2.0 * mu * (phi - s.n)) * np.exp(-phi) \
                * sphere_area(s.n - 1) * s.psi(r) ** (s.n - 1)
    return _open_integrals(s, grid, integrand)[0]


def renormalization_gap(s: WarpedSmms, mu: float, m_list, npts: int = DEFAULT_N) -> np.ndarray:
    """``|W_mu^m - (m+2n) Vol_phi - W_mu^inf|`` for each finite m, with phi held fixed.

    The model must store its density as phi.
    """
    ms = [parse_dim(m) for m in m_list]
    if any(math.isinf(m) for m in ms):
        raise ValueError("m_list must contain finite values only")
    if s.density_kind != "phi":
        raise ValueError("the limit keeps phi fixed; model must store phi")
    limit = energy_functional(s.with_m(INF), mu, npts)
    gaps = []
    for m in ms:
        finite = s.with_m(m)
        vol = weighted_volume(finite, npts=npts)
        gaps.append(abs(energy_functional(finite, mu, npts) - (m + 2 * s.n) * vol - limit))
    return np.array(gaps)


@dataclass(frozen=True)
class QuadraticData:
    """``a = (Lw, w)``, ``b = ||w v^-1||_2^2`` and ``S = ||w||_p^p`` for one w."""

    a: float
    b: float
    power_sum: float
    m: float
    n: int

    @property
    def norm_sq(self) -> float:
        return self.power_sum ** (2.0 / sobolev_exponent(self.m, self.n))


def quadratic_data(s: WarpedSmms, w: RadialProfile, npts: int = DEFAULT_N) -> QuadraticData:
    """The three integrals by open quadrature, using the integrated-by-parts form of ``(Lw, w)``."""
    _check_dims(s)
    grid = s.grid(npts)
    r = grid.r
    rho, rho_curv, rho_inv = _densities(s, r)
    ww, dw, _ = w.sample(r)
    c = conformal_coefficient(s.m, s.n)
    p = sobolev_exponent(s.m, s.n)
    with np.errstate(invalid="ignore", over="ignore"):
        a, b, power = _open_integrals(s, grid, c * rho * dw**2 + rho_curv * ww**2,
                                      rho_inv * ww**2, rho * np.abs(ww) ** p)
    return QuadraticData(a, b, power, s.m, s.n)


def yamabe_value(data: QuadraticData) -> float:
    m, n = data.m, data.n
    return data.a * data.b ** (m / n) / data.power_sum ** ((m + n - 2) / n)


def yamabe_quotient(s: WarpedSmms, w: RadialProfile, npts: int = DEFAULT_N) -> float:
    """``(Lw, w) ||w v^-1||_2^(2m/n) / ||w||_p^q``."""
    return yamabe_value(quadratic_data(s, w, npts))


def yamabe_quotient_homogeneous(s: WarpedSmms, u: RadialProfile, npts: int = DEFAULT_N) -> float:
    """The same quotient written through the changed model ``(u^-2 g, (v/u)^m dvol)``.

    ``(int Rphi_hat v_hat^m)(int v_hat^(m-2))^(m/n) / (int v_hat^m)^((m+n-2)/n)``
    with the new scalar curvature taken from the transformation law and the
    new measures pulled back to the old radial coordinate.
    """
    _check_dims(s)
    grid = s.grid(npts)
    m, n = s.m, s.n
    rho, _, rho_inv = _densities(s, grid.r)
    tc = transformed_curvature(s, u, grid, with_r_hat=False)
    uu = u(grid.r)
    with np.errstate(invalid="ignore"):
        scal, low, top = _open_integrals(s, grid, tc.Rphi * uu ** (-m - n) * rho,
                                         uu ** (2 - m - n) * rho_inv, uu ** (-m - n) * rho)
    return scal * low ** (m / n) / top ** ((m + n - 2) / n)


def tau_star(a: float, b: float, m: float, n: int) -> float:
    """Minimizer ``n b / a`` of the m-energy quotient in tau."""
    if a <= 0:
        raise NoInteriorMinimizer("no interior minimizer: (Lw, w) <= 0, quotient unbounded below in tau")
    return n * b / a


def m_energy_value(a: float, b: float, norm_sq: float, m: float, n: int, tau: float) -> float:
    return (tau ** (m / (m + n)) * a + m * tau ** (-n / (m + n)) * b) / norm_sq


def m_energy_optimal(a: float, b: float, norm_sq: float, m: float, n: int) -> float:
    """Closed-form value at ``tau_star``: ``(m+n) n^(-n/(m+n)) a^(n/(m+n)) b^(m/(m+n)) / ||w||_p^2``."""
    if a <= 0:
        raise NoInteriorMinimizer("no interior minimizer: (Lw, w) <= 0")
    e = n / (m + n)
    return (m + n) * n ** (-e) * a**e * b ** (1 - e) / norm_sq


def m_energy_objective(s: WarpedSmms, w: RadialProfile, tau: float, npts: int = DEFAULT_N) -> float:
    d = quadratic_data(s, w, npts)
    return m_energy_value(d.a, d.b, d.norm_sq, s.m, s.n, tau)


def lambda_from_sigma(sigma: float, m: float, n: int) -> float:
    if sigma < 0:
        return -math.inf
    return (m + n) * (sigma / n) ** (n / (m + n))


def sigma_from_lambda(lam: float, m: float, n: int) -> float:
    """Inverse of :func:`lambda_from_sigma` on the positive branch."""
    if lam <= 0:
        raise ValueError("only positive m-energies determine sigma")
    return n * (lam / (m + n)) ** ((m + n) / n)


def renormalized_energy(lambda_m: float, m, n: int, sigma: float | None = None) -> float:
    """Renormalized m-energy; 0 whenever the weighted Yamabe constant is not positive."""
    m = parse_dim(m)
    if sigma is not None and sigma <= 0:
        return 0.0
    if math.isinf(m):
        return (2 * math.pi) ** (-n / 2) * math.exp(lambda_m / 2)
    if not lambda_m > 0:
        return 0.0
    return (2 * math.pi * math.e) ** (-n / 2) * (lambda_m / (m + n)) ** ((m + n) / 2)


def renormalized_from_sigma(sigma: float, n: int) -> float:
    if sigma <= 0:
        return 0.0
    return (sigma / (2 * math.pi * n * math.e)) ** (n / 2)


def nu_from_lambda_inf(lambda_inf: float, n: int) -> float:
    return 0.5 * lambda_inf - 0.5 * n * math.log(2 * math.pi)


def sigma_lower_bound(s: WarpedSmms, npts: int = DEFAULT_N) -> float:
    """``-C1 (int v^-n dvol)^(2m/(n(m+n))) (int v^m dvol)^(2/(m+n))`` with ``C1 = max(sup -Rphi, 0)``."""
    _check_dims(s)
    m, n = s.m, s.n
    r = s.grid(npts).r
    _, regular, values = _curvature_arrays(s, r)
    c1 = max(float(np.max(-values["Rphi"][regular])), 0.0)
    if c1 == 0.0:
        return 0.0
    inv = weighted_volume(s, offset=-m - n, npts=npts)
    vol = weighted_volume(s, npts=npts)
    return -c1 * inv ** (2 * m / (n * (m + n))) * vol ** (2 / (m + n))


# ------------------------------------------------ m = inf functional

def project_potential(s: WarpedSmms, f: RadialProfile, tau: float, npts: int = DEFAULT_N) -> float:
    """Constant c such that ``f + c`` satisfies ``int tau^(-n/2) e^(-f-phi) dvol = 1``."""
    grid = s.grid(npts)
    r = grid.r
    phi = s.phi_data(r)[0]
    mass = grid.integrate(tau ** (-s.n / 2) * np.exp(-f(r) - phi)
                          * sphere_area(s.n - 1) * s.psi(r) ** (s.n - 1))
    return math.log(mass)


def infinity_energy_evaluate(s: WarpedSmms, f: RadialProfile, tau: float,
                             npts: int = DEFAULT_N) -> tuple[float, float]:
    """The inf-energy integrand at ``(f, tau)`` after the additive normalization of f.

    Returns ``(value, shift)`` where ``f + shift`` meets the constraint and
    ``value = int [tau (R + 2 Lap F - |grad F|^2) + 2 (F - n)] tau^(-n/2) e^(-F) dvol``
    with ``F = f + shift + phi``.
    """
    if s.finite:
        raise ValueError("infinity energy needs an m = inf model")
    if not tau > 0:
        raise ValueError("tau must be positive")
    n = s.n
    shift = project_potential(s, f, tau, npts)
    grid = s.grid(npts)
    r = grid.r
    psi, dpsi, _ = s.psi.sample(r)
    _, _, values = _curvature_arrays(s, r)
    phi, dphi, d2phi = s.phi_data(r)
    ff, df, d2f = f.sample(r)
    pot, dpot, d2pot = ff + shift + phi, df + dphi, d2f + d2phi
    with np.errstate(divide="ignore", invalid="ignore"):
        lap = d2pot + (n - 1) * dpsi / psi * dpot
        scal = values["R"] + 2.0 * lap - dpot**2
        integrand = (tau * scal + 2.0 * (pot - n)) * tau ** (-n / 2) * np.exp(-pot) \
            * sphere_area(n - 1) * psi ** (n - 1)
    return _open_integrals(s, grid, integrand)[0], shift


# ---------------------------------------------------- discrete functional

@dataclass(frozen=True)
class EnergyDiscretization:
    """Nodal discretization on a uniform grid.

    Each node owns the half cells on either side; the lumped weights ``mass``
    (of ``v^m dvol``), ``curv_mass`` (of ``Rphi v^m dvol``) and ``inv_mass``
    (of ``v^(m-2) dvol``) integrate the densities over those half cells by
    Simpson's rule.  The gradient term uses the density at cell midpoints.
    """

    model: WarpedSmms
    r: np.ndarray
    h: float
    mass: np.ndarray
    curv_mass: np.ndarray
    inv_mass: np.ndarray
    flux: np.ndarray

    @classmethod
    def build(cls, s: WarpedSmms, npts: int = DEFAULT_N) -> "EnergyDiscretization":
        _check_dims(s)
        grid = s.grid(npts)
        h = grid.h
        fine = np.linspace(s.r0, s.r1, 4 * (npts - 1) + 1)
        dens = _densities(s, fine)
        lumped = []
        for d in dens:
            if not np.all(np.isfinite(d)):
                raise ValueError("energy densities are singular at a grid point "
                                 "(int v^(m-2) dvol diverges for this model and m)")
            right = h / 12 * (d[0:-1:4] + 4 * d[1::4] + d[2::4])
            left = h / 12 * (d[2::4] + 4 * d[3::4] + d[4::4])
            out = np.zeros(npts)
            out[:-1] += right
            out[1:] += left
            lumped.append(out)
        mass, curv_mass, inv_mass = lumped
        if np.any(mass <= 0):
            raise ValueError("measure weights must be positive")
        flux = dens[0][2::4]
        return cls(s, grid.r, h, mass, curv_mass, inv_mass, flux)

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def m(self) -> float:
        return self.model.m

    @property
    def coefficient(self) -> float:
        return conformal_coefficient(self.m, self.n)

    @property
    def p(self) -> float:
        return sobolev_exponent(self.m, self.n)

    def stiffness(self, w):
        """``K w`` where ``w.K w = sum flux (dw)^2 / h``."""
        t = self.flux * np.diff(w) / self.h
        out = np.zeros_like(w)
        out[:-1] -= t
        out[1:] += t
        return out

    def stiffness_bands(self):
        k = self.flux / self.h
        diag = np.zeros(self.r.size)
        diag[:-1] += k
        diag[1:] += k
        return diag, -k

    def laplacian_apply(self, w):
        """Weak form of ``L w``: ``c K w + curv_mass w``."""
        return self.coefficient * self.stiffness(w) + self.curv_mass * w

    def a(self, w) -> float:
        return float(w @ self.laplacian_apply(w))

    def b(self, w) -> float:
        return float(self.inv_mass @ (w * w))

    def power_sum(self, w) -> float:
        return float(self.mass @ np.abs(w) ** self.p)

    def norm_sq(self, w) -> float:
        return self.power_sum(w) ** (2.0 / self.p)

    def normalize(self, w):
        return w / self.power_sum(w) ** (1.0 / self.p)

    def sample(self, w: RadialProfile):
        return np.asarray(w(self.r), dtype=float)

    def strong(self, weak):
        """Nodal values of an operator from its weak form."""
        return weak / self.mass

    def l2_sq(self, w) -> float:
        return float(self.mass @ (w * w))

    def gradient_sq(self, w) -> float:
        return float(w @ self.stiffness(w))

    def preconditioner(self, shift: float):
        diag, off = self.stiffness_bands()
        c = self.coefficient
        bands = np.zeros((3, self.r.size))
        bands[0, 1:] = c * off
        bands[1] = c * diag + shift * self.mass
        bands[2, :-1] = c * off
        return bands


# -------------------------------------------------------------- objectives

class _Objective:
    """A homogeneous quotient ``w.H w / ||w||_p^2`` (or a monotone function of one)."""

    def __init__(self, disc: EnergyDiscretization):
        self.disc = disc

    def update(self, w) -> None:
        pass

    def precond_scale(self, w) -> float:
        """Factor relating the gradient to ``2 (H w - lam M w^(p-1))`` at unit norm."""
        return 1.0

    def operator(self, w):
        raise NotImplementedError

    def value(self, w) -> float:
        raise NotImplementedError

    def gradient(self, w):
        raise NotImplementedError

    def residual(self, w) -> tuple[float, float]:
        """Max-norm residual of ``H w = lam w^(p-1)`` at ``||w||_p = 1`` and the multiplier."""
        d = self.disc
        w = d.normalize(w)
        hw = self.operator(w)
        lam = float(w @ hw)
        res = d.strong(hw) - lam * w ** (d.p - 1)
        return float(np.max(np.abs(res))), lam

    def critical_scalar(self, w):
        """``Rphi_hat + m mu_eff v_hat^-2`` of the changed model, pointwise (should be constant)."""
        d = self.disc
        w = d.normalize(w)
        return d.strong(self.operator(w)) / w ** (d.p - 1)


class MmuObjective(_Objective):
    """``(a + m mu b) / ||w||_p^2``."""

    def __init__(self, disc, mu: float):
        super().__init__(disc)
        self.mu = float(mu)

    def operator(self, w):
        d = self.disc
        return d.laplacian_apply(w) + d.m * self.mu * d.inv_mass * w

    def value(self, w):
        return float(w @ self.operator(w)) / self.disc.norm_sq(w)

    def gradient(self, w):
        d = self.disc
        s = d.power_sum(w)
        hw = self.operator(w)
        val = float(w @ hw) / s ** (2 / d.p)
        return 2.0 * (hw - val * d.mass * w ** (d.p - 1) * s ** (2 / d.p - 1)) / s ** (2 / d.p)


class TauObjective(MmuObjective):
    """``(tau^(m/(m+n)) a + m tau^(-n/(m+n)) b) / ||w||_p^2``; tau follows ``n b / a`` on update."""

    def __init__(self, disc, tau: float = 1.0, follow: bool = True):
        super().__init__(disc, 1.0 / tau)
        self.tau = float(tau)
        self.follow = follow

    @property
    def scale(self) -> float:
        d = self.disc
        return self.tau ** (d.m / (d.m + d.n))

    def update(self, w):
        if self.follow:
            d = self.disc
            self.tau = tau_star(d.a(w), d.b(w), d.m, d.n)
            self.mu = 1.0 / self.tau

    def operator(self, w):
        return self.scale * super().operator(w)

    def precond_scale(self, w):
        return self.scale


class YamabeObjective(_Objective):
    """``a b^(m/n) / S^((m+n-2)/n)``."""

    def value(self, w):
        d = self.disc
        m, n = d.m, d.n
        return d.a(w) * d.b(w) ** (m / n) / d.power_sum(w) ** ((m + n - 2) / n)

    def gradient(self, w):
        d = self.disc
        m, n = d.m, d.n
        a, b, s = d.a(w), d.b(w), d.power_sum(w)
        e = (m + n - 2) / n
        val = a * b ** (m / n) / s**e
        grad = 2.0 * d.laplacian_apply(w) * b ** (m / n) / s**e
        if m != 0:
            grad = grad + a * (m / n) * b ** (m / n - 1) * 2.0 * d.inv_mass * w / s**e
        return grad - val * e * d.p * d.mass * w ** (d.p - 1) / s

    def precond_scale(self, w):
        d = self.disc
        return d.b(d.normalize(w)) ** (d.m / d.n) if d.m != 0 else 1.0

    def operator(self, w):
        # critical points solve  L w + (m a /(n b)) v^-2 w = lam w^(p-1)
        d = self.disc
        coupling = d.m * d.a(w) / (d.n * d.b(w)) if d.m != 0 else 0.0
        return d.laplacian_apply(w) + coupling * d.inv_mass * w


# ------------------------------------------------------------- descent

@dataclass
class DescentResult:
    w: np.ndarray
    value: float
    residual: float
    multiplier: float
    iterations: int
    converged: bool
    history: list = field(default_factory=list)
    reason: str = ""


def _descend(obj: _Objective, w0, tol: float, max_iter: int) -> DescentResult:
    """Preconditioned gradient descent with Armijo backtracking that keeps w > 0.

    The direction solves ``(c K + shift M) d = -grad`` (a discrete H^1 Riesz
    map); the objective is homogeneous of degree 0, so renormalizing to
    ``||w||_p = 1`` after a step is an exact projection.
    """
    d = obj.disc
    w = d.normalize(np.asarray(w0, dtype=float))
    if np.any(w <= 0):
        raise ValueError("initial w must be strictly positive")
    obj.update(w)
    history = [obj.value(w)]
    for it in range(max_iter + 1):
        res, lam = obj.residual(w)
        # certify both the equation and the constancy of the changed scalar
        if res < tol and float(np.max(np.abs(obj.critical_scalar(w) - lam))) < 10 * tol:
            return DescentResult(w, history[-1], res, lam, it, True, history)
        if it == max_iter:
            break
        val = history[-1]
        grad = obj.gradient(w)
        scale = obj.precond_scale(w)
        potential = d.strong(obj.operator(np.ones_like(w))) / scale
        shift = abs(lam) / scale + max(0.0, -float(np.min(potential))) + 1e-12
        step = -solve_banded((1, 1), d.preconditioner(shift), grad) / (2.0 * scale)
        slope = float(grad @ step)
        if slope >= 0:
            return DescentResult(w, val, res, lam, it, False, history, "not a descent direction")
        t = 1.0
        while True:
            trial = w + t * step
            if np.all(trial > 0):
                tv = obj.value(trial)
                if tv <= val + 1e-4 * t * slope:
                    break
                if tv <= val and t < 1e-6:
                    break  # round-off level decrease
            t *= 0.5
            if t < 1e-16:
                return DescentResult(w, val, res, lam, it, False, history, "line search stalled")
        w = d.normalize(trial)
        obj.update(w)
        history.append(obj.value(w))
    return DescentResult(w, history[-1], res, lam, max_iter, False, history, "maximum iterations reached")


# ------------------------------------------------------------- reports

_REPORT_KEYS = ("sigma", "lambda_mmu", "lambda_m", "lambda_bar", "tau_star",
                "el_residual", "iterations", "converged")


@dataclass(frozen=True)
class EnergyReport:
    sigma: float | None
    lambda_mmu: float | None
    lambda_m: float | None
    lambda_bar: float | None
    tau_star: float | None
    minimizer: RadialProfile | None
    el_residual: float
    iterations: int
    converged: bool
    r: np.ndarray | None = None
    w: np.ndarray | None = None
    constancy: float | None = None
    flags: tuple = ()
    history: tuple = ()
    reason: str = ""

    def summary(self) -> dict:
        """The serialized fields in fixed order (plus ``flags``)."""
        out = {k: getattr(self, k) for k in _REPORT_KEYS}
        out["flags"] = list(self.flags)
        return out

    def profile_columns(self) -> dict:
        return {"r": self.r, "w": self.w}


def _initial(disc: EnergyDiscretization, w0) -> np.ndarray:
    if w0 is None:
        return np.ones_like(disc.r)
    if isinstance(w0, EnergyReport):
        return disc.sample(w0.minimizer)
    if isinstance(w0, RadialProfile):
        return disc.sample(w0)
    w0 = np.asarray(w0, dtype=float)
    if w0.shape != disc.r.shape:
        raise ValueError("initial array must match the grid")
    return w0


def _flags(s: WarpedSmms) -> tuple:
    return (NO_COMPACTNESS,) if s.m == 0 else ()


def _constancy(obj: _Objective, w) -> float:
    """Max deviation of the changed model's ``Rphi_hat + m mu v_hat^-2`` from the multiplier."""
    lam = obj.residual(w)[1]
    return float(np.max(np.abs(obj.critical_scalar(w) - lam)))


def minimize_mmu_energy(s: WarpedSmms, w0=None, *, mu: float | None = None, npts: int = DEFAULT_N,
                        tol: float = DEFAULT_TOL, max_iter: int = DEFAULT_MAX_ITER) -> EnergyReport:
    """Minimize ``(a + m mu b)/||w||_p^2`` over positive radial w."""
    mu = s.mu if mu is None else mu
    if mu is None:
        raise ValueError("a characteristic constant mu is required")
    disc = EnergyDiscretization.build(s, npts)
    obj = MmuObjective(disc, mu)
    out = _descend(obj, _initial(disc, w0), tol, max_iter)
    return EnergyReport(None, out.value, None, None, None, RadialProfile.from_samples(disc.r, out.w),
                        out.residual, out.iterations, out.converged, disc.r, out.w,
                        _constancy(obj, out.w), _flags(s), tuple(out.history), out.reason)


def minimize_yamabe_quotient(s: WarpedSmms, w0=None, *, npts: int = DEFAULT_N, tol: float = DEFAULT_TOL,
                             max_iter: int = DEFAULT_MAX_ITER) -> EnergyReport:
    """Direct minimization of the weighted Yamabe quotient (estimate of sigma)."""
    disc = EnergyDiscretization.build(s, npts)
    obj = YamabeObjective(disc)
    out = _descend(obj, _initial(disc, w0), tol, max_iter)
    return EnergyReport(out.value, None, None, None, None, RadialProfile.from_samples(disc.r, out.w),
                        out.residual, out.iterations, out.converged, disc.r, out.w,
                        _constancy(obj, out.w), _flags(s), tuple(out.history), out.reason)


def minimize_m_energy(s: WarpedSmms, w0=None, *, npts: int = DEFAULT_N, tol: float = DEFAULT_TOL,
                      max_iter: int = DEFAULT_MAX_ITER) -> EnergyReport:
    """Minimize the m-energy quotient jointly in (w, tau).

    Each iteration sets tau to its closed-form optimum for the current w and
    then takes one descent step in w.  sigma is recovered by inverting the
    energy/Yamabe relation.  If the first eigenvalue of L is not positive
    (so sigma <= 0) the m-energy is -inf or 0, tau has no interior optimum
    and sigma is estimated by direct Yamabe minimization instead.
    """
    disc = EnergyDiscretization.build(s, npts)
    m, n = s.m, s.n
    lam0, eigfn = _first_eigen(disc)
    if lam0 <= 0:
        seed = eigfn if w0 is None else w0
        rep = minimize_yamabe_quotient(s, seed, npts=npts, tol=tol, max_iter=max_iter)
        lam = -math.inf if lam0 < 0 else 0.0
        return EnergyReport(rep.sigma, None, lam, 0.0, None, rep.minimizer, rep.el_residual,
                            rep.iterations, rep.converged, rep.r, rep.w, rep.constancy,
                            rep.flags + ("sigma <= 0: no interior tau minimizer",), rep.history,
                            rep.reason)
    w_init = _initial(disc, w0)
    if disc.a(w_init) <= 0:
        w_init = _first_eigen(disc)[1]
    obj = TauObjective(disc)
    out = _descend(obj, w_init, tol, max_iter)
    lam = out.value
    sigma = sigma_from_lambda(lam, m, n)
    report_tau = tau_star(disc.a(out.w), disc.b(out.w), m, n)
    return EnergyReport(sigma, None, lam, renormalized_energy(lam, m, n, sigma), report_tau,
                        RadialProfile.from_samples(disc.r, out.w), out.residual, out.iterations,
                        out.converged, disc.r, out.w, _constancy(obj, out.w), _flags(s),
                        tuple(out.history), out.reason)


def scaled_inverse_integral(report: EnergyReport, s: WarpedSmms, npts: int | None = None) -> float:
    """``int v_hat^(m-2) dvol_hat`` for the minimizing pair, normalized so the new measure has mass 1."""
    disc = EnergyDiscretization.build(s, npts or report.r.size)
    w = disc.normalize(report.w)
    tau, m = report.tau_star, s.m
    # rescaling w -> tau^(-m/(2p)) w makes tau^(m/2) ||w||_p^p = 1
    return tau ** ((m - 2) / 2) * tau ** (-m / disc.p) * disc.b(w)


# --------------------------------------------------------- eigenvalue

def _first_eigen(disc: EnergyDiscretization):
    diag, off = disc.stiffness_bands()
    c = disc.coefficient
    scale = 1.0 / np.sqrt(disc.mass)
    d = (c * diag + disc.curv_mass) * scale**2
    e = c * off * scale[:-1] * scale[1:]
    vals, vecs = eigh_tridiagonal(d, e, select="i", select_range=(0, 0))
    y = vecs[:, 0] * scale
    if y[np.argmax(np.abs(y))] < 0:
        y = -y
    y /= math.sqrt(disc.l2_sq(y))
    return float(vals[0]), y


def first_eigenvalue(s: WarpedSmms, npts: int = DEFAULT_N) -> tuple[float, RadialProfile]:
    """Lowest eigenvalue of L (Rayleigh quotient ``(Lw, w)/||w||_2^2``) and its eigenfunction."""
    disc = EnergyDiscretization.build(s, npts)
    lam, y = _first_eigen(disc)
    return lam, RadialProfile.from_samples(disc.r, y)


def directional_check(obj: _Objective, w, direction, step: float = 1e-5) -> tuple[float, float]:
    """Analytic directional derivative and its central difference."""
    analytic = float(obj.gradient(w) @ direction)
    fd = (obj.value(w + step * direction) - obj.value(w - step * direction)) / (2 * step)
    return analytic, fd
