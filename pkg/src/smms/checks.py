"""Identity and inequality checks evaluated on concrete radial models.

Most checks take a quasi-Einstein *scale representation*: a model
``(M, g, 1^m dvol)`` with ``v = 1``, a potential f with scale
``u = exp(f/(m+n-2))`` satisfying ``Ric + Hess f + df (x) df/(m+n-2) = mu g``,
the characteristic constant ``mu`` and the quasi-Einstein constant ``lam`` of
u.  :func:`as_scale_data` builds one from a shooting solution or from a
built-in model carrying a scale.

Warped-product reduction
------------------------
With ``g = dr^2 + psi^2 g_S`` and ``g_T = psi^2 g_S`` the weighted Weyl
tensor is ``A = a_sph (g_T ^ g_T)/2 + a_rad (dr^2 ^ g_T)`` where

    a_rad = K_rad - P_rad - P_sph,     a_sph = K_sph - 2 P_sph.

In an orthonormal frame ``(e_r, e_i)`` the only independent components of
the divergence (contracted in the first slot), of ``A(grad f)``, of the
exterior derivative of P and of its divergence are

    div A (e_i, e_r, e_i) = a_rad' + (n-2) (psi'/psi) (a_rad - a_sph)
    A(grad f)(e_i, e_r, e_i) = f' a_rad
    dP (e_r, e_i, e_i)     = P_sph' - (psi'/psi) (P_rad - P_sph)
    div P (e_r)            = P_rad' + (n-1) (psi'/psi) (P_rad - P_sph)

:func:`channel_reduction_check` confirms these against a covariant
divergence of the full coordinate tensors.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import curvature_algebra as ca
from . import variational as var
from .grid import DEFAULT_N, RadialGrid, extrapolate_ends
from .warped_smms import (
    QeSolution,
    RadialProfile,
    WarpedSmms,
    _curvature_arrays,
    build_model,
    hyperbolic_gaussian_model,
    solve_qe_ode,
    sphere_area,
    sphere_model,
    tilted_sphere_model,
    weighted_volume,
)

PASS, FAIL, SKIPPED = "pass", "fail", "skipped"
DEFAULT_SAMPLES = 200


# ------------------------------------------------------------- result type

@dataclass(frozen=True)
class CheckResult:
    """Outcome of one check.

    ``margin`` is the smallest normalized slack ``(rhs - lhs)/(|lhs| + |rhs|)``
    for inequalities (positive means the inequality holds) and ``None`` for
    identities, which report residuals in ``measured`` instead.
    ``expected`` is ``"fail"`` for negative controls.
    """

    name: str
    status: str
    measured: dict
    bound: dict
    tolerance: float
    model: dict
    margin: float | None = None
    detail: str = ""
    expected: str = PASS

    @property
    def as_expected(self) -> bool:
        return self.status == SKIPPED or self.status == self.expected

    def to_dict(self) -> dict:
        return {"name": self.name, "status": self.status, "expected": self.expected,
                "as_expected": self.as_expected, "margin": self.margin, "tolerance": self.tolerance,
                "measured": dict(self.measured), "bound": dict(self.bound), "model": dict(self.model),
                "detail": self.detail}


def _status(ok: bool) -> str:
    return PASS if ok else FAIL


SLACK_FLOOR = 1e-6


def normalized_slack(lhs, rhs, floor: float = 0.0) -> np.ndarray:
    """``(rhs - lhs)/max(|lhs| + |rhs|, floor)``, 0 where both sides vanish."""
    lhs, rhs = np.asarray(lhs, dtype=float), np.asarray(rhs, dtype=float)
    scale = np.maximum(np.abs(lhs) + np.abs(rhs), floor)
    with np.errstate(invalid="ignore", divide="ignore"):
        return np.where(scale > 0, (rhs - lhs) / np.where(scale > 0, scale, 1.0), 0.0)


def inequality_result(name, lhs, rhs, *, tol, model, strict, measured=None, bound=None,
                      detail="", skip_reason=None) -> CheckResult:
    """``lhs <= rhs`` (``<`` when strict) at every sample.

    A non-strict inequality fails when the margin is below ``-tol``; a strict
    one also fails when the margin does not exceed ``tol`` (equality to
    within rounding is not strict).  Samples where both sides are below
    ``SLACK_FLOOR`` times the largest side are normalized by that floor, so
    rounding noise near a common zero does not read as a relative gap of 1.
    """
    both = np.abs(np.asarray(lhs, dtype=float)) + np.abs(np.asarray(rhs, dtype=float))
    floor = SLACK_FLOOR * float(np.max(both)) if both.size else 0.0
    slack = normalized_slack(lhs, rhs, floor)
    margin = float(np.min(slack)) if slack.size else float("nan")
    worst = int(np.argmin(slack)) if slack.size else -1
    meas = {"lhs_at_worst": float(np.ravel(lhs)[worst]) if worst >= 0 else None,
            "rhs_at_worst": float(np.ravel(rhs)[worst]) if worst >= 0 else None,
            "samples": int(slack.size)}
    meas.update(measured or {})
    if skip_reason:
        status = SKIPPED
        detail = skip_reason if not detail else f"{skip_reason}; {detail}"
    else:
        status = _status(margin > tol if strict else margin >= -tol)
    bnd = {"relation": "<" if strict else "<="}
    bnd.update(bound or {})
    return CheckResult(name, status, meas, bnd, tol, model, margin, detail)


def negative(result: CheckResult, detail: str) -> CheckResult:
    """Relabel a check run on corrupted input as a negative control."""
    text = f"negative control: {detail}" + (f"; {result.detail}" if result.detail else "")
    return CheckResult(result.name + "[negative]", result.status, result.measured, result.bound,
                       result.tolerance, result.model, result.margin, text, FAIL)


# ------------------------------------------------------------ scale data

@dataclass(frozen=True)
class ScaleData:
    """``(M, g, 1^m dvol)`` with a quasi-Einstein scale ``u = exp(f/(m+n-2))``."""

    model: WarpedSmms
    f: RadialProfile
    lam: float
    mu: float
    label: str

    @property
    def n(self) -> int:
        return self.model.n

    @property
    def m(self) -> float:
        return self.model.m

    @property
    def compact(self) -> bool:
        return self.model.closed

    def describe(self) -> dict:
        out = self.model.describe()
        out.update({"label": self.label, "mu": self.mu, "lam": self.lam})
        return out

    def u_data(self, r):
        c = self.m + self.n - 2
        f, df, d2f = self.f.sample(r)
        u = np.exp(f / c)
        return u, u * df / c, u * (d2f / c + (df / c) ** 2)


def _has_trivial_density(s: WarpedSmms) -> bool:
    probe = np.linspace(s.r0, s.r1, 17)
    if s.density_kind == "v":
        return bool(np.allclose(s.density(probe), 1.0, rtol=0, atol=1e-14))
    return bool(np.allclose(s.density(probe), 0.0, rtol=0, atol=1e-14))


def _log_scale(u: RadialProfile, c: float) -> RadialProfile:
    def data(r):
        uu, du, d2u = u.sample(r)
        return c * np.log(uu), c * du / uu, c * (d2u / uu - (du / uu) ** 2)

    return RadialProfile.closed_form(lambda r: data(r)[0], lambda r: data(r)[1],
                                     lambda r: data(r)[2], u.r0, u.r1)


def as_scale_data(obj) -> ScaleData:
    """Scale representation of a shooting solution or of a ``v = 1`` model.

    Einstein models without an explicit scale use ``f = 0`` with
    ``lam = mu = `` their Einstein constant; flat space uses ``lam = mu = 0``.
    """
    if isinstance(obj, ScaleData):
        return obj
    if isinstance(obj, QeSolution):
        return ScaleData(obj.model, obj.f, obj.lam, obj.mu, "qe-solution")
    if not isinstance(obj, WarpedSmms):
        raise TypeError(f"cannot build scale data from {type(obj).__name__}")
    s = obj
    if not s.finite:
        raise ValueError("scale representations need finite m")
    if not _has_trivial_density(s):
        raise ValueError(f"model {s.label!r} is not of the form (M, g, 1^m dvol); "
                         "pass its quasi-Einstein scale representation instead")
    c = s.m + s.n - 2
    if s.scale is not None:
        if s.mu is None or s.qe_constant is None:
            raise ValueError("scale needs both constants")
        return ScaleData(s, _log_scale(s.scale, c), float(s.qe_constant), float(s.mu), s.label)
    if s.qe_constant is None:
        raise ValueError(f"model {s.label!r} carries no quasi-Einstein data")
    mu = float(s.mu) if s.mu is not None else float(s.qe_constant)
    zero = RadialProfile.constant(0.0, s.r0, s.r1)
    return ScaleData(s, zero, float(s.qe_constant), mu, s.label)


def perturbed(data: ScaleData, eps: float) -> ScaleData:
    """Same metric with ``f + eps cos(pi r / r1)`` (no longer quasi-Einstein for eps != 0)."""
    base = data.f
    k = math.pi / (data.model.r1 - data.model.r0)

    def add(order):
        def fn(r):
            x = k * (np.asarray(r, dtype=float) - data.model.r0)
            bump = (np.cos(x), -k * np.sin(x), -(k**2) * np.cos(x))[order]
            return base.sample(r)[order] + eps * bump
        return fn

    f = RadialProfile.closed_form(add(0), add(1), add(2), base.r0, base.r1)
    return ScaleData(data.model, f, data.lam, data.mu, data.label + f"+perturb({eps:g})")


def misscaled(data: ScaleData, factor: float) -> ScaleData:
    """Claim the quasi-Einstein constant ``factor * lam`` without changing anything else."""
    return ScaleData(data.model, data.f, data.lam * factor, data.mu, data.label + f"*lam({factor:g})")


# ----------------------------------------------------------- Weyl channels

@dataclass(frozen=True)
class WeylChannels:
    r: np.ndarray
    psi: np.ndarray
    hubble: np.ndarray  # psi'/psi
    k_rad: np.ndarray
    k_sph: np.ndarray
    ric_rad: np.ndarray
    ric_sph: np.ndarray
    scal: np.ndarray
    p_rad: np.ndarray
    p_sph: np.ndarray
    a_rad: np.ndarray
    a_sph: np.ndarray
    f: np.ndarray
    df: np.ndarray
    d2f: np.ndarray


def weyl_channels(data: ScaleData, r) -> WeylChannels:
    s = data.model
    n, m, mu = s.n, s.m, data.mu
    c = m + n - 2
    r, _, values = _curvature_arrays(s, r)
    psi, dpsi, _ = s.psi.sample(r)
    f, df, d2f = data.f.sample(r)
    with np.errstate(divide="ignore", invalid="ignore"):
        hubble = dpsi / psi
        shift = (values["R"] + m * mu) / (2 * (m + n - 1))
        p_rad = (values["Ric_rad"] - shift) / c
        p_sph = (values["Ric_sph"] - shift) / c
        a_rad = values["K_rad"] - p_rad - p_sph
        a_sph = values["K_sph"] - 2 * p_sph
    return WeylChannels(r, psi, hubble, values["K_rad"], values["K_sph"], values["Ric_rad"],
                        values["Ric_sph"], values["R"], p_rad, p_sph, a_rad, a_sph,
                        np.asarray(f, float), np.asarray(df, float), np.asarray(d2f, float))


def weyl_norm_sq(a_rad, a_sph, n: int):
    """``|A|^2`` of ``a_sph (g_T^g_T)/2 + a_rad dr^2^g_T`` in the quarter-sum norm."""
    return (n - 1) * (n - 2) * np.asarray(a_sph) ** 2 / 2 + (n - 1) * np.asarray(a_rad) ** 2


def pointwise_tensors(data: ScaleData, r: float) -> dict:
    """Orthonormal-frame tensors at one radius: g, Rm, Ric, P, A, Hess f, df(x)df."""
    ch = weyl_channels(data, np.array([float(r)]))
    n = data.n
    g = ca.SymForm.identity(n)
    radial = np.zeros((n, n))
    radial[0, 0] = 1.0
    dr2 = ca.SymForm(radial)
    tangential = g - dr2
    rm = ca.kn_wedge(tangential, tangential) * (0.5 * ch.k_sph[0]) + ca.kn_wedge(dr2, tangential) * ch.k_rad[0]
    ric = ca.contract(rm, g)
    p = ca.weighted_schouten(ric, ric.trace(), g, data.m, data.mu)
    hess = dr2 * ch.d2f[0] + tangential * (ch.hubble[0] * ch.df[0])
    return {"g": g, "rm": rm, "ric": ric, "p": p, "a": rm - ca.kn_wedge(p, g),
            "hess_f": hess, "df2": dr2 * ch.df[0] ** 2, "scal": float(ric.trace())}


# ----------------------------------------------------- divergence identity

def _interior(r, r0, r1, trim):
    span = r1 - r0
    return (r > r0 + trim * span) & (r < r1 - trim * span)


def div_free_residuals(data: ScaleData, npts: int = DEFAULT_N, trim: float = 0.05) -> dict:
    """Channel residuals on the grid, derivatives by second-order central differences.

    Nodes within ``trim`` of either end are excluded so that the measured region
    is the same for every grid size (the reduction is singular at poles).
    """
    grid = data.model.grid(npts)
    ch = weyl_channels(data, grid.r)
    h = grid.h
    n, m = data.n, data.m
    c = m + n - 2
    d_a_rad = np.gradient(ch.a_rad, h)
    d_p_sph = np.gradient(ch.p_sph, h)
    d_p_rad = np.gradient(ch.p_rad, h)
    d_scal = np.gradient(ch.scal, h)
    with np.errstate(invalid="ignore"):
        div_a = d_a_rad + (n - 2) * ch.hubble * (ch.a_rad - ch.a_sph)
        a_grad_f = ch.df * ch.a_rad
        d_p = d_p_sph - ch.hubble * (ch.p_rad - ch.p_sph)
        div_p = d_p_rad + (n - 1) * ch.hubble * (ch.p_rad - ch.p_sph)
    keep = _interior(grid.r, grid.r0, grid.r1, trim)
    keep[[0, -1]] = False

    def worst(x):
        return float(np.max(np.abs(x[keep])))

    return {
        "div_a_vs_a_grad_f": worst(div_a - (m + n - 3) / c * a_grad_f),
        "a_grad_f_vs_dP": worst(a_grad_f - c * d_p),
        "div_a_vs_dP": worst(div_a - (m + n - 3) * d_p),
        "div_P_vs_dR": worst(div_p - d_scal / (2 * (m + n - 1))),
        "div_a_size": worst(div_a),
        "a_grad_f_size": worst(a_grad_f),
        "npts": npts,
    }


def div_free_check(qe, npts: int = DEFAULT_N, tol: float = 1e-6, trim: float = 0.05) -> CheckResult:
    """``div A = (m+n-3)/(m+n-2) A(grad f)`` together with its two ingredients.

    Passes when every residual is below ``tol`` (absolute).
    """
    data = as_scale_data(qe)
    res = div_free_residuals(data, npts, trim)
    keys = ("div_a_vs_a_grad_f", "a_grad_f_vs_dP", "div_a_vs_dP", "div_P_vs_dR")
    ok = all(res[k] <= tol for k in keys)
    return CheckResult("div_free", _status(ok), res, {"residual_max": tol}, tol, data.describe())


def measured_orders(values, sizes) -> list[float]:
    """Convergence orders ``log(e_k/e_{k+1})/log(h_k/h_{k+1})`` on successive grids."""
    out = []
    for (e0, n0), (e1, n1) in zip(zip(values, sizes), zip(values[1:], sizes[1:])):
        ratio = (n1 - 1) / (n0 - 1)
        out.append(math.log(e0 / e1) / math.log(ratio) if e0 > 0 and e1 > 0 else float("inf"))
    return out


def div_free_refinement(qe, sizes=(129, 257, 513, 1025), declared: float = 2.0,
                        slack: float = 0.3, trim: float = 0.05) -> CheckResult:
    """Refinement study of the div A vs A(grad f) residual; passes if every order >= declared - slack."""
    data = as_scale_data(qe)
    res = [div_free_residuals(data, npts, trim)["div_a_vs_a_grad_f"] for npts in sizes]
    orders = measured_orders(res, sizes)
    need = declared - slack
    ok = all(o >= need for o in orders)
    return CheckResult("div_free_order", _status(ok),
                       {"sizes": list(sizes), "residuals": res, "orders": orders,
                        "min_order": min(orders)},
                       {"min_order": need}, slack, data.describe())


# -------------------------------------------- full-tensor cross-validation

def _coordinate_tensors(data: ScaleData, x):
    """Metric, A and P in coordinates ``(r, stereographic theta)`` at point x."""
    n = data.n
    r, theta = float(x[0]), np.asarray(x[1:], dtype=float)
    ch = weyl_channels(data, np.array([r]))
    conf = 2.0 / (1.0 + theta @ theta)
    radial = np.zeros((n, n))
    radial[0, 0] = 1.0
    tangential = np.zeros((n, n))
    tangential[1:, 1:] = np.eye(n - 1) * (ch.psi[0] * conf) ** 2
    metric = radial + tangential
    dr2, gt = ca.SymForm(radial), ca.SymForm(tangential)
    a = ca.kn_wedge(gt, gt).comps * (0.5 * ch.a_sph[0]) + ca.kn_wedge(dr2, gt).comps * ch.a_rad[0]
    p = radial * ch.p_rad[0] + tangential * ch.p_sph[0]
    return metric, a, p


def full_tensor_derivatives(data: ScaleData, r: float, step: float = 1e-4, theta=None) -> dict:
    """Covariant divergence of A, exterior derivative and divergence of P by central differences.

    Returned in the orthonormal frame at ``(r, theta)``, restricted to the
    components named in the module docstring.
    """
    n = data.n
    if theta is None:
        theta = 0.3 * np.array([1.0, -0.7, 0.5, 0.9, -0.4, 0.2, 0.6][: n - 1])
    x = np.concatenate([[float(r)], np.asarray(theta, dtype=float)])
    metric, a, p = _coordinate_tensors(data, x)
    inv = np.linalg.inv(metric)
    d_metric = np.empty((n, n, n))
    d_a = np.empty((n,) * 5)
    d_p = np.empty((n, n, n))
    for k in range(n):
        e = np.zeros(n)
        e[k] = step
        gp, ap, pp = _coordinate_tensors(data, x + e)
        gm, am, pm = _coordinate_tensors(data, x - e)
        d_metric[k], d_a[k], d_p[k] = (gp - gm) / (2 * step), (ap - am) / (2 * step), (pp - pm) / (2 * step)
    # christoffel[e, k, a] = Gamma^e_{ka}
    lowered = 0.5 * (np.einsum("kla->kal", d_metric) + np.einsum("alk->kal", d_metric)
                     - np.einsum("lka->kal", d_metric))
    christoffel = np.einsum("el,kal->eka", inv, lowered)
    nabla_a = (d_a - np.einsum("eka,ebcd->kabcd", christoffel, a)
               - np.einsum("ekb,aecd->kabcd", christoffel, a)
               - np.einsum("ekc,abed->kabcd", christoffel, a)
               - np.einsum("ekd,abce->kabcd", christoffel, a))
    nabla_p = (d_p - np.einsum("eka,eb->kab", christoffel, p) - np.einsum("ekb,ae->kab", christoffel, p))
    div_a = np.einsum("ka,kabcd->bcd", inv, nabla_a)
    ext_p = nabla_p - nabla_p.transpose(1, 0, 2)
    div_p = np.einsum("ka,kab->b", inv, nabla_p)
    ch = weyl_channels(data, np.array([float(r)]))
    frame = np.eye(n)
    frame[1:, 1:] /= ch.psi[0] * 2.0 / (1.0 + theta @ theta)
    div_a = np.einsum("bcd,bi,cj,dk->ijk", div_a, frame, frame, frame)
    ext_p = np.einsum("abc,ai,bj,ck->ijk", ext_p, frame, frame, frame)
    div_p = frame.T @ div_p
    return {"div_a": float(div_a[1, 0, 1]), "d_p": float(ext_p[0, 1, 1]), "div_p": float(div_p[0]),
            "off_channel": float(max(np.max(np.abs(div_a[0, 1, 1])), np.max(np.abs(div_a[0, 0, 0]))))}


def channel_derivatives(data: ScaleData, r: float, step: float = 1e-4) -> dict:
    """The channel formulas at one radius, r-derivatives by the same central stencil."""
    pts = np.array([r - step, r, r + step])
    ch = weyl_channels(data, pts)
    n = data.n

    def deriv(y):
        return (y[2] - y[0]) / (2 * step)

    hub = ch.hubble[1]
    return {"div_a": deriv(ch.a_rad) + (n - 2) * hub * (ch.a_rad[1] - ch.a_sph[1]),
            "d_p": deriv(ch.p_sph) - hub * (ch.p_rad[1] - ch.p_sph[1]),
            "div_p": deriv(ch.p_rad) + (n - 1) * hub * (ch.p_rad[1] - ch.p_sph[1])}


def channel_reduction_check(qe, radii=None, step: float = 1e-4, tol: float = 1e-6) -> CheckResult:
    """Channel formulas against full coordinate tensors at a few radii (relative error)."""
    data = as_scale_data(qe)
    s = data.model
    if radii is None:
        radii = s.r0 + (s.r1 - s.r0) * np.array([0.2, 0.45, 0.7])
    worst = 0.0
    rows = []
    for r in np.atleast_1d(radii):
        full = full_tensor_derivatives(data, float(r), step)
        red = channel_derivatives(data, float(r), step)
        errs = {k: abs(full[k] - red[k]) / max(1.0, abs(red[k])) for k in red}
        worst = max(worst, max(errs.values()), full["off_channel"])
        rows.append({"r": float(r), **{f"full_{k}": full[k] for k in red},
                     **{f"channel_{k}": red[k] for k in red}})
    return CheckResult("channel_reduction", _status(worst <= tol), {"max_error": float(worst), "points": rows},
                       {"max_error": tol}, tol, data.describe())


# --------------------------------------------------- Laplacian right sides

def laplacian_sides(data: ScaleData, r: float) -> dict:
    """Both right-hand sides of the weighted-Weyl Laplacian formula at one radius."""
    t = pointwise_tensors(data, r)
    g, rm, p, a = t["g"], t["rm"], t["p"], t["a"]
    m, n, mu = data.m, data.n, data.mu
    c = m + n - 2
    tr_a = ca.trace(a)
    closed = (a * (2 * mu) - ca.sym_dot(a, a) - ca.sharp_square(a)
              - ca.kn_wedge(tr_a, tr_a) * (1.0 / m)
              + ca.kn_wedge(ca.contract(a, t["df2"]), g) * (2.0 / c**2))
    almost = (a * (2 * mu) - ca.sym_dot(rm, a) - ca.square(rm, a)
              - ca.kn_wedge(ca.contract(a, t["hess_f"] - t["df2"] * (1.0 / c)), g) * (1.0 / c))
    lhs2 = p + t["hess_f"] * (1.0 / c) - t["df2"] * (1.0 / c**2)
    rhs2 = -(t["df2"] * (2.0 / c) + g * ((t["scal"] - (m + 2 * n - 2) * mu) / (2 * (m + n - 1)))) * (1.0 / c)
    return {"closed": closed, "almost": almost,
            "shifted_schouten_residual": float(np.max(np.abs(lhs2.comps - rhs2.comps)))}


def laplacian_rhs_equivalence(qe, radii=None, count: int = 20, tol: float = 1e-10) -> CheckResult:
    """Max-abs difference of the two right-hand sides over sample radii."""
    data = as_scale_data(qe)
    if data.m <= 0:
        raise ValueError("the closed form divides by m; need m > 0")
    s = data.model
    if radii is None:
        radii = np.linspace(s.r0, s.r1, count + 2)[1:-1]
    diff = scale = shifted = 0.0
    for r in np.atleast_1d(radii):
        sides = laplacian_sides(data, float(r))
        diff = max(diff, float(np.max(np.abs(sides["closed"].comps - sides["almost"].comps))))
        scale = max(scale, float(np.max(np.abs(sides["almost"].comps))))
        shifted = max(shifted, sides["shifted_schouten_residual"])
    meas = {"max_difference": diff, "rhs_size": scale, "shifted_schouten_residual": shifted,
            "samples": int(np.size(radii))}
    return CheckResult("laplacian_rhs", _status(diff <= tol), meas, {"max_difference": tol}, tol,
                       data.describe())


# ---------------------------------------------------------------- Pohozaev

def _default_chi(s: WarpedSmms) -> RadialProfile:
    k = math.pi / (s.r1 - s.r0)
    return RadialProfile.closed_form(lambda r: np.sin(k * (np.asarray(r) - s.r0)),
                                     lambda r: k * np.cos(k * (np.asarray(r) - s.r0)),
                                     lambda r: -(k**2) * np.sin(k * (np.asarray(r) - s.r0)), s.r0, s.r1)


def pohozaev_terms(s: WarpedSmms, chi: RadialProfile | None = None, mu: float | None = None,
                   npts: int = DEFAULT_N) -> tuple[float, float]:
    """The two integrals of the Pohozaev-type formula for ``X = chi(r) d/dr``.

    ``S = Rphi + m mu v^-2`` is differentiated on the grid (fourth order,
    singular end nodes filled by extrapolation); everything else is exact.
    The default ``chi = sin(pi (r - r0)/(r1 - r0))`` vanishes at both ends.
    """
    var._check_dims(s)
    mu = s.mu if mu is None else mu
    if mu is None:
        raise ValueError("a characteristic constant mu is required")
    chi = _default_chi(s) if chi is None else chi
    n, m = s.n, s.m
    grid = s.grid(npts)
    r, _, values = _curvature_arrays(s, grid.r)
    psi, dpsi, _ = s.psi.sample(r)
    v, dv, d2v = s.v_data(r)
    x, dx, _ = chi.sample(r)
    rho = var._densities(s, r)[0]
    inner = np.ones_like(r, dtype=bool)
    inner[[0, -1]] = False
    ok = s.nonsingular(r) & inner
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        hub = dpsi / psi
        lap_v = d2v + (n - 1) * hub * dv
        # S v^2 without cancellation, then divided back
        s_v2 = values["R"] * v**2 - 2 * m * v * lap_v - m * (m - 1) * dv**2 + m * mu
        big_s = extrapolate_ends(np.where(ok, s_v2 / v**2, np.nan), ok)
        e_rad = values["Ricphi_rad"] - big_s / (m + n)
        e_sph = values["Ricphi_sph"] - big_s / (m + n)
        dlogv = dv / v
        first = (m + n - 2) / (m + n) * x * grid.d1(big_s) * rho
        second = (e_rad * (2 * dx - 2 * x * dlogv) + (n - 1) * e_sph * (2 * x * hub - 2 * x * dlogv)) * rho
    first = np.where(ok, first, 0.0)
    second = np.where(ok, second, 0.0)
    return tuple(var._open_integrals(s, grid, first, second))


def pohozaev_check(s: WarpedSmms, chi: RadialProfile | None = None, mu: float | None = None,
                   npts: int = DEFAULT_N, tol: float = 1e-8) -> CheckResult:
    """Sum of both Pohozaev integrals, relative to ``max(1, |T1|, |T2|)``."""
    t1, t2 = pohozaev_terms(s, chi, mu, npts)
    scale = max(1.0, abs(t1), abs(t2))
    total = abs(t1 + t2) / scale
    return CheckResult("pohozaev", _status(total <= tol),
                       {"first": t1, "second": t2, "relative_sum": total, "npts": npts},
                       {"relative_sum": tol}, tol, s.describe())


# ----------------------------------------------------- quasi-Einstein bounds

def dil_estimate_check(qe, npts: int = DEFAULT_N, tol: float = 1e-12) -> list[CheckResult]:
    """Gradient estimate for the scale and the two-sided scalar-curvature bound.

    Labeling: the dual model ``(M, g, u^(2-m-n) dvol)`` is quasi-Einstein with
    quasi-Einstein constant ``data.mu`` and characteristic constant
    ``data.lam``; the estimate reads
    ``|grad u|^2 + lam/(m+n-1) < mu u^2/(m-1)``.  Requires ``m > 1`` and a
    closed model; otherwise the results are marked skipped (margins are still
    evaluated when ``m > 1``).
    """
    data = as_scale_data(qe)
    m, n, mu, lam = data.m, data.n, data.mu, data.lam
    model = data.describe()
    reason = None
    if not m > 1:
        reason = "precondition m > 1 not met"
        return [CheckResult(name, SKIPPED, {}, {}, tol, model, None, reason)
                for name in ("dil_estimate", "scal_bd_lower", "scal_bd_upper")]
    if not data.compact:
        reason = "precondition: model is not compact"
    grid = data.model.grid(npts)
    r = grid.r
    keep = data.model.nonsingular(r)
    u, du, _ = data.u_data(r)
    ch = weyl_channels(data, r)
    scal = extrapolate_ends(np.where(keep, ch.scal, np.nan), keep)
    lhs = du**2 + lam / (m + n - 1)
    rhs = mu * u**2 / (m - 1)
    labels = {"quasi_einstein_constant": mu, "characteristic_constant": lam}
    return [
        inequality_result("dil_estimate", lhs, rhs, tol=tol, model=model, strict=True,
                          measured=labels, skip_reason=reason),
        inequality_result("scal_bd_lower", np.full_like(scal, -n * (n - 1) * mu / (m - 1)), scal,
                          tol=tol, model=model, strict=True, skip_reason=reason),
        inequality_result("scal_bd_upper", scal, np.full_like(scal, (m + 2 * n - 2) * mu),
                          tol=tol, model=model, strict=False, skip_reason=reason),
    ]


@dataclass(frozen=True)
class NormalizedScale:
    """Scale data rescaled to characteristic constant 1 and unit ``int u^(-m-n) dvol``."""

    volume: float          # Vol(M) of the rescaled metric
    lam: float             # quasi-Einstein constant of the rescaled u
    lam_integral: float    # int u^(2-m-n) dvol, equal to lam by the scale equations
    metric_scale: float    # g -> metric_scale^2 g
    u_scale: float         # u -> u_scale u


def normalize_scale(data: ScaleData, npts: int = DEFAULT_N) -> NormalizedScale:
    if not data.mu > 0:
        raise ValueError("normalization needs a positive characteristic constant")
    s = data.model
    m, n = data.m, data.n
    grid = s.grid(npts)
    r = grid.r
    vol_form = sphere_area(n - 1) * s.psi(r) ** (n - 1)
    u = data.u_data(r)[0]
    stretch = math.sqrt(data.mu)                     # mu -> 1
    base = stretch**n * grid.integrate(u ** (-m - n) * vol_form)
    kappa = base ** (1.0 / (m + n))                  # int (kappa u)^(-m-n) = 1
    volume = stretch**n * grid.integrate(vol_form)
    lam = kappa**2 * data.lam / stretch**2
    lam_int = stretch**n * grid.integrate((kappa * u) ** (2 - m - n) * vol_form)
    return NormalizedScale(volume, lam, lam_int, stretch, kappa)


def vol_upper_constants(n: int) -> tuple[float, float]:
    """``(K1, K2)`` of the volume upper bounds in terms of ``||A||`` and ``||Rm||``."""
    base = math.sqrt(2 * n / (n - 1))
    return ((n - 1) * base) ** (n / 2), base ** (n / 2)


def volume_bounds_check(qe, npts: int = DEFAULT_N, tol: float = 1e-9) -> list[CheckResult]:
    """Volume lower bound by lam, the two upper bounds, and the pointwise |A| vs |Rm| comparison.

    The input is rescaled to characteristic constant 1 and a unit-volume
    scale first; the upper bounds and the comparison are scale invariant.
    """
    data = as_scale_data(qe)
    m, n = data.m, data.n
    model = data.describe()
    names = ("global_volume_bound_qe", "vol_upper_bound_A", "vol_upper_bound_Rm", "rm_norm_a_lower",
             "rm_norm_a_upper")
    if not data.compact or not data.mu > 0 or not m > 1:
        reason = "precondition: needs a closed model, mu > 0 and m > 1"
        return [CheckResult(k, SKIPPED, {}, {}, tol, model, None, reason) for k in names]
    norm = normalize_scale(data, npts)
    out = [inequality_result("global_volume_bound_qe", norm.lam, norm.volume ** (2 / (m + n)), tol=tol,
                             model=model, strict=False,
                             measured={"volume": norm.volume, "lam": norm.lam,
                                       "lam_integral": norm.lam_integral},
                             bound={"form": "lam <= Vol^(2/(m+n))"})]
    s = data.model
    grid = s.grid(npts)
    r = grid.r
    keep = s.nonsingular(r)
    ch = weyl_channels(data, r)
    vol_form = sphere_area(n - 1) * s.psi(r) ** (n - 1)
    a_sq = extrapolate_ends(np.where(keep, weyl_norm_sq(ch.a_rad, ch.a_sph, n), np.nan), keep)
    rm_sq = extrapolate_ends(np.where(keep, weyl_norm_sq(ch.k_rad, ch.k_sph, n), np.nan), keep)
    int_a = grid.integrate(a_sq ** (n / 4) * vol_form)      # scale invariant
    int_rm = grid.integrate(rm_sq ** (n / 4) * vol_form)
    k1, k2 = vol_upper_constants(n)
    out.append(inequality_result("vol_upper_bound_A", norm.volume, k1 * int_a, tol=tol, model=model,
                                 strict=False, measured={"A_norm_power": int_a}, bound={"K1": k1}))
    out.append(inequality_result("vol_upper_bound_Rm", norm.volume, k2 * int_rm, tol=tol, model=model,
                                 strict=False, measured={"Rm_norm_power": int_rm}, bound={"K2": k2}))
    # pointwise comparison in the characteristic-constant-one metric
    lower, middle, upper = [], [], []
    for rr in np.linspace(s.r0, s.r1, 23)[1:-1]:
        t = pointwise_tensors(data, float(rr))
        a_sq_pt, shifted_sq, c_a_sq = ca.norm_comparison(t["rm"] * (1.0 / data.mu), m=m, mu=1.0)
        lower.append(a_sq_pt)
        middle.append(shifted_sq)
        upper.append(c_a_sq)
    out.append(inequality_result("rm_norm_a_lower", lower, middle, tol=tol, model=model, strict=False))
    out.append(inequality_result("rm_norm_a_upper", middle, upper, tol=tol, model=model, strict=False))
    return out


def growth_constants(data: ScaleData) -> dict:
    """``k1, k2`` of the linearized estimate and the envelope constants from the minimum of f."""
    m, n, mu, lam = data.m, data.n, data.mu, data.lam
    c = m + n - 2
    k1 = 2 * c * lam / (m + n - 1)
    k2 = c**2 * (mu / (m - 1) - lam / (m + n - 1))
    return {"k1": k1, "k2": k2, "shift": (m + 2 * n - 2) * mu - c * lam}


def growth_bound_check(qe, npts: int = DEFAULT_N, tol: float = 1e-9) -> list[CheckResult]:
    """Linearized gradient estimate, the scalar-curvature bound and the quadratic envelope.

    Distances are measured radially from the grid minimizer ``r_p`` of f,
    i.e. ``|r - r_p|``; this never exceeds the true distance, so the
    envelope is tested in a slightly stronger form.
    """
    data = as_scale_data(qe)
    m, lam = data.m, data.lam
    model = data.describe()
    names = ("linearized_dil", "scal_growth", "quad_growth")
    if not m > 1 or not lam > 0:
        reason = "precondition: needs m > 1 and a positive quasi-Einstein constant"
        return [CheckResult(k, SKIPPED, {}, {}, tol, model, None, reason) for k in names]
    consts = growth_constants(data)
    k1, k2, shift = consts["k1"], consts["k2"], consts["shift"]
    s = data.model
    r = s.grid(npts).r
    keep = s.nonsingular(r)
    ch = weyl_channels(data, r)
    f, df = ch.f, ch.df
    scal = extrapolate_ends(np.where(keep, ch.scal, np.nan), keep)
    grad_sq = df**2
    p = int(np.argmin(f))
    dist = np.abs(r - r[p])
    f0 = (2 * (k1 * f[p] + k2) - k2) / k1
    env_f = 0.5 * k1 * dist**2 + f0
    env_grad = 0.5 * k1**2 * dist**2 + k1 * f0 + k2
    env_scal = lam * k1 * dist**2 + 2 * lam * f0 + shift
    c3 = max(0.5 * k1, 0.5 * k1**2, lam * k1)
    c4 = max(f0, k1 * f0 + k2, 2 * lam * f0 + shift)
    envelope = c3 * dist**2 + c4
    worst = np.maximum(np.maximum(scal, grad_sq), f)
    consts.update({"C3": c3, "C4": c4, "r_p": float(r[p]), "f_p": float(f[p])})
    return [
        inequality_result("linearized_dil", grad_sq, k1 * f + k2, tol=tol, model=model, strict=False,
                          bound=dict(consts)),
        inequality_result("scal_growth", scal, 2 * lam * f + shift, tol=tol, model=model, strict=False,
                          bound=dict(consts)),
        inequality_result("quad_growth", worst, envelope, tol=tol, model=model, strict=False,
                          bound=dict(consts),
                          measured={"envelope_f_margin": float(np.min(normalized_slack(f, env_f))),
                                    "envelope_grad_margin": float(np.min(normalized_slack(grad_sq, env_grad))),
                                    "envelope_scal_margin": float(np.min(normalized_slack(scal, env_scal)))}),
    ]


# ------------------------------------------------- Sobolev-type inequalities

def random_trig_samples(rng, r0: float, r1: float, count: int, modes: int = 6):
    """Callables ``r -> (w, w')`` of random cosine polynomials with decaying coefficients."""
    k = np.arange(modes + 1) * math.pi / (r1 - r0)
    out = []
    for _ in range(count):
        coef = rng.standard_normal(modes + 1) / (1.0 + np.arange(modes + 1))
        coef[0] += rng.uniform(-2.0, 2.0)

        def sample(r, coef=coef):
            x = np.multiply.outer(np.asarray(r, dtype=float) - r0, k)
            return np.cos(x) @ coef, -np.sin(x) @ (coef * k)

        out.append(sample)
    return out


@dataclass(frozen=True)
class _Norms:
    p_norm_sq: float
    grad_sq: float
    l2_sq: float
    inv_l2_sq: float
    volume: float


def _norms(s: WarpedSmms, grid: RadialGrid, rho, rho_inv, w, dw) -> _Norms:
    p = var.sobolev_exponent(s.m, s.n)
    power, grad, l2, inv, vol = var._open_integrals(
        s, grid, rho * np.abs(w) ** p, rho * dw**2, rho * w**2, rho_inv * w**2, rho)
    return _Norms(power ** (2 / p), grad, l2, inv, vol)


def _is_compact(s: WarpedSmms) -> bool:
    """Each end is a pole or a zero of v."""
    left, right = s.pole_ends()
    if s.finite and s.density_kind == "v":
        v_end = np.abs(s.density(np.array([s.r0, s.r1])))
        left |= bool(v_end[0] <= 1e-12)
        right |= bool(v_end[1] <= 1e-12)
    return left and right


def bakry_emery_floor(s: WarpedSmms, npts: int = DEFAULT_N) -> float:
    """Smallest Bakry-Emery eigenvalue over the regular grid nodes."""
    _, regular, values = _curvature_arrays(s, s.grid(npts).r)
    return float(min(np.min(values["Ricphi_rad"][regular]), np.min(values["Ricphi_sph"][regular])))


def sharp_sobolev_check(s: WarpedSmms, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                        npts: int = DEFAULT_N, tol: float = 1e-9) -> CheckResult:
    """Sharp Sobolev inequality under ``Ric_phi^m >= K > 0``, at unit weighted volume.

    The unit-volume rescaling is applied analytically: with ``V`` the weighted
    volume the inequality becomes ``||w||_p^2 V^(1-2/p) <= C/K ||grad w||^2 + ||w||_2^2``.
    The constant function is included as the first sample (equality case).
    """
    var._check_dims(s)
    m, n = s.m, s.n
    model = s.describe()
    kappa = bakry_emery_floor(s, npts)
    reason = None
    if not kappa > 0:
        reason = f"precondition: Bakry-Emery floor K = {kappa:.6g} is not positive"
    elif not _is_compact(s):
        reason = "precondition: model is not compact"
    if reason:
        return CheckResult("sharp_sobolev", SKIPPED, {"K": kappa}, {}, tol, model, None, reason)
    grid = s.grid(npts)
    rho, _, rho_inv = var._densities(s, grid.r)
    coef = 4 * (m + n - 1) / ((m + n) * (m + n - 2) * kappa)
    p = var.sobolev_exponent(m, n)
    rng = np.random.default_rng(seed)
    fns = [lambda r: (np.ones_like(r), np.zeros_like(r))] + random_trig_samples(rng, s.r0, s.r1, samples)
    lhs, rhs = [], []
    for fn in fns:
        w, dw = fn(grid.r)
        nm = _norms(s, grid, rho, rho_inv, w, dw)
        lhs.append(nm.p_norm_sq * nm.volume ** (1 - 2 / p))
        rhs.append(coef * nm.grad_sq + nm.l2_sq)
    constant_gap = float(normalized_slack(lhs[0], rhs[0]))
    return inequality_result("sharp_sobolev", lhs[1:], rhs[1:], tol=tol, model=model, strict=False,
                             measured={"K": kappa, "constant_sample_slack": constant_gap},
                             bound={"coefficient": coef})


def holder_check(s: WarpedSmms, samples: int = DEFAULT_SAMPLES, seed: int = 0,
                 npts: int = DEFAULT_N, tol: float = 1e-9) -> list[CheckResult]:
    """Both Hölder bounds of ``||w||_2`` and ``||w v^-1||_2`` by ``||w||_p`` on random w."""
    var._check_dims(s)
    m, n = s.m, s.n
    model = s.describe()
    names = ("holder_l2", "holder_inverse")
    if not _is_compact(s):
        return [CheckResult(k, SKIPPED, {}, {}, tol, model, None, "precondition: model is not compact")
                for k in names]
    grid = s.grid(npts)
    rho, _, rho_inv = var._densities(s, grid.r)
    rng = np.random.default_rng(seed)
    vol = weighted_volume(s, npts=npts)
    inv_vol = weighted_volume(s, offset=-m - n, npts=npts)
    rows = [[], [], [], []]
    for fn in random_trig_samples(rng, s.r0, s.r1, samples):
        w, dw = fn(grid.r)
        nm = _norms(s, grid, rho, rho_inv, w, dw)
        rows[0].append(nm.l2_sq)
        rows[1].append(nm.p_norm_sq * vol ** (2 / (m + n)))
        rows[2].append(nm.inv_l2_sq)
        rows[3].append(nm.p_norm_sq * inv_vol ** (2 / (m + n)))
    out = [inequality_result("holder_l2", rows[0], rows[1], tol=tol, model=model, strict=False,
                             measured={"weighted_volume": vol})]
    if math.isfinite(inv_vol):
        out.append(inequality_result("holder_inverse", rows[2], rows[3], tol=tol, model=model, strict=False,
                                     measured={"inverse_volume": inv_vol}))
    else:
        out.append(CheckResult("holder_inverse", SKIPPED, {}, {}, tol, model, None,
                               "integral of v^-n diverges"))
    return out


def minimizer_sobolev_check(s: WarpedSmms, report: var.EnergyReport | None = None,
                            samples: int = DEFAULT_SAMPLES, seed: int = 0, npts: int = DEFAULT_N,
                            tol: float = 1e-6) -> CheckResult:
    """Sobolev inequality with constant ``4(m+n-1)/((m+n-2) lam)`` in the minimizing gauge.

    With ``(w*, tau*)`` minimizing the m-energy, the gauge
    ``(s^2 u^-2 g, (k v/u)^m dvol)``, ``u = w*^(-2/(m+n-2))``,
    ``s = tau*^(-m/(2(m+n)))``, ``k = sqrt(tau*) s`` has ``(1, 1)`` as
    minimizer and unit weighted volume.  Its norms of a test function are
    evaluated on the original grid:
    ``||w||_p^p = int w^p w*^p``, ``||w||_2^2 = int w^2 w*^p`` and
    ``||grad w||^2 = s^-2 int w*^2 |grad w|^2`` (all against ``v^m dvol``).
    """
    var._check_dims(s)
    model = s.describe()
    m, n = s.m, s.n
    report = report or var.minimize_m_energy(s, npts=npts)
    lam, tau = report.lambda_m, report.tau_star
    if not report.converged or tau is None or not lam or not lam > 0:
        return CheckResult("minimizer_sobolev", SKIPPED, {"lambda_m": lam}, {}, tol, model, None,
                           "no positive converged m-energy minimizer")
    grid = s.grid(npts)
    rho = var._densities(s, grid.r)[0]
    p = var.sobolev_exponent(m, n)
    w_star = report.minimizer(grid.r)
    w_star = w_star / var._open_integrals(s, grid, rho * w_star**p)[0] ** (1 / p)
    stretch = tau ** (-m / (2 * (m + n)))
    coef = 4 * (m + n - 1) / ((m + n - 2) * lam)
    rng = np.random.default_rng(seed)
    lhs, rhs = [], []
    for fn in random_trig_samples(rng, s.r0, s.r1, samples):
        w, dw = fn(grid.r)
        power, l2, grad = var._open_integrals(s, grid, rho * np.abs(w * w_star) ** p,
                                              rho * w**2 * w_star**p, rho * (w_star * dw) ** 2)
        lhs.append(power ** (2 / p))
        rhs.append(coef * grad / stretch**2 + l2)
    return inequality_result("minimizer_sobolev", lhs, rhs, tol=tol, model=model, strict=False,
                             measured={"lambda_m": lam, "tau_star": tau},
                             bound={"coefficient": coef})


# ------------------------------------------------------ energy-based bounds

def compute_energy_check(s: WarpedSmms, report: var.EnergyReport | None = None,
                         npts: int = DEFAULT_N, tol: float = 1e-6) -> CheckResult:
    """Renormalized energy of a compact quasi-Einstein model against its constants and volume."""
    model = s.describe()
    lam, mu = s.qe_constant, s.mu
    if lam is None or mu is None or not mu > 0 or not _is_compact(s) or not s.closed:
        return CheckResult("compute_energy_qe", SKIPPED, {}, {}, tol, model, None,
                           "precondition: needs a closed quasi-Einstein model with mu > 0")
    report = report or var.minimize_m_energy(s, npts=npts)
    if not report.converged:
        return CheckResult("compute_energy_qe", FAIL, {"reason": report.reason}, {}, tol, model, None,
                           "m-energy minimization did not converge")
    m, n = s.m, s.n
    vol = weighted_volume(s, npts=npts)
    bound = (2 * math.pi * math.e) ** (-n / 2) * lam ** ((m + n) / 2) * mu ** (-m / 2) * vol
    return inequality_result("compute_energy_qe", report.lambda_bar, bound, tol=tol, model=model,
                             strict=False, measured={"lambda_bar": report.lambda_bar,
                                                     "weighted_volume": vol})


def global_volume_bound_check(s: WarpedSmms, report: var.EnergyReport | None = None,
                              npts: int = DEFAULT_N, tol: float = 1e-6) -> CheckResult:
    """``Vol(M) >= (2 pi e tau)^(n/2) lambda_bar`` for ``v = 1`` models with an m-energy minimizer."""
    model = s.describe()
    if not s.closed or not _has_trivial_density(s) or not s.finite:
        return CheckResult("global_volume_bound", SKIPPED, {}, {}, tol, model, None,
                           "precondition: needs a closed model with v = 1")
    report = report or var.minimize_m_energy(s, npts=npts)
    if not report.converged or report.tau_star is None or not report.lambda_bar:
        return CheckResult("global_volume_bound", SKIPPED, {}, {}, tol, model, None,
                           "no positive converged m-energy minimizer")
    vol = weighted_volume(s, offset=-s.m, npts=npts)
    rhs = (2 * math.pi * math.e * report.tau_star) ** (s.n / 2) * report.lambda_bar
    return inequality_result("global_volume_bound", rhs, vol, tol=tol, model=model, strict=False,
                             measured={"volume": vol, "tau_star": report.tau_star,
                                       "lambda_bar": report.lambda_bar})


# --------------------------------------------------- random algebra suite

ALGEBRA_DIMS = (3, 4, 5, 6)
ALGEBRA_MS = (0.0, 1.5, 7.0)


def algebra_identity_check(seed: int = 0, trials: int = 100, dims=ALGEBRA_DIMS, ms=ALGEBRA_MS,
                           mu: float = 1.0, tol: float = 1e-11) -> CheckResult:
    """Quadratic Weyl identity, trace identity and dual-path weighted Weyl on random Bianchi tensors."""
    rng = np.random.default_rng(seed)
    worst = {"quadratic_weyl": 0.0, "trace_identity": 0.0, "dual_path": 0.0}
    for n in dims:
        for m in ms:
            for _ in range(trials):
                rm = ca.random_curvature(rng, n)
                worst["quadratic_weyl"] = max(worst["quadratic_weyl"], ca.algebra_lemma_residual(rm, m=m, mu=mu))
                worst["trace_identity"] = max(worst["trace_identity"],
                                              ca.trace_A_identity_residual(rm, m=m, mu=mu))
                a = ca.weighted_weyl(rm, m=m, mu=mu)
                b = ca.weighted_weyl_decomposed(rm, m=m, mu=mu)
                worst["dual_path"] = max(worst["dual_path"], float(np.max(np.abs(a.comps - b.comps))))
    ok = all(v < tol for v in worst.values())
    return CheckResult("algebra_identities", _status(ok),
                       {**worst, "trials": trials, "dims": list(dims), "m_values": list(ms), "seed": seed},
                       {"residual_max": tol}, tol, {"label": "random-bianchi"})


# ------------------------------------------------------------------ suite

@dataclass(frozen=True)
class SuiteConfig:
    seed: int = 0
    trials: int = 100
    samples: int = DEFAULT_SAMPLES
    npts: int = DEFAULT_N
    perturb: float = 0.0
    jobs: int = 1


def default_qe_solution() -> QeSolution:
    """Nontrivial open solution used throughout: n = 4, m = 3, mu = 1/3, f''(0) = 0.5."""
    return solve_qe_ode(4, 3.0, 1.0 / 3.0, 0.5, r_max=2.5)


def _as_list(x):
    return list(x) if isinstance(x, (list, tuple)) else [x]


def _job(name: str, cfg: SuiteConfig) -> list[CheckResult]:
    sph4 = sphere_model(4, 2)
    sph3 = sphere_model(3, 5)
    hyp = hyperbolic_gaussian_model(4, 5)
    npts = cfg.npts
    if name == "algebra":
        return [algebra_identity_check(cfg.seed, cfg.trials)]
    if name == "div_free":
        sol = default_qe_solution()
        return [div_free_check(hyp, npts), div_free_check(sph4, npts), div_free_check(sol, npts),
                div_free_refinement(sol), channel_reduction_check(sol),
                channel_reduction_check(tilted_scale_data())]
    if name == "laplacian":
        return [laplacian_rhs_equivalence(x) for x in (hyp, sph4, default_qe_solution())]
    if name == "pohozaev":
        return [pohozaev_check(sph4, npts=npts), pohozaev_check(build_model("gaussian", 4, 5), npts=npts),
                pohozaev_check(tilted_sphere_model(4, 2, 0.5), mu=1.0, npts=npts, tol=1e-6)]
    if name == "dil":
        out = []
        for x in (sph4, sph3, hyp, default_qe_solution()):
            out += dil_estimate_check(x, npts)
        return out
    if name == "volume":
        out = volume_bounds_check(sph4, npts) + volume_bounds_check(sph3, npts)
        for s in (sph4, sph3):
            rep = var.minimize_m_energy(s, npts=npts)
            out += [compute_energy_check(s, rep, npts), global_volume_bound_check(s, rep, npts)]
        return out
    if name == "growth":
        out = []
        for x in (sph4, sph3, hyperbolic_gaussian_model(4, 5, r_max=10.0), default_qe_solution()):
            out += growth_bound_check(x, npts)
        return out
    if name == "sobolev":
        tilted = tilted_sphere_model(4, 2, 0.3)
        return [sharp_sobolev_check(x, cfg.samples, cfg.seed, npts)
                for x in (sph4, sph3, build_model("gaussian", 4, 5), tilted, build_model("euclidean", 4, 2))]
    if name == "holder":
        out = []
        for x in (sph4, tilted_sphere_model(4, 2, 1.0), tilted_sphere_model(3, 0.5, 3.0)):
            out += holder_check(x, cfg.samples, cfg.seed, npts)
        return out
    if name == "minimizer_sobolev":
        return [minimizer_sobolev_check(x, samples=cfg.samples, seed=cfg.seed, npts=npts)
                for x in (sph4, tilted_sphere_model(4, 2, 1.0))]
    if name == "negative":
        return negative_controls(cfg.perturb, npts)
    raise KeyError(name)


JOBS = ("algebra", "div_free", "laplacian", "pohozaev", "dil", "volume", "growth", "sobolev", "holder",
        "minimizer_sobolev")


def tilted_scale_data() -> ScaleData:
    """Non-quasi-Einstein metric (psi = sin r + 0.2 sin^3 r) with f = cos r, for the tensor cross-check."""
    psi = RadialProfile.closed_form(
        lambda r: np.sin(r) + 0.2 * np.sin(r) ** 3,
        lambda r: np.cos(r) * (1 + 0.6 * np.sin(r) ** 2),
        lambda r: -np.sin(r) + 1.2 * np.sin(r) * np.cos(r) ** 2 - 0.6 * np.sin(r) ** 3,
        0.0, math.pi)
    f = RadialProfile.closed_form(np.cos, lambda r: -np.sin(r), lambda r: -np.cos(r), 0.0, math.pi)
    model = WarpedSmms(4, psi, 3.0, RadialProfile.constant(1.0, 0.0, math.pi), "v", 0.7, "warped-test")
    return ScaleData(model, f, 1.0, 0.7, "warped-test")


def negative_controls(perturb: float = 0.1, npts: int = DEFAULT_N) -> list[CheckResult]:
    """Checks on corrupted inputs; each is expected to fail.

    The solved profile gets ``f + perturb cos(pi r/r1)``; the constants of the
    sphere are misreported by a factor ``1 + perturb`` (or ``(m+n-1)/(m-1)``
    times that for the gradient estimate, which has slack on the sphere).
    """
    eps = perturb if perturb > 0 else 0.1
    sol = as_scale_data(default_qe_solution())
    bad = perturbed(sol, eps)
    sph = as_scale_data(sphere_model(4, 2))
    m, n = sph.m, sph.n
    out = [negative(div_free_check(bad, npts), f"f perturbed by {eps:g} cos"),
           negative(laplacian_rhs_equivalence(bad), f"f perturbed by {eps:g} cos")]
    vol = volume_bounds_check(misscaled(sph, 1 + eps), npts)[0]
    out.append(negative(vol, f"lam claimed {1 + eps:g} times too large"))
    dil = dil_estimate_check(misscaled(sph, (1 + eps) * (m + n - 1) / (m - 1)), npts)[0]
    out.append(negative(dil, "lam claimed above the gradient estimate"))
    grow = growth_bound_check(perturbed(as_scale_data(hyperbolic_gaussian_model(4, 5, 10.0)), -eps), npts)[0]
    out.append(negative(grow, f"f perturbed by {-eps:g} cos"))
    return out


def _run_job(args):
    name, cfg = args
    return _job(name, cfg)


def run_suite(cfg: SuiteConfig | None = None, jobs=JOBS) -> list[CheckResult]:
    """Run the named jobs (plus negative controls when ``perturb > 0``), in job order."""
    cfg = cfg or SuiteConfig()
    names = list(jobs) + (["negative"] if cfg.perturb > 0 else [])
    tasks = [(name, cfg) for name in names]
    if cfg.jobs > 1:
        with ProcessPoolExecutor(max_workers=cfg.jobs) as pool:
            chunks = list(pool.map(_run_job, tasks))
    else:
        chunks = [_run_job(t) for t in tasks]
    return [r for chunk in chunks for r in chunk]


def suite_failed(results) -> bool:
    """True when any non-skipped check deviates from its expected outcome."""
    return any(not r.as_expected for r in results)


def summary_table(results) -> str:
    head = f"{'check':<34} {'status':<8} {'expected':<8} {'margin':>12}  model"
    lines = [head, "-" * len(head)]
    for r in results:
        margin = "" if r.margin is None else f"{r.margin:12.4e}"
        lines.append(f"{r.name:<34} {r.status:<8} {r.expected:<8} {margin:>12}  {r.model.get('label', '')}")
    bad = sum(not r.as_expected for r in results)
    skipped = sum(r.status == SKIPPED for r in results)
    lines.append(f"{len(results)} checks, {skipped} skipped, {bad} unexpected")
    return "\n".join(lines)
