"""Pointwise algebra of curvature-type tensors over an orthonormal frame.

All tensors live in a fixed orthonormal frame, so the metric is the identity
form and no index raising or lowering is ever needed.  Component arrays are
indexed row-major as ``(x, y, u, v)``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

SYMMETRY_TOL = 1e-13


class DimensionMismatch(ValueError):
    pass


def _check_residual(residual, scale, what):
    if residual > SYMMETRY_TOL * max(1.0, scale):
        raise ValueError(f"{what}: symmetry residual {residual:.3e} too large")


@dataclass(frozen=True, eq=False)
class SymForm:
    """Symmetric bilinear form; ``comps[i, j] == comps[j, i]``."""

    comps: np.ndarray

    def __post_init__(self):
        c = np.array(self.comps, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1]:
            raise ValueError(f"symmetric form needs a square array, got {c.shape}")
        sym = 0.5 * (c + c.T)
        _check_residual(np.max(np.abs(c - sym), initial=0.0), np.max(np.abs(c), initial=0.0), "SymForm")
        sym.setflags(write=False)
        object.__setattr__(self, "comps", sym)

    @property
    def n(self):
        return self.comps.shape[0]

    @classmethod
    def identity(cls, n):
        return cls(np.eye(n))

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n, n)))

    def trace(self):
        return float(np.trace(self.comps))

    def traceless(self):
        return SymForm(self.comps - self.trace() / self.n * np.eye(self.n))

    def __add__(self, other):
        _same_dim(self, other)
        return SymForm(self.comps + other.comps)

    def __sub__(self, other):
        _same_dim(self, other)
        return SymForm(self.comps - other.comps)

    def __neg__(self):
        return SymForm(-self.comps)

    def __mul__(self, c):
        return SymForm(float(c) * self.comps)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return SymForm(self.comps / float(c))


@dataclass(frozen=True, eq=False)
class AlgCurv:
    """4-tensor antisymmetric in each index pair and symmetric under pair swap.

    The first Bianchi identity is deliberately not imposed; see
    :func:`bianchi_residual`.
    """

    comps: np.ndarray

    def __post_init__(self):
        c = np.array(self.comps, dtype=float)
        if c.ndim != 4 or len(set(c.shape)) != 1:
            raise ValueError(f"curvature tensor needs an n^4 array, got {c.shape}")
        sym = project_pair_symmetric(c)
        _check_residual(np.max(np.abs(c - sym), initial=0.0), np.max(np.abs(c), initial=0.0), "AlgCurv")
        sym.setflags(write=False)
        object.__setattr__(self, "comps", sym)

    @property
    def n(self):
        return self.comps.shape[0]

    @classmethod
    def zeros(cls, n):
        return cls(np.zeros((n,) * 4))

    @classmethod
    def identity(cls, n):
        """Identity on 2-forms, i.e. half of g∧g."""
        g = SymForm.identity(n)
        return 0.5 * kn_wedge(g, g)

    def __add__(self, other):
        _same_dim(self, other)
        return AlgCurv(self.comps + other.comps)

    def __sub__(self, other):
        _same_dim(self, other)
        return AlgCurv(self.comps - other.comps)

    def __neg__(self):
        return AlgCurv(-self.comps)

    def __mul__(self, c):
        return AlgCurv(float(c) * self.comps)

    __rmul__ = __mul__

    def __truediv__(self, c):
        return AlgCurv(self.comps / float(c))

    def to_json(self):
        """Nested lists in (x, y, u, v) row-major order."""
        return json.dumps({"n": self.n, "index_order": "x,y,u,v", "comps": self.comps.tolist()})

    @classmethod
    def from_json(cls, text):
        data = json.loads(text)
        return cls(np.asarray(data["comps"], dtype=float))


def project_pair_symmetric(c):
    """Orthogonal projection of a raw 4-array onto the AlgCurv symmetries."""
    c = 0.5 * (c - c.transpose(1, 0, 2, 3))
    c = 0.5 * (c - c.transpose(0, 1, 3, 2))
    return 0.5 * (c + c.transpose(2, 3, 0, 1))


def _same_dim(a, b):
    if a.n != b.n:
        raise DimensionMismatch(f"dimension mismatch: {a.n} vs {b.n}")


def kn_wedge(h: SymForm, k: SymForm) -> AlgCurv:
    """Kulkarni–Nomizu product h∧k."""
    _same_dim(h, k)
    a, b = h.comps, k.comps
    t = (
        np.einsum("xu,yv->xyuv", a, b)
        + np.einsum("yv,xu->xyuv", a, b)
        - np.einsum("xv,yu->xyuv", a, b)
        - np.einsum("yu,xv->xyuv", a, b)
    )
    return AlgCurv(t)


def compose(outer: AlgCurv, inner: AlgCurv) -> np.ndarray:
    """outer∘inner as a raw 4-array: inner(x,y,e_i,e_j) outer(e_i,e_j,u,v)."""
    _same_dim(outer, inner)
    return np.einsum("xyij,ijuv->xyuv", inner.comps, outer.comps)


def sym_dot(a: AlgCurv, b: AlgCurv) -> AlgCurv:
    """Symmetrized composition a·b = (a∘b + b∘a)/2."""
    return AlgCurv(0.5 * (compose(a, b) + compose(b, a)))


def square(a: AlgCurv, b: AlgCurv) -> AlgCurv:
    """Lie-algebraic square product a□b."""
    _same_dim(a, b)
    A, B = a.comps, b.comps
    t = (
        np.einsum("xiuj,yivj->xyuv", A, B)
        + np.einsum("yivj,xiuj->xyuv", A, B)
        - np.einsum("xivj,yiuj->xyuv", A, B)
        - np.einsum("yiuj,xivj->xyuv", A, B)
    )
    return AlgCurv(t)


sharp = square


def sharp_square(a: AlgCurv) -> AlgCurv:
    """a□a."""
    return square(a, a)


def hash_action(t: SymForm, a: AlgCurv) -> AlgCurv:
    """Derivation action of a symmetric endomorphism on a 4-tensor."""
    _same_dim(t, a)
    T, A = t.comps, a.comps
    out = (
        np.einsum("xk,kyuv->xyuv", T, A)
        + np.einsum("yk,xkuv->xyuv", T, A)
        + np.einsum("uk,xykv->xyuv", T, A)
        + np.einsum("vk,xyuk->xyuv", T, A)
    )
    return AlgCurv(-out)


def contract(a: AlgCurv, t: SymForm) -> SymForm:
    """⟨a, t⟩(x, u) = a(e_i, x, t(e_i), u)."""
    _same_dim(a, t)
    return SymForm(np.einsum("ixju,ij->xu", a.comps, t.comps))


def trace(a: AlgCurv) -> SymForm:
    return contract(a, SymForm.identity(a.n))


def inner(a: AlgCurv, b: AlgCurv) -> float:
    """Tensor inner product counting each 2-form pair once (1/4 of the full sum)."""
    _same_dim(a, b)
    return 0.25 * float(np.sum(a.comps * b.comps))


def norm_sq(a: AlgCurv) -> float:
    return inner(a, a)


def form_norm_sq(h: SymForm) -> float:
    return float(np.sum(h.comps**2))


def bianchi_residual(a: AlgCurv) -> float:
    """Max-abs violation of the cyclic identity a(x,y,u,v)+a(y,u,x,v)+a(u,x,y,v)=0."""
    A = a.comps
    cyc = A + A.transpose(1, 2, 0, 3) + A.transpose(2, 0, 1, 3)
    return float(np.max(np.abs(cyc), initial=0.0))


def project_bianchi(c) -> AlgCurv:
    """Project a raw 4-array onto algebraic curvature tensors with first Bianchi."""
    A = project_pair_symmetric(np.asarray(c, dtype=float))
    cyc = (A + A.transpose(1, 2, 0, 3) + A.transpose(2, 0, 1, 3)) / 3.0
    return AlgCurv(project_pair_symmetric(A - cyc))


def ricci_decompose(rm: AlgCurv, g: SymForm | None = None, tol=1e-12):
    """Split a Bianchi-symmetric tensor into (Weyl part, traceless Ricci, scalar)."""
    n = rm.n
    if n < 3:
        raise ValueError("decomposition requires n >= 3")
    g = SymForm.identity(n) if g is None else g
    _same_dim(rm, g)
    scale = max(1.0, float(np.max(np.abs(rm.comps), initial=0.0)))
    if bianchi_residual(rm) > tol * scale:
        raise ValueError("input does not satisfy the first Bianchi identity")
    ric = contract(rm, g)
    r = ric.trace()
    ric0 = ric - g * (r / n)
    weyl = rm - kn_wedge(ric0, g) / (n - 2) - kn_wedge(g, g) * (r / (2 * n * (n - 1)))
    return weyl, ric0, r


def _is_inf(m):
    return isinstance(m, float) and math.isinf(m)


def weighted_schouten(ric: SymForm, r: float, g: SymForm, m, mu: float) -> SymForm:
    if _is_inf(float(m)):
        raise ValueError("weighted Schouten tensor is undefined for m = inf")
    m = float(m)
    n = ric.n
    if m + n - 2 <= 0:
        raise ValueError("need m + n - 2 > 0")
    return (ric - g * ((r + m * mu) / (2 * (m + n - 1)))) / (m + n - 2)


def weighted_weyl(rm: AlgCurv, g: SymForm | None = None, m=0.0, mu: float = 0.0) -> AlgCurv:
    """Rm − P∧g; returns Rm itself when m is infinite."""
    g = SymForm.identity(rm.n) if g is None else g
    if _is_inf(float(m)):
        return rm
    ric = contract(rm, g)
    p = weighted_schouten(ric, ric.trace(), g, m, mu)
    return rm - kn_wedge(p, g)


def weighted_weyl_decomposed(rm: AlgCurv, g: SymForm | None = None, m=0.0, mu: float = 0.0) -> AlgCurv:
    """Same tensor as :func:`weighted_weyl`, assembled from the Ricci decomposition."""
    g = SymForm.identity(rm.n) if g is None else g
    if _is_inf(float(m)):
        return rm
    m = float(m)
    n = rm.n
    weyl, ric0, r = ricci_decompose(rm, g)
    c_ric = m / ((m + n - 2) * (n - 2))
    c_id = m / (2 * (m + n - 1) * (m + n - 2)) * ((m - 1) * r / (n * (n - 1)) + mu)
    return weyl + kn_wedge(ric0, g) * c_ric + kn_wedge(g, g) * c_id


def weighted_norm_channels(rm: AlgCurv, m, mu: float = 1.0) -> float:
    """|A|² assembled channel by channel from |W|², |Ric₀|² and R."""
    m = float(m)
    n = rm.n
    weyl, ric0, r = ricci_decompose(rm)
    k = m / (m + n - 2)
    s = m / ((m + n - 1) * (m + n - 2))
    return (
        norm_sq(weyl)
        + k**2 * form_norm_sq(ric0) / (n - 2)
        + 0.5 * n * (n - 1) * s**2 * ((m - 1) * r / (n * (n - 1)) + mu) ** 2
    )


def norm_comparison(rm: AlgCurv, g: SymForm | None = None, m=2.0, mu: float = 1.0, delta: float = 1e-9):
    """(|A|², |Rm + µ g∧g/(2(m−1))|², C|A|²) with C = ((m+n−1)(m+n−2)/(m(m−1)))²."""
    m = float(m)
    if not m >= 1 + delta:
        raise ValueError("norm comparison requires m >= 1 + delta")
    g = SymForm.identity(rm.n) if g is None else g
    n = rm.n
    a = weighted_weyl(rm, g, m, mu)
    shifted = rm + kn_wedge(g, g) * (mu / (2 * (m - 1)))
    c = ((m + n - 1) * (m + n - 2) / (m * (m - 1))) ** 2
    return norm_sq(a), norm_sq(shifted), c * norm_sq(a)


def algebra_lemma_sides(rm: AlgCurv, g: SymForm | None = None, m=0.0, mu: float = 0.0):
    g = SymForm.identity(rm.n) if g is None else g
    ric = contract(rm, g)
    p = weighted_schouten(ric, ric.trace(), g, m, mu)
    a = rm - kn_wedge(p, g)
    lhs = sym_dot(a, a) + sharp_square(a)
    rhs = sym_dot(rm, a) + square(rm, a) - kn_wedge(contract(a, g), p) - kn_wedge(contract(a, p), g)
    return lhs, rhs


def algebra_lemma_residual(rm: AlgCurv, g: SymForm | None = None, m=0.0, mu: float = 0.0) -> float:
    lhs, rhs = algebra_lemma_sides(rm, g, m, mu)
    return float(np.max(np.abs(lhs.comps - rhs.comps)))


def trace_A_identity_residual(rm: AlgCurv, g: SymForm | None = None, m=0.0, mu: float = 0.0) -> float:
    """Residual of tr A = m(P − (R − (m+2n−2)µ) g / (2(m+n−1)(m+n−2)))."""
    g = SymForm.identity(rm.n) if g is None else g
    m = float(m)
    n = rm.n
    ric = contract(rm, g)
    r = ric.trace()
    p = weighted_schouten(ric, r, g, m, mu)
    tr_a = contract(rm - kn_wedge(p, g), g)
    expected = (p - g * ((r - (m + 2 * n - 2) * mu) / (2 * (m + n - 1) * (m + n - 2)))) * m
    return float(np.max(np.abs(tr_a.comps - expected.comps)))


def random_sym_form(rng, n, scale=1.0) -> SymForm:
    x = rng.standard_normal((n, n)) * scale
    return SymForm(0.5 * (x + x.T))


def random_pair_symmetric(rng, n) -> AlgCurv:
    return AlgCurv(project_pair_symmetric(rng.standard_normal((n,) * 4)))


def random_weyl(rng, n) -> AlgCurv:
    """Totally trace-free Bianchi tensor from projecting random data."""
    weyl, _, _ = ricci_decompose(project_bianchi(rng.standard_normal((n,) * 4)))
    return weyl


def random_curvature(rng, n, terms=3) -> AlgCurv:
    """Random Bianchi-symmetric tensor: Σ hᵢ∧kᵢ plus a random Weyl part."""
    total = random_weyl(rng, n)
    for _ in range(terms):
        total = total + kn_wedge(random_sym_form(rng, n), random_sym_form(rng, n))
    return total
