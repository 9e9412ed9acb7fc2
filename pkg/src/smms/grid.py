"""Uniform radial grids: finite-difference derivatives and quadrature weights."""

from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache

import numpy as np

DEFAULT_N = 513
MIN_N = 65


@lru_cache(maxsize=None)
def fd_weights(offsets: tuple, order: int) -> np.ndarray:
    """Weights c with sum_k c[k] f(x + offsets[k] h) ≈ h^order f^(order)(x)."""
    s = np.asarray(offsets, dtype=float)
    k = len(s)
    vander = np.vander(s, k, increasing=True).T
    rhs = np.zeros(k)
    rhs[order] = float(np.prod(np.arange(1, order + 1)))
    return np.linalg.solve(vander, rhs)


def derivative(y, h: float, order: int = 1, accuracy: int = 4) -> np.ndarray:
    """Finite-difference derivative on a uniform grid.

    Centered stencils in the interior, one-sided stencils of the same formal
    accuracy at the ends.
    """
    y = np.asarray(y, dtype=float)
    npts = y.size
    half = accuracy // 2 + (order - 1) // 2
    width = 2 * half + 1
    if npts < width + 2:
        raise ValueError("grid too small for requested stencil")
    out = np.empty_like(y)
    centered = fd_weights(tuple(range(-half, half + 1)), order)
    core = np.zeros(npts - 2 * half)
    for j, c in enumerate(centered):
        core += c * y[j : j + npts - 2 * half]
    out[half : npts - half] = core
    one_sided = accuracy + order
    for i in range(half):
        offs = tuple(range(-i, one_sided - i))
        w = fd_weights(offs, order)
        out[i] = w @ y[:one_sided]
        offs_r = tuple(range(-(one_sided - 1 - i), i + 1))
        w_r = fd_weights(offs_r, order)
        out[npts - 1 - i] = w_r @ y[npts - one_sided :]
    return out / h**order


def extrapolate_ends(y, mask, degree: int = 4) -> np.ndarray:
    """Replace entries outside ``mask`` at either end by polynomial extrapolation."""
    y = np.array(y, dtype=float)
    idx = np.flatnonzero(mask)
    if idx.size < degree + 1:
        raise ValueError("not enough valid points to extrapolate")
    lo, hi = idx[0], idx[-1]
    if lo > 0:
        src = np.arange(lo, lo + degree + 1)
        coef = np.polyfit(src - lo, y[src], degree)
        y[:lo] = np.polyval(coef, np.arange(0, lo) - lo)
    if hi < y.size - 1:
        src = np.arange(hi - degree, hi + 1)
        coef = np.polyfit(src - hi, y[src], degree)
        y[hi + 1 :] = np.polyval(coef, np.arange(hi + 1, y.size) - hi)
    return y


_END_EXTRAPOLATION = np.array([5.0, -10.0, 10.0, -5.0, 1.0])


def open_weights(npts: int, h: float) -> np.ndarray:
    """Fourth-order quadrature weights that never use the two end samples.

    Composite Simpson, with each end sample replaced by the quartic
    extrapolation from its five nearest neighbours.  Removable or integrable
    singularities at the ends are therefore never evaluated.
    """
    w = simpson_weights(npts, h)
    if npts < 9:
        raise ValueError("open rule needs at least 9 points")
    w[1:6] += w[0] * _END_EXTRAPOLATION
    w[-6:-1] += w[-1] * _END_EXTRAPOLATION[::-1]
    w[0] = w[-1] = 0.0
    return w


def simpson_weights(npts: int, h: float) -> np.ndarray:
    if npts % 2 == 0 or npts < 3:
        raise ValueError("composite Simpson needs an odd number of points")
    w = np.ones(npts)
    w[1:-1:2] = 4.0
    w[2:-1:2] = 2.0
    return w * h / 3.0


@dataclass(frozen=True)
class RadialGrid:
    r0: float
    r1: float
    npts: int = DEFAULT_N

    def __post_init__(self):
        if self.npts < MIN_N:
            raise ValueError(f"grid needs at least {MIN_N} points, got {self.npts}")
        if not self.r1 > self.r0:
            raise ValueError("empty radial interval")

    @property
    def h(self) -> float:
        return (self.r1 - self.r0) / (self.npts - 1)

    @property
    def r(self) -> np.ndarray:
        return np.linspace(self.r0, self.r1, self.npts)

    @property
    def midpoints(self) -> np.ndarray:
        r = self.r
        return 0.5 * (r[1:] + r[:-1])

    def d1(self, y, accuracy=4):
        return derivative(y, self.h, 1, accuracy)

    def d2(self, y, accuracy=4):
        return derivative(y, self.h, 2, accuracy)

    def quad_weights(self) -> np.ndarray:
        return open_weights(self.npts, self.h)

    def integrate(self, values) -> float:
        return float(self.quad_weights() @ np.asarray(values, dtype=float))

    def refined(self, factor=2) -> "RadialGrid":
        return RadialGrid(self.r0, self.r1, (self.npts - 1) * factor + 1)
