"""Shared fixtures-by-function for the test modules."""

import math

import numpy as np

from smms.warped_smms import RadialProfile, sphere_model

UNIT_S4_RADIUS = (3.0 / (8.0 * math.pi**2)) ** 0.25  # volume of S^4 of this radius is 1


def unit_volume_sphere(m=2.0, n=4):
    if n != 4:
        raise ValueError("closed form radius only for S^4")
    return sphere_model(n, m, radius=UNIT_S4_RADIUS)


def trig_profile(coeffs, r1, kind="cos"):
    """``sum c_k cos(k pi r / r1)`` (k from 0) with exact derivatives."""
    coeffs = np.asarray(coeffs, dtype=float)
    k = np.arange(coeffs.size) * math.pi / r1

    def basis(r, order):
        x = np.multiply.outer(np.asarray(r, dtype=float), k)
        if order == 0:
            return np.cos(x) @ coeffs
        if order == 1:
            return -np.sin(x) @ (coeffs * k)
        return -np.cos(x) @ (coeffs * k**2)

    return RadialProfile.closed_form(lambda r: basis(r, 0), lambda r: basis(r, 1),
                                     lambda r: basis(r, 2), 0.0, r1)


def random_positive_profile(rng, r1, modes=5, amplitude=0.3):
    """``1 + sum a_k cos(k pi r/r1)`` with ``sum |a_k| <= amplitude``."""
    a = rng.uniform(-1, 1, modes)
    a *= amplitude / np.sum(np.abs(a))
    return trig_profile(np.concatenate([[1.0], a]), r1)
