import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from smms.curvature_algebra import (
    AlgCurv,
    DimensionMismatch,
    SymForm,
    algebra_lemma_residual,
    bianchi_residual,
    compose,
    contract,
    form_norm_sq,
    hash_action,
    inner,
    kn_wedge,
    norm_comparison,
    norm_sq,
    random_curvature,
    random_pair_symmetric,
    random_sym_form,
    ricci_decompose,
    sharp_square,
    square,
    sym_dot,
    trace_A_identity_residual,
    weighted_norm_channels,
    weighted_schouten,
    weighted_weyl,
    weighted_weyl_decomposed,
)

DIMS = (3, 4, 5, 6)


def loop_wedge(h, k):
    n = h.shape[0]
    out = np.zeros((n,) * 4)
    for x, y, u, v in itertools.product(range(n), repeat=4):
        out[x, y, u, v] = h[x, u] * k[y, v] + h[y, v] * k[x, u] - h[x, v] * k[y, u] - h[y, u] * k[x, v]
    return out


def loop_compose(outer, inner_):
    n = outer.shape[0]
    out = np.zeros((n,) * 4)
    for x, y, u, v in itertools.product(range(n), repeat=4):
        s = 0.0
        for i in range(n):
            for j in range(n):
                s += inner_[x, y, i, j] * outer[i, j, u, v]
        out[x, y, u, v] = s
    return out


def loop_square(a, b):
    n = a.shape[0]
    out = np.zeros((n,) * 4)
    for x, y, u, v in itertools.product(range(n), repeat=4):
        s = 0.0
        for i in range(n):
            for j in range(n):
                s += a[x, i, u, j] * b[y, i, v, j] + a[y, i, v, j] * b[x, i, u, j]
                s -= a[x, i, v, j] * b[y, i, u, j] + a[y, i, u, j] * b[x, i, v, j]
        out[x, y, u, v] = s
    return out


def loop_hash(t, a):
    n = a.shape[0]
    out = np.zeros((n,) * 4)
    for x, y, u, v in itertools.product(range(n), repeat=4):
        s = 0.0
        for k in range(n):
            s -= t[x, k] * a[k, y, u, v] + t[y, k] * a[x, k, u, v]
            s -= t[u, k] * a[x, y, k, v] + t[v, k] * a[x, y, u, k]
        out[x, y, u, v] = s
    return out


def loop_contract(a, t):
    n = a.shape[0]
    out = np.zeros((n, n))
    for x, u in itertools.product(range(n), repeat=2):
        out[x, u] = sum(a[i, x, j, u] * t[i, j] for i in range(n) for j in range(n))
    return out


@pytest.mark.parametrize("n", DIMS)
def test_products_match_index_loops(n):
    rng = np.random.default_rng(100 + n)
    trials = 100 if n <= 4 else 10
    for _ in range(trials):
        h, k = random_sym_form(rng, n), random_sym_form(rng, n)
        a, b = random_pair_symmetric(rng, n), random_pair_symmetric(rng, n)
        assert np.max(np.abs(kn_wedge(h, k).comps - loop_wedge(h.comps, k.comps))) < 1e-12
        assert np.max(np.abs(compose(a, b) - loop_compose(a.comps, b.comps))) < 1e-12
        assert np.max(np.abs(square(a, b).comps - loop_square(a.comps, b.comps))) < 1e-12
        assert np.max(np.abs(hash_action(h, a).comps - loop_hash(h.comps, a.comps))) < 1e-12
        assert np.max(np.abs(contract(a, h).comps - loop_contract(a.comps, h.comps))) < 1e-12


@pytest.mark.parametrize("n", DIMS)
def test_g_wedge_g_is_twice_identity(n):
    g = SymForm.identity(n)
    gg = kn_wedge(g, g).comps
    assert gg[0, 1, 0, 1] == 2.0
    assert gg[0, 1, 1, 0] == -2.0
    # as an operator on 2-forms e_i^e_j (i<j) it is 2 times the identity
    pairs = [(i, j) for i in range(n) for j in range(i + 1, n)]
    op = np.array([[gg[i, j, k, l] for (k, l) in pairs] for (i, j) in pairs])
    np.testing.assert_array_equal(op, 2.0 * np.eye(len(pairs)))


def test_wedge_with_zero_and_symmetry():
    rng = np.random.default_rng(3)
    h, k = random_sym_form(rng, 4), random_sym_form(rng, 4)
    assert np.all(kn_wedge(h, SymForm.zeros(4)).comps == 0)
    np.testing.assert_allclose(kn_wedge(h, k).comps, kn_wedge(k, h).comps, atol=1e-15)
    assert bianchi_residual(kn_wedge(h, k)) < 1e-13


def test_identity_composition_doubles():
    rng = np.random.default_rng(4)
    a = random_pair_symmetric(rng, 4)
    ident = AlgCurv.identity(4)
    np.testing.assert_allclose(compose(ident, a), 2 * a.comps, atol=1e-14)
    np.testing.assert_allclose(loop_compose(ident.comps, a.comps), 2 * a.comps, atol=1e-14)
    assert np.all(compose(a, AlgCurv.zeros(4)) == 0)


def test_sym_dot_is_pair_symmetric():
    rng = np.random.default_rng(5)
    a, b = random_pair_symmetric(rng, 5), random_pair_symmetric(rng, 5)
    c = sym_dot(a, b).comps
    np.testing.assert_allclose(c, c.transpose(2, 3, 0, 1), atol=1e-14)


def test_square_product_symmetric_and_zero():
    rng = np.random.default_rng(6)
    a, b = random_pair_symmetric(rng, 4), random_pair_symmetric(rng, 4)
    np.testing.assert_allclose(square(a, b).comps, square(b, a).comps, atol=1e-13)
    assert np.all(square(AlgCurv.zeros(4), a).comps == 0)
    g = SymForm.identity(3)
    gg = kn_wedge(g, g)
    np.testing.assert_allclose(sharp_square(gg).comps, loop_square(gg.comps, gg.comps), atol=1e-14)


def test_hash_action_of_identity():
    rng = np.random.default_rng(7)
    a = random_pair_symmetric(rng, 4)
    np.testing.assert_allclose(hash_action(SymForm.identity(4), a).comps, -4 * a.comps, atol=1e-14)
    assert np.all(hash_action(SymForm.zeros(4), a).comps == 0)


@pytest.mark.parametrize("n", DIMS)
def test_contract_identity_tensor(n):
    g = SymForm.identity(n)
    got = contract(AlgCurv.identity(n), g).comps
    np.testing.assert_allclose(got, (n - 1) * np.eye(n), atol=1e-15)
    assert np.all(contract(AlgCurv.zeros(n), g).comps == 0)


def test_dimension_mismatch():
    with pytest.raises(DimensionMismatch):
        kn_wedge(SymForm.identity(3), SymForm.identity(4))
    with pytest.raises(DimensionMismatch):
        compose(AlgCurv.zeros(3), AlgCurv.zeros(4))


def test_construction_rejects_asymmetric_input():
    with pytest.raises(ValueError):
        SymForm(np.array([[1.0, 2.0], [0.0, 1.0]]))
    bad = np.zeros((3,) * 4)
    bad[0, 1, 0, 1] = 1.0
    with pytest.raises(ValueError):
        AlgCurv(bad)


def test_spaceform_decomposition():
    n, curv = 4, -0.37
    g = SymForm.identity(n)
    rm = kn_wedge(g, g) * (curv / 2)
    weyl, ric0, r = ricci_decompose(rm)
    assert np.max(np.abs(weyl.comps)) < 1e-15
    assert np.max(np.abs(ric0.comps)) < 1e-15
    assert r == pytest.approx(n * (n - 1) * curv, rel=1e-14)


@pytest.mark.parametrize("n", DIMS)
def test_decomposition_round_trip_and_orthogonality(n):
    rng = np.random.default_rng(20 + n)
    g = SymForm.identity(n)
    for _ in range(20):
        rm = random_curvature(rng, n)
        weyl, ric0, r = ricci_decompose(rm)
        ric_part = kn_wedge(ric0, g) / (n - 2)
        scal_part = kn_wedge(g, g) * (r / (2 * n * (n - 1)))
        assert np.max(np.abs((weyl + ric_part + scal_part).comps - rm.comps)) < 1e-12
        assert abs(inner(weyl, ric_part)) < 1e-12
        assert abs(inner(weyl, scal_part)) < 1e-12
        assert abs(inner(ric_part, scal_part)) < 1e-12
        assert np.max(np.abs(contract(weyl, g).comps)) < 1e-12
        np.testing.assert_allclose((ric0 + g * (r / n)).comps, contract(rm, g).comps, atol=1e-12)


def test_decomposition_requires_bianchi():
    rng = np.random.default_rng(9)
    with pytest.raises(ValueError):
        ricci_decompose(random_pair_symmetric(rng, 4))


def test_schouten_reductions():
    rng = np.random.default_rng(10)
    n = 4
    g = SymForm.identity(n)
    ric = random_sym_form(rng, n)
    r = ric.trace()
    textbook = (ric.comps - r / (2 * (n - 1)) * np.eye(n)) / (n - 2)
    np.testing.assert_allclose(weighted_schouten(ric, r, g, 0.0, 0.0).comps, textbook, atol=1e-15)
    np.testing.assert_allclose(weighted_schouten(ric, r, g, 0.0, 3.3).comps, textbook, atol=1e-15)
    with pytest.raises(ValueError):
        weighted_schouten(ric, r, g, math.inf, 1.0)


def test_schouten_round_sphere():
    n, m, mu = 4, 2.0, 3.0
    g = SymForm.identity(n)
    ric = g * (n - 1)
    r = n * (n - 1)
    # (3 - (12 + 6)/(2*5)) / 4 = (3 - 1.8) / 4 = 0.3
    np.testing.assert_allclose(weighted_schouten(ric, r, g, m, mu).comps, 0.3 * np.eye(n), atol=1e-15)


def test_weighted_weyl_is_weyl_at_zero_m():
    rng = np.random.default_rng(11)
    rm = random_curvature(rng, 5)
    weyl, _, _ = ricci_decompose(rm)
    np.testing.assert_allclose(weighted_weyl(rm, m=0.0, mu=2.0).comps, weyl.comps, atol=1e-12)


def test_weighted_weyl_vanishes_on_matching_spaceform():
    n, m, mu = 4, 3.0, 2.0
    g = SymForm.identity(n)
    rm = kn_wedge(g, g) * (-mu / (m - 1) / 2)
    assert np.max(np.abs(weighted_weyl(rm, m=m, mu=mu).comps)) < 1e-15
    assert np.max(np.abs(weighted_weyl_decomposed(rm, m=m, mu=mu).comps)) < 1e-15


def test_weighted_weyl_infinite_m_is_rm():
    rng = np.random.default_rng(12)
    rm = random_curvature(rng, 4)
    assert weighted_weyl(rm, m=math.inf, mu=1.0) is rm


@pytest.mark.parametrize("n", DIMS)
@pytest.mark.parametrize("m", [0.0, 1.5, 7.0])
def test_weighted_weyl_two_paths(n, m):
    rng = np.random.default_rng(int(30 * n + 10 * m))
    for _ in range(10):
        rm = random_curvature(rng, n)
        mu = rng.normal()
        d = weighted_weyl(rm, m=m, mu=mu).comps - weighted_weyl_decomposed(rm, m=m, mu=mu).comps
        assert np.max(np.abs(d)) < 1e-12


@pytest.mark.parametrize("n", DIMS)
def test_norm_channels_match_direct_norm(n):
    rng = np.random.default_rng(40 + n)
    for m in (0.0, 2.0, 9.0):
        rm = random_curvature(rng, n)
        direct = norm_sq(weighted_weyl(rm, m=m, mu=1.0))
        assert weighted_norm_channels(rm, m, 1.0) == pytest.approx(direct, rel=1e-12)


def test_norm_of_g_wedge_g():
    n = 5
    g = SymForm.identity(n)
    assert norm_sq(kn_wedge(g, g)) == pytest.approx(2 * n * (n - 1))
    h = random_sym_form(np.random.default_rng(0), n).traceless()
    assert norm_sq(kn_wedge(h, g)) == pytest.approx((n - 2) * form_norm_sq(h))


def test_norm_comparison_chain():
    rng = np.random.default_rng(50)
    for _ in range(50):
        rm = random_curvature(rng, 4)
        lo, mid, hi = norm_comparison(rm, m=2.0)
        assert lo <= mid * (1 + 1e-12)
        assert mid <= hi * (1 + 1e-12)
    g = SymForm.identity(4)
    spaceform = kn_wedge(g, g) * (-0.5)
    assert norm_comparison(spaceform, m=2.0) == pytest.approx((0.0, 0.0, 0.0), abs=1e-28)
    with pytest.raises(ValueError):
        norm_comparison(spaceform, m=1.0)


@settings(max_examples=40, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.sampled_from(DIMS),
    m=st.floats(1.05, 50.0),
    mu=st.floats(0.1, 5.0),
)
def test_norm_comparison_property(seed, n, m, mu):
    rm = random_curvature(np.random.default_rng(seed), n)
    lo, mid, hi = norm_comparison(rm, m=m, mu=mu)
    assert lo <= mid * (1 + 1e-10) + 1e-12
    assert mid <= hi * (1 + 1e-10) + 1e-12


def test_quadratic_weyl_identity_trivial_inputs():
    assert algebra_lemma_residual(AlgCurv.zeros(4), m=2.0, mu=0.0) == 0.0
    g = SymForm.identity(4)
    rm = kn_wedge(g, g) * (-1.0 / 2 / 2.0)
    assert algebra_lemma_residual(rm, m=3.0, mu=2.0) < 1e-14


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(0, 2**32 - 1),
    n=st.sampled_from(DIMS),
    m=st.sampled_from([0.0, 1.5, 7.0]) | st.floats(0.0, 100.0),
    mu=st.floats(-3.0, 3.0),
)
def test_quadratic_weyl_identity_property(seed, n, m, mu):
    rm = random_curvature(np.random.default_rng(seed), n)
    scale = max(1.0, np.max(np.abs(rm.comps)) ** 2)
    assert algebra_lemma_residual(rm, m=m, mu=mu) < 1e-11 * scale


def test_trace_identity():
    rng = np.random.default_rng(60)
    rm = random_curvature(rng, 4)
    trace_of_a = contract(weighted_weyl(rm, m=0.0, mu=1.0), SymForm.identity(4))
    assert np.max(np.abs(trace_of_a.comps)) < 1e-12
    for n in DIMS:
        for m in (0.0, 1.5, 7.0):
            assert trace_A_identity_residual(random_curvature(rng, n), m=m, mu=rng.normal()) < 1e-12
    g = SymForm.identity(4)
    sphere = kn_wedge(g, g) * 0.5
    assert trace_A_identity_residual(sphere, m=2.0, mu=3.0) < 1e-14


def test_json_dump_round_trip():
    rm = random_curvature(np.random.default_rng(70), 3)
    again = AlgCurv.from_json(rm.to_json())
    np.testing.assert_array_equal(again.comps, rm.comps)
