import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bayeskan.approx import (
    RangeError,
    TensorTerm,
    assemble,
    build_approximator,
    candidate_terms,
    cardinal_spline,
    hidden_knots,
    l2_error,
    product_module,
    product_pair,
    psi_edge,
    resolution_levels,
    select_terms,
    square_edge,
    tensor_eval,
)
from bayeskan.besov import SmoothnessProfile
from bayeskan.bspline import SplineCurve, eval_spline, make_uniform_knots

PROF2 = SmoothnessProfile((2.0, 2.0))


def test_cardinal_spline_examples():
    assert_allclose(cardinal_spline(1, 1.0), 1.0)
    assert cardinal_spline(3, -0.1) == 0.0 and cardinal_spline(3, 4.0) == 0.0
    for m in (1, 2, 3, 4):
        z = 0.37 + np.arange(-2, m + 3)
        assert_allclose(np.sum(cardinal_spline(m, z)), 1.0, atol=1e-14)
        assert np.all(cardinal_spline(m, np.linspace(-1, m + 2, 200)) >= 0)


@pytest.mark.parametrize("m", [2, 3])
def test_psi_edge_exact(m):
    kn = hidden_knots(m + 2, m)
    c = psi_edge(kn)
    z = np.linspace(-kn.b, kn.b, 1001)
    assert_allclose(eval_spline(SplineCurve(kn, c), z), cardinal_spline(m, z), atol=1e-10)


def test_psi_edge_needs_room():
    with pytest.raises(RangeError):
        psi_edge(hidden_knots(2, 2))


def test_square_edge_range_guard():
    kn = hidden_knots(2, 2)
    x = np.linspace(-1, 1, 21)
    assert_allclose(eval_spline(square_edge(kn, -1, 1), x), x**2, atol=1e-12)
    with pytest.raises(RangeError):
        square_edge(kn, -5, 5)


def test_product_pair_examples():
    kn = hidden_knots(3, 2)
    pp = product_pair(kn)
    assert_allclose(pp([[0.3, -0.5]], kn)[0, 0], -0.15, atol=1e-10)
    rng = np.random.default_rng(0)
    x = rng.uniform(-1, 1, 100)
    assert_allclose(pp(np.stack([x, np.zeros_like(x)], 1), kn)[:, 0], 0.0, atol=1e-10)
    assert_allclose(pp(np.stack([x, np.ones_like(x)], 1), kn)[:, 0], x, atol=1e-10)
    with pytest.raises(RangeError):
        product_pair(hidden_knots(2, 2), -2, 2)


def test_product_module_examples():
    kn = hidden_knots(3, 2)
    pm = product_module(4, kn)
    assert pm.depth == 4
    assert_allclose(pm([[0.5] * 4], kn)[0, 0], 0.0625, atol=1e-10)
    assert_allclose(pm([[0.3, 0.0, 0.9, 0.4]], kn)[0, 0], 0.0, atol=1e-10)
    x = np.random.default_rng(1).random((20, 1))
    assert_allclose(product_module(1, kn)(x, kn), x, atol=1e-12)
    with pytest.raises(ValueError):
        product_module(0, kn)


@pytest.mark.parametrize("fan_in", [2, 3, 5, 8])
def test_product_module_random(fan_in):
    kn = hidden_knots(3, 2)
    pm = product_module(fan_in, kn)
    assert pm.depth == 2 * math.ceil(math.log2(fan_in))
    X = np.random.default_rng(fan_in).random((200, fan_in))
    assert_allclose(pm(X, kn)[:, 0], X.prod(axis=1), atol=1e-10)


def test_resolution_levels_anisotropic():
    lv = resolution_levels(SmoothnessProfile((4.0, 4 / 3)), 8)
    assert lv[0] == (0, (0, 0))
    assert all(a == (math.floor(k / 4), math.floor(k * 3 / 4)) for k, a in lv)
    assert len({a for _, a in lv}) == len(lv)


def test_candidate_terms_touch_cube():
    c = candidate_terms(PROF2, 4, 2)
    X = np.random.default_rng(2).random((500, 2))
    for t in c[:40]:
        lo = [(j) / 2**a for a, j in zip(t.scales(PROF2.s), t.j)]
        assert all(v < 1 for v in lo)
    assert len(c) == len({(t.k, t.j) for t in c})
    assert np.all(tensor_eval(c[:1], X, PROF2.s, 2) >= 0)


def test_select_terms_zero():
    terms = select_terms(lambda X: np.zeros(X.shape[0]), PROF2, 8, 2)
    assert all(t.alpha == 0 for t in terms)


def test_select_terms_plant_and_recover():
    planted = TensorTerm(0, (-1, 0), 0.7)
    f0 = lambda X: tensor_eval([planted], X, PROF2.s, 2)
    terms = select_terms(f0, PROF2, 8, 2)
    top = terms[0]
    assert (top.k, top.j) == (0, (-1, 0))
    assert abs(top.alpha - 0.7) < 1e-6
    assert all(abs(t.alpha) < 1e-6 for t in terms[1:])


@pytest.mark.parametrize("d", [1, 2, 3])
def test_assembly_matches_tensor(d):
    prof = SmoothnessProfile((2.0,) * d)
    rng = np.random.default_rng(d)
    cands = candidate_terms(prof, 8, 2)
    pick = rng.choice(len(cands), min(8, len(cands)), replace=False)
    terms = [TensorTerm(cands[i].k, cands[i].j, float(rng.normal())) for i in pick]
    real = assemble(terms, prof, 2, N=8)
    X = rng.random((300, d))
    assert_allclose(real(X), tensor_eval(terms, X, prof.s, 2), atol=1e-8)
    assert real.spec.L == (3 if d == 1 else 3 + 2 * math.ceil(math.log2(d)))
    assert real.spec.D == 2 * d * 8


def test_assembly_certificates():
    terms = [TensorTerm(2, (1, 0), 0.4)]
    real = assemble(terms, PROF2, 2, N=1)
    c = real.certificates
    assert c["nnz"] == real.theta.nnz and c["silu_zero"]
    assert not np.any(real.theta.theta[real.spec.flat_index(0, 0, 0, 0)])
    with pytest.raises(AssertionError):
        assemble(terms, PROF2, 2, N=1, S_0=1)


def test_assembly_range_error():
    terms = [TensorTerm(12, (0, 0), 1.0)]
    with pytest.raises(RangeError):
        assemble(terms, PROF2, 2, N=1, H=3)


def test_build_and_l2_error():
    f0 = lambda X: np.sin(2 * X[:, 0]) * np.cos(X[:, 1])
    real = build_approximator(f0, PROF2, 16, 2)
    e = l2_error(f0, real, mc_n=4000, rng=0)
    assert e.value < 0.05 and e.se > 0
    planted = l2_error(real, real, mc_n=1000, rng=0)
    assert planted.value <= 3 * planted.se + 1e-12
