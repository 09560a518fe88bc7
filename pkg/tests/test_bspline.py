import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from numpy.testing import assert_allclose

from bayeskan.bspline import (
    SplineCurve,
    derivative_curve,
    eval_basis,
    eval_spline,
    greville_affine,
    localize,
    make_uniform_knots,
    polynomial_coeffs,
)


def test_uniform_knots_example():
    kn = make_uniform_knots(-1, 1, 2, 2)
    assert kn.knots.shape == (7,)
    assert_allclose(np.diff(kn.knots), 1 / 3)
    assert_allclose(kn.xi0, -1 / 3)
    assert_allclose(kn.xiG, 1 / 3)


def test_hidden_grid_half_spacing():
    for H in (2, 3, 5):
        kn = make_uniform_knots(-H, H, 4 * H - 4, 2)
        assert_allclose(kn.spacing, 0.5)


def test_linear_basis_midpoint():
    kn = make_uniform_knots(0, 1, 1, 1)
    vals = eval_basis(kn, 0.5)
    assert_allclose(vals, [0.5, 0.5])


@pytest.mark.parametrize("args", [(1, 0, 2, 2), (0, 1, 0, 2), (0, 1, 2, 0)])
def test_make_knots_rejects(args):
    with pytest.raises(ValueError):
        make_uniform_knots(*args)


@settings(max_examples=40, deadline=None)
@given(G=st.integers(1, 12), m=st.integers(1, 4), u=st.floats(0, 1))
def test_partition_of_unity(G, m, u):
    kn = make_uniform_knots(-1, 2, G, m)
    x = kn.xi0 + u * (kn.xiG - kn.xi0)
    vals = eval_basis(kn, x)
    assert np.all(vals >= -1e-15)
    assert_allclose(vals.sum(), 1.0, atol=1e-12)
    assert np.count_nonzero(vals > 1e-15) <= m + 1


def test_support_and_outside():
    kn = make_uniform_knots(0, 1, 5, 3)
    x = np.linspace(-0.5, 1.5, 401)
    B = eval_basis(kn, x)
    for b in range(kn.n_basis):
        lo, hi = kn.support(b)
        outside = (x < lo) | (x > hi)
        assert np.all(B[outside, b] == 0)
    assert np.all(B[x < 0] == 0) and np.all(B[x > 1] == 0)


def test_right_endpoint_closed():
    kn = make_uniform_knots(0, 1, 4, 2)
    assert_allclose(eval_basis(kn, kn.xiG).sum(), 1.0)


def test_constant_and_zero_curves():
    kn = make_uniform_knots(-1, 1, 6, 3)
    x = np.linspace(kn.xi0, kn.xiG, 57)
    assert_allclose(eval_spline(SplineCurve(kn, np.full(kn.n_basis, 2.5)), x), 2.5)
    assert_allclose(eval_spline(SplineCurve(kn, np.zeros(kn.n_basis)), x), 0.0)


def test_eval_spline_matches_basis_sum():
    rng = np.random.default_rng(0)
    kn = make_uniform_knots(-2, 3, 7, 3)
    c = rng.normal(size=kn.n_basis)
    x = np.linspace(-2.5, 3.5, 301)
    assert_allclose(eval_spline(SplineCurve(kn, c), x), eval_basis(kn, x) @ c, atol=1e-13)


def test_greville_affine_example():
    kn = make_uniform_knots(-1, 1, 4, 2)
    curve = greville_affine(2, -1, kn)
    assert_allclose(eval_spline(curve, 0.25), -0.5, atol=1e-14)
    x = np.linspace(kn.xi0, kn.xiG, 50)
    assert_allclose(eval_spline(curve, x), 2 * x - 1, atol=1e-13)


@pytest.mark.parametrize("m", [1, 2, 3, 4])
def test_polynomial_reproduction(m):
    kn = make_uniform_knots(-4, 4, 12, m)
    x = np.linspace(kn.xi0, kn.xiG, 101)
    for p in range(m + 1):
        assert_allclose(eval_spline(polynomial_coeffs(p, kn), x), x**p, atol=1e-10)


def test_polynomial_example():
    kn = make_uniform_knots(-4, 4, 12, 2)
    assert_allclose(eval_spline(polynomial_coeffs(2, kn), 1.5), 2.25, atol=1e-12)
    with pytest.raises(ValueError):
        polynomial_coeffs(3, kn)


def test_derivative_constant_and_affine():
    kn = make_uniform_knots(-1, 1, 5, 2)
    d0 = derivative_curve(SplineCurve(kn, np.ones(kn.n_basis)))
    assert_allclose(d0.coeffs, 0.0)
    d1 = derivative_curve(greville_affine(2, 1, kn))
    x = np.linspace(kn.xi0, kn.xiG, 100)[1:-1]
    assert_allclose(eval_spline(d1, x), 2.0, atol=1e-12)


def test_derivative_finite_difference_oracle():
    rng = np.random.default_rng(3)
    kn = make_uniform_knots(-1, 1, 8, 3)
    curve = SplineCurve(kn, rng.normal(size=kn.n_basis))
    d = derivative_curve(curve)
    x = rng.uniform(kn.xi0 + 1e-3, kn.xiG - 1e-3, 200)
    h = 1e-6
    fd = (eval_spline(curve, x + h) - eval_spline(curve, x - h)) / (2 * h)
    assert_allclose(eval_spline(d, x), fd, rtol=1e-6, atol=1e-6)
    assert np.all(np.abs(eval_spline(d, x)) <= np.max(np.abs(d.coeffs)) + 1e-12)


def test_derivative_rejects_linear():
    kn = make_uniform_knots(0, 1, 3, 1)
    with pytest.raises(ValueError):
        derivative_curve(SplineCurve(kn, np.zeros(kn.n_basis)))


def test_localize_agrees_on_interval():
    rng = np.random.default_rng(1)
    kn = make_uniform_knots(-3, 3, 10, 2)
    curve = SplineCurve(kn, rng.normal(size=kn.n_basis))
    loc = localize(curve, 0, 1)
    x = np.linspace(0, 1, 77)
    assert_allclose(eval_spline(loc, x), eval_spline(curve, x))
    assert np.count_nonzero(loc.coeffs) < kn.n_basis


def test_coefficient_length_checked():
    kn = make_uniform_knots(0, 1, 3, 2)
    with pytest.raises(ValueError):
        SplineCurve(kn, np.zeros(kn.n_basis + 1))
