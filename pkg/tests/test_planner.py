import math
import warnings

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bayeskan.planner import (
    ArchitecturePlan,
    CompositionalSpec,
    SmoothnessWarning,
    beta_exponent,
    check_rho,
    check_smoothness_degree,
    compositional_indices,
    intrinsic_dimension,
    intrinsic_smoothness,
    plan_adaptive,
    plan_compositional,
    plan_sas,
)


def quiet_plan(*args, **kw):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmoothnessWarning)
        return plan_sas(*args, **kw)


def test_intrinsic_smoothness_examples():
    assert_allclose(intrinsic_smoothness((2, 2, 2)), 2 / 3)
    assert_allclose(intrinsic_smoothness((2, 4)), 4 / 3)
    assert_allclose(intrinsic_smoothness((1.7,)), 1.7)
    with pytest.raises(ValueError):
        intrinsic_smoothness((1, 0))


def test_intrinsic_dimension_examples():
    assert_allclose(intrinsic_dimension((3, 3, 3)), 3)
    assert_allclose(intrinsic_dimension((2, 4)), 1.5)


def test_beta_cases():
    b = beta_exponent((2, 4), math.inf)
    assert (b["omega"], b["kappa"]) == (0.0, 0.0)
    assert_allclose(b["beta"], 0.5)
    assert beta_exponent((0.7, 5), 2)["kappa"] == 0.0
    b = beta_exponent((2, 2), 1)
    assert_allclose([b["omega"], b["kappa"], b["beta"]], [0.5, 2.0, 1.5])
    with pytest.raises(ValueError):
        beta_exponent((0.8, 0.8), 1)


def test_worked_plan():
    with pytest.warns(SmoothnessWarning, match="A4"):
        plan = plan_sas(1000, (2, 2), math.inf, 2)
    assert (plan.N, plan.H, plan.G, plan.D, plan.L0, plan.S) == (10, 7, 24, 40, 5, 10)
    assert_allclose(plan.beta, 0.5)
    assert_allclose(plan.Bstar, math.sqrt(10))
    assert_allclose(plan.eps_n, 1000 ** (-1 / 3) * math.sqrt(math.log(1000)))
    assert abs(plan.eps_n - 0.2628) < 1e-4
    assert plan.hidden_spacing == 0.5
    assert quiet_plan(1000, (2, 2), math.inf, 2, G0=2).T == 131080


def test_plan_strict_rejects_a4():
    with pytest.raises(ValueError, match="A4"):
        plan_sas(1000, (2, 2), math.inf, 2, strict=True)
    with pytest.raises(ValueError):
        plan_sas(1000, (0.5,), math.inf, 1)


def test_plan_d1_depth_and_satisfied_a4():
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        plan = plan_sas(500, (1.5,), math.inf, 3)
    assert plan.L0 == 3 and plan.diagnostics == ()


def test_plan_monotone_and_spacing():
    prev = None
    for n in [10, 50, 100, 500, 1000, 5000, 10**4, 10**5]:
        p = quiet_plan(n, (2, 1.5), math.inf, 2)
        assert p.hidden_spacing == 0.5
        cur = (p.N, p.D, p.G, p.H, p.S)
        if prev is not None:
            assert all(c >= q for c, q in zip(cur, prev))
        prev = cur


def test_plan_roundtrip():
    p = quiet_plan(1000, (2, 2), math.inf, 2)
    assert ArchitecturePlan.from_json(p.to_json()) == p
    assert p.spec().T == p.T


def test_adaptive():
    ad = plan_adaptive({"s_tilde_min": 1, "s_min": 2}, math.inf, 0.1)
    assert_allclose(ad.beta_ad, 0.55)
    assert ad.plan_of_N(4).hidden_spacing == 0.5
    with pytest.raises(ValueError):
        plan_adaptive({"s_tilde_min": 1, "s_min": 2}, math.inf, None)
    with pytest.raises(ValueError):
        plan_adaptive({"s_tilde_min": 0.4, "s_min": 2}, 1)


SPEC2 = CompositionalSpec(dims=(1, 1, 1), effective_dims=(1, 1), layer_smoothness=((2,), (3,)))


def test_compositional_indices_example():
    idx = compositional_indices(SPEC2)
    assert idx.t_star_layers == (1.0, 1.0)
    assert_allclose(idx.s_star_layers, (2.0, 3.0))
    assert (idx.j_star, idx.s_star) == (1, 2.0)
    one = CompositionalSpec((2, 1), (2,), ((2, 4),))
    i1 = compositional_indices(one)
    assert_allclose(i1.s_star, intrinsic_smoothness((2, 4)))
    assert_allclose(i1.t_star, intrinsic_dimension((2, 4)))


def test_compositional_plan_example():
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", SmoothnessWarning)
        plan = plan_compositional(math.e, SPEC2, 2)
    assert_allclose(plan.eps_n, math.exp(-0.4), rtol=1e-12)
    b = plan.constants["layer_betas"]
    assert_allclose(b, [0.5, 1.1 / 3])
    assert plan.beta == b[0]


def test_compositional_rejects_bad_layers():
    with pytest.raises(ValueError):
        CompositionalSpec((2, 1), (3,), ((1, 1, 1),))
    with pytest.raises(ValueError, match="layer 2"):
        compositional_indices(
            CompositionalSpec((1, 1, 1), (1,1), ((2,), (0.4,)), p=1)
        )


def test_check_rho_examples():
    plan = quiet_plan(10**5, (2, 2), math.inf, 2)
    T, S, n = plan.T, plan.S, 10**5
    assert check_rho(1 / T, T, S, n).passed
    assert not check_rho(0.5, T, S, n).pass_upper
    r = check_rho(S / (T * n), T, S, n)
    assert_allclose(r.log_ratio, 1.0, rtol=1e-12)


def test_smoothness_degree_check():
    assert check_smoothness_degree((1.5, 1.2), math.inf, 3) is None
    with pytest.raises(ValueError):
        check_smoothness_degree((0.5,), math.inf, 1)


def test_remark_rate_identity():
    rng = np.random.default_rng(0)
    for _ in range(100):
        d = int(rng.integers(1, 6))
        s = rng.uniform(0.5, 6, size=d)
        st = intrinsic_smoothness(s)
        lhs = 100 ** (-st / (2 * st + 1))
        rhs = 100 ** (-s.min() / (2 * s.min() + intrinsic_dimension(s)))
        assert abs(lhs - rhs) <= 1e-12
        assert st <= s.min() + 1e-12
        assert 1 - 1e-12 <= intrinsic_dimension(s) <= d + 1e-12
