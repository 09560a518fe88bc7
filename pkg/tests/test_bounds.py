import math
from types import SimpleNamespace

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bayeskan.bounds import (
    TINY_SPEC,
    activation_bound,
    brute_force_cover,
    cover_size,
    default_tiny_instances,
    entropy_bound,
    layer_lipschitz_C,
    lipschitz_K,
    verify_activation,
    verify_lipschitz,
)
from bayeskan.kan import KanSpec


def test_lipschitz_K_example():
    spec = SimpleNamespace(L=2, D=1, d=1, G=4, H=1, m=2, a0=-1, b0=1)
    assert_allclose(lipschitz_K(spec, 1), 144)
    assert_allclose(lipschitz_K(spec, 2), 144 * 4)
    with pytest.raises(ValueError):
        lipschitz_K(spec, 0.5)


def test_layer_C_example():
    spec = KanSpec(L=2, d=3, D=3, G0=6, G=4, H=2.0, m=2)
    assert spec.knots(1).spacing == 0.5
    assert_allclose(layer_lipschitz_C(spec, 1.0, 1), 27)
    assert layer_lipschitz_C(spec, 0.0, 1) == 0
    with pytest.raises(IndexError):
        layer_lipschitz_C(spec, 1.0, 2)


def test_activation_bound_examples():
    spec = SimpleNamespace(L=2, D=1, d=1, a0=-1, b0=1)
    assert_allclose(activation_bound(spec, 0.5, 0), 1.0)
    assert activation_bound(spec, 0.0) == 0


def test_entropy_bound_example():
    assert_allclose(entropy_bound(None, 1, 1, 1, T=3, K=10), math.log(3 * math.e) + math.log(11))
    assert abs(entropy_bound(None, 1, 1, 1, T=3, K=10) - 4.4965) < 1e-4
    v = entropy_bound(None, 1, 4, 1, T=4, K=10)
    assert_allclose(v - 4 * math.log(11), 4)
    with pytest.raises(ValueError):
        entropy_bound(None, 1, 5, 1, T=4, K=10)


def test_cover_size_single_cell_count():
    K, eps = 7.0, 0.3
    assert cover_size(1, 1, 2 * eps / K, eps, K) == 2
    assert cover_size(1, 1, eps / K, eps, K) == 1
    assert cover_size(3, 2, eps / K, eps, K) == 3 + 3


def test_verify_lipschitz_identical_pair_ratio_zero():
    spec = KanSpec(L=2, d=1, D=2, G0=3, G=4, H=2.0, m=2)
    r = verify_lipschitz(spec, 1.0, 0.0 + 1e-300, trials=4, grid_n=11, rng=0)
    assert r.empirical_max <= 1e-6


def test_verify_lipschitz_small():
    spec = KanSpec(L=3, d=2, D=2, G0=6, G=4, H=2.0, m=2)
    for B in (1.0, 3.0):
        r = verify_lipschitz(spec, B, 0.1 * B, trials=200, grid_n=9, rng=1)
        assert r.passed and r.empirical_max > 0


def test_verify_activation():
    spec = KanSpec(L=3, d=2, D=3, G0=6, G=4, H=2.0, m=2)
    assert verify_activation(spec, 1.5, trials=200, rng=2).passed


def test_tiny_instances_and_cover():
    inst = default_tiny_instances()
    assert all(i["spec"].T <= 6 and i["S"] <= 2 for i in inst)
    res = brute_force_cover(TINY_SPEC, 1.0, 1, 2.0, rng=0, n_check=200)
    assert res.valid and res.log_size <= res.entropy
    assert int(res) == res.size


def test_cover_rejects_large():
    big = KanSpec(L=2, d=1, D=2, G0=3, G=4, H=2.0, m=2)
    with pytest.raises(ValueError):
        brute_force_cover(big, 1.0, 1, 1.0)
