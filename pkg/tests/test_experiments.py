import io
import math

import numpy as np
import pytest
from numpy.testing import assert_allclose

from bayeskan.besov import SmoothnessProfile
from bayeskan.besov import test_function as make_target
from bayeskan.experiments import (
    DataFormatError,
    build_dictionary_model,
    fit_slope,
    rate_study,
    read_dataset,
    read_table,
    simulate,
    write_dataset,
    write_table,
)
from bayeskan.kan import forward

F0 = make_target("smooth1")


def test_simulate_designs():
    for design in ("uniform", "tilted"):
        data = simulate(F0, 300, 2, 0.3, np.random.default_rng(0), design)
        assert data.X.shape == (300, 2)
        assert np.all((data.X >= 0) & (data.X <= 1))
    with pytest.raises(ValueError):
        simulate(F0, 10, 2, design="gaussian")


def test_dataset_roundtrip_exact(tmp_path):
    data = simulate(F0, 50, 2, 0.3, 1)
    p = tmp_path / "d.csv"
    write_dataset(p, data)
    back = read_dataset(p)
    assert np.array_equal(back.X, data.X) and np.array_equal(back.y, data.y)


@pytest.mark.parametrize(
    "text, where",
    [
        ("x1,x2\n0.1,0.2\n", "line 1"),
        ("x1,z,y\n0.1,0.2,0.3\n", "line 1"),
        ("x1,y\n0.1,0.2\n0.3\n", "line 3"),
        ("x1,y\n0.1,abc\n", "line 2"),
        ("x1,y\n1.5,0.2\n", "line 2"),
        ("x1,y\nnan,0.2\n", "line 2"),
        ("", "empty"),
    ],
)
def test_dataset_errors_name_line(tmp_path, text, where):
    p = tmp_path / "bad.csv"
    p.write_text(text)
    with pytest.raises(DataFormatError, match=where):
        read_dataset(p)


def test_table_roundtrip_exact(tmp_path):
    rec = [{"n": 250, "err": 0.1 + 0.2, "name": "a"}, {"n": 500, "err": 1 / 3, "name": "b"}]
    p = tmp_path / "t.csv"
    write_table(p, rec)
    assert read_table(p) == rec
    buf = io.StringIO()
    write_table(buf, rec)
    assert buf.getvalue().splitlines()[0] == "n,err,name"
    with pytest.raises(ValueError):
        write_table(p, [])


def test_fit_slope_recovers_known_exponent():
    n = np.array([250, 500, 1000, 2000, 4000] * 2)
    err = 3 * n ** (-1 / 3) * np.sqrt(np.log(n))
    fit = fit_slope(n, err)
    assert_allclose(fit["slope"], -1 / 3, atol=1e-12)
    assert fit["se"] < 1e-10 and not fit["degenerate"]
    assert_allclose(fit_slope(n, n ** -0.5, log_factor=False)["slope"], -0.5)
    assert fit_slope(n, np.zeros(n.size))["degenerate"]
    with pytest.raises(ValueError):
        fit_slope([1, 2, 1, 2], [1, 1, 1, 1])


def test_dictionary_model_layout():
    prof = SmoothnessProfile((2.0, 2.0))
    model = build_dictionary_model(prof, 250, S_0=4)
    spec = model.spec
    assert model.N == math.ceil(250 ** (1 / 3))
    assert model.S == min(math.ceil(4 * model.N), model.free.size)
    assert np.all(model.free >= spec.layer_offsets[-2])
    assert not np.any(np.isin(model.base.index, model.free))
    # with free coordinates zero the network output vanishes
    X = np.random.default_rng(0).random((10, 2))
    assert_allclose(forward(model.base, X), 0.0)
    local = build_dictionary_model(prof, 250, local=True)
    assert local.free.size < model.free.size


def test_small_rate_study_runs_and_is_deterministic():
    kw = dict(n_grid=(60, 120, 240), replicates=1, seed=3, mc_n=500,
              chain={"iters": 40, "burnin": 20, "thin": 2})
    a = rate_study(**kw)
    b = rate_study(**kw)
    assert len(a.rows) == 3
    assert a.rows == b.rows
    s = a.summary
    assert_allclose(s["target_slope"], -1 / 3)
    assert math.isfinite(s["fit_slope"])
    assert all(r["posterior_error"] > 0 for r in a.rows)
    with pytest.raises(ValueError):
        rate_study(n_grid=(100, 50, 200), replicates=1)
