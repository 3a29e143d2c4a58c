import json
import math

import numpy as np
import pytest

import gemhp

HAWKES = {
    "schema": "gemhp/model-v1",
    "components": 1,
    "parameters": [
        {"name": "nu", "lower": 0.05, "upper": 5, "value": 1},
        {"name": "a", "lower": 0.01, "upper": 5, "value": 0.5},
        {"name": "b", "lower": 0.1, "upper": 20, "value": 1.3},
    ],
    "marks": {"space": {"kind": "continuous", "dim": 1},
              "kernels": {"family": "gaussian-ar1", "mean": 0, "coef": 0.5, "sd": 1}},
    "baselines": [{"form": "constant", "coef": ["nu"]}],
    "kernels": [{"target": 0, "source": 0, "terms": [{"poly": ["a"], "r": "b"}]}],
    "x0": [0.0],
}

POISSON = {
    "schema": "gemhp/model-v1",
    "components": 1,
    "parameters": [{"name": "nu", "lower": 0.05, "upper": 5, "value": 1}],
    "baselines": [{"form": "constant", "coef": ["nu"]}],
}


@pytest.fixture(scope="module")
def hawkes():
    return gemhp.ModelSpec.from_json(json.dumps(HAWKES))


@pytest.fixture(scope="module")
def poisson():
    return gemhp.ModelSpec.from_json(json.dumps(POISSON))


def test_spec_properties(hawkes):
    assert hawkes.d == 1
    assert hawkes.parameter_names == ["nu", "a", "b"]
    np.testing.assert_allclose(hawkes.initial, [1.0, 0.5, 1.3])


def test_poisson_likelihood_closed_form(poisson):
    s = gemhp.EventStream(1.0, 1, [0.4], [0], [[0.0]], [0.0])
    l = gemhp.log_likelihood(s, poisson, np.array([2.0]))
    assert l["total"] == pytest.approx(math.log(2.0) - 2.0, abs=1e-15)


def test_simulate_is_deterministic(hawkes):
    a = gemhp.simulate(hawkes, horizon=200.0, seed=3)
    b = gemhp.simulate(hawkes, horizon=200.0, seed=3)
    assert len(a) > 100
    np.testing.assert_array_equal(a.times, b.times)
    assert np.all(np.diff(a.times) > 0)


def test_stream_roundtrip(hawkes, tmp_path):
    s = gemhp.simulate(hawkes, horizon=100.0, seed=4)
    path = str(tmp_path / "s.jsonl")
    gemhp.write_stream(path, s, hawkes)
    back = gemhp.read_stream(path)
    np.testing.assert_array_equal(back.times, s.times)
    assert gemhp.log_likelihood(back, hawkes)["total"] == gemhp.log_likelihood(s, hawkes)["total"]


def test_fit_poisson_is_count_over_horizon(poisson):
    s = gemhp.simulate(poisson, np.array([1.5]), horizon=500.0, seed=5)
    fit = gemhp.fit_qmle(s, poisson)
    assert fit["converged"]
    assert fit["named"]["nu"] == pytest.approx(len(s) / s.horizon, rel=1e-6)
    lo, hi = gemhp.wald_intervals(s, poisson, fit["theta_hat"])[0]
    assert lo < fit["theta_hat"][0] < hi


def test_fit_hawkes_and_residuals(hawkes):
    s = gemhp.simulate(hawkes, horizon=1000.0, seed=6)
    fit = gemhp.fit_qmle(s, hawkes, seed=1)
    assert fit["converged"]
    assert np.all(np.abs(fit["theta_hat"] - hawkes.initial) < 5 * np.sqrt(np.diag(fit["cov_hat"])))
    res = gemhp.rescaled_residuals(s, hawkes, fit["theta_hat"])
    assert res[0]["p_value"] > 0.001
    g = gemhp.score(s, hawkes, fit["theta_hat"])["grad"]
    assert np.max(np.abs(g)) < 1e-3


def test_qbe_small(poisson):
    s = gemhp.simulate(poisson, np.array([1.0]), horizon=300.0, seed=7)
    post = gemhp.fit_qbe(s, poisson, draws=2000, burn_in=500, seed=1)
    assert 0.0 < post["acceptance_rate"] < 1.0
    assert post["theta_tilde"][0] == pytest.approx(len(s) / s.horizon, rel=0.05)


def test_stability(hawkes):
    assert gemhp.check_stability(hawkes, np.array([1.0, 0.5, 1.0]))["rho_bound"] == pytest.approx(0.5)
    assert not gemhp.check_stability(hawkes, np.array([1.0, 1.2, 1.0]))["ok"]
    with pytest.raises(gemhp.InputError):
        gemhp.simulate(hawkes, np.array([1.0, 1.2, 1.0]), horizon=10.0)


def test_bad_model_raises_input_error():
    with pytest.raises(gemhp.InputError):
        gemhp.ModelSpec.from_json('{"schema": "gemhp/model-v1", "bogus": 1}')
    with pytest.raises(ValueError):
        gemhp.ModelSpec.from_json("{not json")


def test_lan_poisson(poisson):
    s = gemhp.simulate(poisson, np.array([1.0]), horizon=2000.0, seed=8)
    fit = gemhp.fit_qmle(s, poisson)
    (d,) = gemhp.lan_profile(s, poisson, fit["theta_hat"], [np.array([1.0])])
    assert d["relative_error"] < 0.05
