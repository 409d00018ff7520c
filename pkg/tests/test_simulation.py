import math

import numpy as np
import pytest
from scipy import integrate

from sglmidas.design import build_design
from sglmidas.simulation import (
    METHODS, ORACLE, WEIGHT_NAMES, SimulationScenario, beta_weight, estimated_weights, method_design,
    pseudo_empirical_panel, run_replication, run_scenario, simulate_ardl_midas, true_weights, var_transition,
)

TINY = dict(T=30, n_noise=2, degree=3, replications=2, seed=5, n_lambda=10, lambda_min_ratio=1e-2,
            alpha_grid=(0.5, 1.0), custom=True)


def test_beta_weight_is_a_density():
    for a, b in ((1, 3), (2, 3), (2, 2)):
        val, _ = integrate.quad(beta_weight, 0, 1, args=(a, b))
        assert val == pytest.approx(1.0, abs=1e-10)
    assert beta_weight(0.0, 1, 3) == pytest.approx(3.0)
    with pytest.raises(ValueError):
        beta_weight(0.5, 0.5, 1)
    with pytest.raises(ValueError):
        beta_weight(1.5, 2, 2)
    assert true_weights(12).shape == (3, 12)


def test_simulated_target_follows_the_ardl_recursion():
    sc = SimulationScenario(T=50)
    data = simulate_ardl_midas(sc, np.random.default_rng(0), full=True)
    y = data.panel.target.values
    lhs = y[2:] - sc.rho1 * y[1:-1] - sc.rho2 * y[:-2]
    np.testing.assert_allclose(lhs, data.signal[2:] + data.noise[2:], atol=1e-10)
    assert len(y) == sc.ar_lags + sc.T + 1
    assert data.holdout == len(y)


def test_signal_uses_contemporaneous_window_with_true_weights():
    sc = SimulationScenario(T=50)
    data = simulate_ardl_midas(sc, np.random.default_rng(1), full=True)
    spec = method_design("LASSO-U", sc, sc.m)
    prob = build_design(data.panel, spec)
    start = 1 + sc.ar_lags
    omega = true_weights(sc.m)
    # unrestricted columns are the raw lags divided by m
    sig = sum(prob.X[:, start + k * sc.m: start + (k + 1) * sc.m] @ omega[k] for k in range(3))
    np.testing.assert_allclose(sig, data.signal[prob.periods - 1], atol=1e-12)


def test_hf_process_variants():
    for kw in (dict(hf_noise="student_t"), dict(hf_process="var", n_noise=47), dict(hf_rho=0.7)):
        sc = SimulationScenario(**kw)
        panel = simulate_ardl_midas(sc, np.random.default_rng(2))
        assert len(panel.covariates) == sc.n_covariates
        assert all(np.all(np.isfinite(c.values)) for c in panel.covariates)
    phi = var_transition(10)
    assert phi[0, 4] == 0.15 and phi[5, 9] == 0.075 and phi[0, 5] == 0.0


def test_scenario_validation():
    with pytest.raises(ValueError, match="unknown scenario key"):
        SimulationScenario.from_dict({"T": 50, "bogus": 1})
    with pytest.raises(ValueError, match="published setting"):
        SimulationScenario(T=75)
    SimulationScenario(T=75, custom=True)
    with pytest.raises(ValueError):
        SimulationScenario(methods=("OLS",))
    with pytest.raises(ValueError):
        SimulationScenario(replications=0)
    with pytest.raises(ValueError):
        SimulationScenario(selection_rule="median")
    with pytest.raises(ValueError):
        SimulationScenario(degree=12, lag_fraction="half")
    sc = SimulationScenario()
    assert SimulationScenario.from_dict(sc.to_dict()) == sc
    assert sc.leads == {"forecast": 12, "nowcast": 11}
    assert SimulationScenario(lag_fraction="half").n_lags == 6


def test_estimated_weights_recover_basis_combination():
    sc = SimulationScenario()
    spec = method_design("SGL-M", sc, sc.m)
    L = sc.degree + 1
    beta = np.zeros(1 + sc.ar_lags + sc.n_covariates * L)
    beta[1 + sc.ar_lags] = 2.0  # constant basis function of the first covariate
    w = estimated_weights("SGL-M", beta, sc, spec)
    np.testing.assert_allclose(w[0], 2.0)
    assert np.all(w[1:] == 0)


def test_replications_are_reproducible_and_independent_of_jobs():
    sc = SimulationScenario(**TINY)
    a = run_replication(sc, 1)
    b = run_replication(sc, 1)
    assert a.sq_errors == b.sq_errors
    serial = run_scenario(sc)
    parallel = run_scenario(sc, n_jobs=2)
    assert serial.to_csv() == parallel.to_csv()
    assert serial.replications == 2


def test_scenario_result_layout():
    sc = SimulationScenario(**TINY)
    res = run_scenario(sc)
    assert set(res.forecast) == set(METHODS) | {ORACLE}
    assert set(res.mise) == {"LASSO-U", "LASSO-M", "SGL-M"}
    assert set(res.mise["SGL-M"]) == set(WEIGHT_NAMES)
    lines = res.to_csv().splitlines()
    assert lines[0] == "measure,method,weight,mean,std_error"
    assert len(lines) == 1 + 2 * 7 + 3 * 3
    # the oracle error is the holdout innovation
    assert res.forecast[ORACLE][0] == res.nowcast[ORACLE][0]


def test_subset_of_methods_and_information_sets():
    sc = SimulationScenario(**{**TINY, "methods": ("SGL-M",), "information_sets": ("nowcast",)})
    res = run_scenario(sc)
    assert res.forecast == {} and set(res.nowcast) == {"SGL-M", ORACLE}
    assert res.mise == {}


def test_pseudo_empirical_panel():
    rng = np.random.default_rng(3)
    panel = pseudo_empirical_panel(rng, n_covariates=8, n_periods=40)
    assert len(panel.target) == 40 and len(panel.covariates) == 8
    assert all(c.first_period == 0 and len(c) == 41 * 3 for c in panel.covariates)
    assert [c.category for c in panel.covariates[:4]] == ["real", "financial", "survey", "news"]
    noise = pseudo_empirical_panel(np.random.default_rng(3), n_covariates=8, n_periods=40, informative=False)
    # same covariates, target without the covariate signal
    np.testing.assert_array_equal(noise.covariates[0].values, panel.covariates[0].values)
    assert not np.allclose(noise.target.values, panel.target.values)
    with pytest.raises(ValueError):
        pseudo_empirical_panel(rng, n_covariates=2)
