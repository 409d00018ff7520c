"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py -v -s``. The Monte Carlo
criteria (4-6) take roughly 20 minutes together on one core.
"""

import filecmp
import json
import time
from pathlib import Path

import numpy as np
import pytest

from oracles import group_lasso_bcd, group_sizes, lasso_cd, random_problem, scaled_problem, sg_objective, to_original
from sglmidas.cli import main, write_project
from sglmidas.dictionary import DictionarySpec, basis_values
from sglmidas.evaluation import diebold_mariano
from sglmidas.simulation import WEIGHT_NAMES, SimulationScenario, pseudo_empirical_panel, run_scenario
from sglmidas.solver import PenaltySpec, SolverOptions, fit, kkt_residual, lambda_max, prox_sparse_group

SEED = 20240101
REFERENCE_FORECAST_SGL = 2.188
REFERENCE_NOWCAST_SGL = 2.646
REFERENCE_MISE_SGL_BETA22 = 0.092


@pytest.fixture(scope="module")
def baseline_t50():
    sc = SimulationScenario(T=50, replications=500, seed=SEED, methods=("LASSO-U", "LASSO-M", "SGL-M"))
    return run_scenario(sc)


def test_criterion_1_solver_property_suite(criterion):
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    tight = SolverOptions(tol=1e-13, kkt_tol=1e-11, max_iter=200_000)
    worst_kkt = worst_mono = worst_gap = 0.0
    for _ in range(50):
        prob = random_problem(rng)
        alpha = float(rng.uniform(0.05, 0.95))
        lam = lambda_max(prob, alpha) * float(rng.uniform(0.02, 0.8))
        res = fit(prob, PenaltySpec(lam, alpha), SolverOptions(record_history=True))
        worst_kkt = max(worst_kkt, kkt_residual(prob, res.beta, PenaltySpec(lam, alpha), res.scales),
                        0.0 if res.converged else np.inf)
        h = res.history
        worst_mono = max(worst_mono, float(np.max(np.diff(h) / np.abs(h[:-1]), initial=0.0)))
        Z, yc, cols, mu, d, ybar = scaled_problem(prob)
        for a_end, oracle in ((1.0, lambda l: lasso_cd(Z, yc, l)),
                              (0.0, lambda l: group_lasso_bcd(Z, yc, group_sizes(prob), l))):
            lam_e = lambda_max(prob, a_end) * float(rng.uniform(0.05, 0.8))
            ours = fit(prob, PenaltySpec(lam_e, a_end), tight)
            ref = to_original(prob, oracle(lam_e), cols, mu, d, ybar)
            gap = abs(sg_objective(prob, ours.beta, lam_e, a_end) - sg_objective(prob, ref, lam_e, a_end))
            worst_gap = max(worst_gap, gap)
    elapsed = time.perf_counter() - t0
    ok = worst_kkt <= 1e-6 and worst_mono <= 1e-12 and worst_gap <= 1e-8 and elapsed < 60
    assert criterion(1, ok, f"max KKT {worst_kkt:.1e}, max relative sweep increase {worst_mono:.1e}, "
                            f"max oracle objective gap {worst_gap:.1e}, {elapsed:.1f}s")


def test_criterion_2_prox_oracle(criterion):
    from scipy.optimize import minimize

    def obj(b, z, t, alpha, w):
        return 0.5 * np.sum((b - z) ** 2) + t * (alpha * np.abs(b).sum() + (1 - alpha) * w * np.linalg.norm(b))

    t0 = time.perf_counter()
    rng = np.random.default_rng(2)
    worst = -np.inf
    for _ in range(200):
        n = int(rng.integers(1, 6))
        z = rng.normal(0, 2, n)
        t, alpha, w = float(rng.uniform(0, 3)), float(rng.uniform()), float(rng.uniform(0.5, 2))
        f = obj(prox_sparse_group(z, t, alpha, w), z, t, alpha, w)
        if n == 1:
            grid = np.linspace(-abs(z[0]) - 1, abs(z[0]) + 1, 400_001)
            ref = float(np.min(0.5 * (grid - z[0]) ** 2 + t * (alpha + (1 - alpha) * w) * np.abs(grid)))
        else:
            ref = min(minimize(obj, s, args=(z, t, alpha, w), method="Powell",
                               options={"xtol": 1e-12, "ftol": 1e-14}).fun
                      for s in (z, np.zeros(n), rng.normal(0, 1, n)))
        worst = max(worst, f - ref)
    elapsed = time.perf_counter() - t0
    assert criterion(2, worst <= 1e-6, f"prox objective minus numeric minimum at most {worst:.1e} "
                                       f"over 200 draws, {elapsed:.1f}s")


def test_criterion_3_dictionary_exactness(criterion):
    u = np.linspace(0, 1, 1000)
    explicit = np.column_stack([np.ones_like(u), 2 * u - 1, 6 * u ** 2 - 6 * u + 1,
                                20 * u ** 3 - 30 * u ** 2 + 12 * u - 1,
                                70 * u ** 4 - 140 * u ** 3 + 90 * u ** 2 - 20 * u + 1])
    rec_err = float(np.max(np.abs(basis_values(DictionarySpec.from_degree(4), u) - explicit)))
    x, wq = np.polynomial.legendre.leggauss(30)
    tab = basis_values(DictionarySpec.from_degree(4), (x + 1) / 2)
    gram = (tab * (wq / 2)[:, None]).T @ tab
    orth_err = float(np.max(np.abs(gram - np.diag(1 / (2 * np.arange(5) + 1.0)))))
    ok = rec_err <= 1e-12 and orth_err <= 1e-10
    assert criterion(3, ok, f"recurrence error {rec_err:.1e}, orthogonality error {orth_err:.1e}")


def test_criterion_4_monte_carlo_forecast_ordering(criterion, baseline_t50):
    f = {k: v[0] for k, v in baseline_t50.forecast.items()}
    sgl, lm, lu = f["SGL-M"], f["LASSO-M"], f["LASSO-U"]
    lo, hi = 0.8 * REFERENCE_FORECAST_SGL, 1.2 * REFERENCE_FORECAST_SGL
    ok = sgl < lm < lu and lo <= sgl <= hi
    assert criterion(4, ok, f"MSFE SGL-M {sgl:.3f} < LASSO-M {lm:.3f} < LASSO-U {lu:.3f}; "
                            f"SGL-M in [{lo:.3f}, {hi:.3f}] (T=50, R=500)")


def test_criterion_5_monte_carlo_nowcast_ordering(criterion, baseline_t50):
    n = {k: v[0] for k, v in baseline_t50.nowcast.items()}
    sgl, lm = n["SGL-M"], n["LASSO-M"]
    lo, hi = 0.8 * REFERENCE_NOWCAST_SGL, 1.2 * REFERENCE_NOWCAST_SGL
    ok = sgl < lm and lo <= sgl <= hi
    assert criterion(5, ok, f"nowcast MSFE SGL-M {sgl:.3f} < LASSO-M {lm:.3f}; "
                            f"SGL-M in [{lo:.3f}, {hi:.3f}] (T=50, R=500)")


def test_criterion_6_weight_recovery(criterion):
    sc = SimulationScenario(T=200, replications=500, seed=SEED, methods=("LASSO-M", "SGL-M"),
                            information_sets=("forecast",))
    res = run_scenario(sc)
    sgl = [res.mise["SGL-M"][w][0] for w in WEIGHT_NAMES]
    lm = [res.mise["LASSO-M"][w][0] for w in WEIGHT_NAMES]
    b22 = sgl[2]
    lo, hi = 0.7 * REFERENCE_MISE_SGL_BETA22, 1.3 * REFERENCE_MISE_SGL_BETA22
    ok = all(s <= l for s, l in zip(sgl, lm)) and lo <= b22 <= hi
    pairs = ", ".join(f"{w} {s:.4f} vs {l:.4f}" for w, s, l in zip(WEIGHT_NAMES, sgl, lm))
    assert criterion(6, ok, f"MISE SGL-M vs LASSO-M: {pairs}; Beta(2,2) in [{lo:.4f}, {hi:.4f}] (T=200, R=500)")


def _relative_rmse(work: Path, informative: bool, seed: int) -> float:
    panel = pseudo_empirical_panel(np.random.default_rng(seed), n_covariates=40, n_periods=81,
                                   informative=informative)
    cfg = write_project(panel, work, series={"degree": 2, "q": 1}, ar_lags=1,
                        cv={"alpha_grid": [0.0, 0.5, 1.0], "n_lambda": 30, "lambda_min_ratio": 0.01}, window=60)
    for model in ("AR", "sglasso"):
        assert main(["nowcast", "--config", str(cfg), "--model", model, "--out", str(work / model)]) == 0
    assert main(["evaluate", "--errors", str(work / "AR" / "forecasts.csv"), str(work / "sglasso" / "forecasts.csv"),
                 "--out", str(work / "eval")]) == 0
    n_records = len((work / "AR" / "forecasts.csv").read_text().splitlines()) - 1
    assert n_records == 20
    rows = dict(line.split(",") for line in (work / "eval" / "evaluation.csv").read_text().splitlines()[1:])
    return float(rows["relative_rmse"])


def test_criterion_7_pseudo_empirical_nowcasting(criterion, tmp_path):
    seeds = range(10)
    signal = [_relative_rmse(tmp_path / f"signal{s}", True, 100 + s) for s in seeds]
    noise = [_relative_rmse(tmp_path / f"noise{s}", False, 200 + s) for s in seeds]
    wins = sum(r < 1 for r in signal)
    near = sum(0.9 <= r <= 1.2 for r in noise)
    ok = wins > 5 and near > 5
    assert criterion(7, ok, f"signal: {wins}/10 runs with relative RMSE < 1 (median {np.median(signal):.3f}); "
                            f"noise: {near}/10 runs in [0.9, 1.2] (median {np.median(noise):.3f})")


def test_criterion_8_dm_calibration(criterion):
    rejections = 0
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        e1, e2 = rng.standard_normal(200), rng.standard_normal(200)
        rejections += abs(diebold_mariano(e1, e2).statistic) > 1.96
    rate = rejections / 1000
    assert criterion(8, 0.03 <= rate <= 0.07, f"rejection rate {rate:.3f} at |DM| > 1.96 (n=200, 1000 seeds)")


def _rerun_from_manifest(out: Path, dest: Path) -> None:
    man = json.loads((out / "manifest.json").read_text())
    if man["command"] == "simulate":
        scen = dest.parent / (dest.name + "_scenario.json")
        scen.write_text(json.dumps(man["scenario"]))
        args = ["simulate", "--scenario", str(scen)]
    else:
        args = ["nowcast", "--config", man["config_path"], "--horizon", man["horizon"], "--window",
                str(man["window"]), "--model", man["model"]]
    assert main(args + ["--out", str(dest)]) == 0


def test_criterion_9_determinism(criterion, tmp_path):
    assert main(["example", "--out", str(tmp_path)]) == 0
    first_sim, first_now = tmp_path / "sim1", tmp_path / "now1"
    assert main(["simulate", "--scenario", str(tmp_path / "baseline_scenario.json"), "--replications", "3",
                 "--out", str(first_sim)]) == 0
    assert main(["nowcast", "--config", str(tmp_path / "example_config.json"), "--horizon", "2m",
                 "--out", str(first_now)]) == 0
    _rerun_from_manifest(first_sim, tmp_path / "sim2")
    _rerun_from_manifest(first_now, tmp_path / "now2")
    same = []
    for a, b in ((first_sim, tmp_path / "sim2"), (first_now, tmp_path / "now2")):
        names = sorted(p.name for p in a.iterdir())
        same.append(names == sorted(p.name for p in b.iterdir())
                    and all(filecmp.cmp(a / n, b / n, shallow=False) for n in names))
    assert criterion(9, all(same), f"simulate outputs identical: {same[0]}; nowcast outputs identical: {same[1]}")


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-v"]))
