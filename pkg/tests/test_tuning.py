import numpy as np
import pytest
from hypothesis import given, strategies as st

from oracles import random_problem
from sglmidas.solver import PenaltySpec, SolverOptions, fit
from sglmidas.tuning import CvPlan, cross_validate, fit_cv, make_folds, refit


def test_make_folds_examples():
    folds = make_folds(10, 3)
    assert [f.tolist() for f in folds] == [[0, 1, 2, 3], [4, 5, 6], [7, 8, 9]]
    assert [f.size for f in make_folds(12, 4)] == [3, 3, 3, 3]
    with pytest.raises(ValueError):
        make_folds(5, 3)
    with pytest.raises(ValueError):
        make_folds(10, 1)


@given(st.integers(2, 10).flatmap(lambda k: st.tuples(st.integers(2 * k, 300), st.just(k))))
def test_folds_are_contiguous_partition(args):
    n, k = args
    folds = make_folds(n, k)
    assert len(folds) == k
    np.testing.assert_array_equal(np.concatenate(folds), np.arange(n))
    sizes = [f.size for f in folds]
    assert max(sizes) - min(sizes) <= 1 and sizes == sorted(sizes, reverse=True)
    assert all(np.all(np.diff(f) == 1) for f in folds)


def test_plan_validation():
    with pytest.raises(ValueError):
        CvPlan(alpha_grid=())
    with pytest.raises(ValueError):
        CvPlan(alpha_grid=(1.5,))
    with pytest.raises(ValueError):
        CvPlan(lambda_grid=(0.1, 0.2))
    with pytest.raises(ValueError):
        CvPlan(n_folds=1)
    with pytest.raises(ValueError):
        CvPlan(r2_stop=2.0)
    with pytest.raises(ValueError):
        CvPlan(embargo=-1)


@pytest.fixture(scope="module")
def cv_case():
    rng = np.random.default_rng(21)
    prob = random_problem(rng, T=80, p=16, n_groups=4)
    plan = CvPlan(alpha_grid=(0.0, 0.5, 1.0), n_lambda=15, lambda_min_ratio=1e-2)
    return prob, plan, cross_validate(prob, plan)


def test_cv_cell_matches_manual_refits(cv_case):
    prob, plan, res = cv_case
    a, l = 1, 5
    alpha, lam = res.alphas[a], res.lambdas[a, l]
    errs = []
    for fold in make_folds(prob.T, plan.n_folds):
        train = np.setdiff1d(np.arange(prob.T), fold)
        f = fit(prob.subset(train), PenaltySpec(lam, alpha), SolverOptions(tol=1e-12, kkt_tol=1e-10))
        errs.append(np.mean((prob.y[fold] - prob.X[fold] @ f.beta) ** 2))
    # fold fits use a looser tolerance than the manual refits
    np.testing.assert_allclose(res.fold_errors[a, l], errs, rtol=1e-3)
    assert res.cv_error[a, l] == pytest.approx(np.mean(errs), rel=1e-3)
    assert res.cv_se[a, l] == pytest.approx(np.std(errs, ddof=1) / np.sqrt(len(errs)), rel=1e-2)


def test_selection_rules(cv_case):
    prob, plan, res = cv_case
    assert res.cv_error[res.best_index] == res.cv_error.min()
    a, l = res.one_se_index
    assert a == res.best_index[0]
    assert l <= res.best_index[1]
    assert res.cv_error[a, l] <= res.cv_error[res.best_index] + res.cv_se[res.best_index]
    # every larger lambda in that row is outside the band
    bound = res.cv_error[res.best_index] + res.cv_se[res.best_index]
    assert np.all(res.cv_error[a, :l] > bound)


def test_refit_and_fit_cv(cv_case):
    prob, plan, res = cv_case
    best = refit(prob, res, plan)
    alpha, lam = res.best
    direct = fit(prob, PenaltySpec(lam, alpha), plan.options)
    assert best.lam == lam and best.alpha == alpha
    assert abs(best.objective - direct.objective) <= 1e-8
    res2, fitted = fit_cv(prob, plan, one_se=True)
    assert (fitted.alpha, fitted.lam) == res2.one_se
    np.testing.assert_array_equal(res2.cv_error, res.cv_error)


def test_embargo_drops_neighbouring_rows():
    rng = np.random.default_rng(22)
    prob = random_problem(rng, T=40, p=8, n_groups=2)
    plan = CvPlan(alpha_grid=(0.5,), n_lambda=5, embargo=2)
    res = cross_validate(prob, plan)
    assert np.all(np.isfinite(res.cv_error))
    with pytest.raises(ValueError):
        cross_validate(prob, CvPlan(n_folds=2, alpha_grid=(0.5,), n_lambda=5, embargo=40))


def test_fixed_lambda_grid_is_used():
    rng = np.random.default_rng(23)
    prob = random_problem(rng, T=40, p=8, n_groups=2)
    grid = (1.0, 0.5, 0.1)
    res = cross_validate(prob, CvPlan(alpha_grid=(0.0, 1.0), lambda_grid=grid))
    np.testing.assert_array_equal(res.lambdas, [grid, grid])
