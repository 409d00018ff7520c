"""Blocked K-fold cross-validation over (lambda, alpha).

Folds are contiguous blocks of rows in time order. Training on a fold's
complement stacks the remaining rows into one regression; standardization is
recomputed from the training rows of every fold. Fold paths stop early once
the training R^2 passes ``r2_stop`` (near-interpolating fits); later grid
points reuse the last solution, so they tie and lose to larger lambdas.
Fold fits use ``fold_options`` (a looser tolerance than the final refit,
which only shifts held-out errors at the level of the tolerance).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .design import DesignProblem
from .solver import PreparedProblem, SgLassoFit, SolverOptions, fit_path, lambda_grid

DEFAULT_ALPHAS = (0.0, 0.25, 0.5, 0.75, 1.0)


def make_folds(n_rows: int, n_folds: int) -> list[np.ndarray]:
    """Contiguous, disjoint folds covering ``0..n_rows-1``; remainder rows go to the earliest folds."""
    if n_folds < 2:
        raise ValueError("need at least 2 folds")
    if n_rows < 2 * n_folds:
        raise ValueError(f"too few rows: {n_rows} rows for {n_folds} folds (need at least {2 * n_folds})")
    base, extra = divmod(n_rows, n_folds)
    sizes = [base + (k < extra) for k in range(n_folds)]
    bounds = np.concatenate([[0], np.cumsum(sizes)])
    return [np.arange(a, b) for a, b in zip(bounds[:-1], bounds[1:])]


@dataclass(frozen=True)
class CvPlan:
    n_folds: int = 5
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHAS
    lambda_grid: tuple[float, ...] | None = None
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4
    embargo: int = 0
    r2_stop: float = 0.999
    kind: str = "sglasso"
    group_weights: object = None
    options: SolverOptions = field(default_factory=SolverOptions)
    fold_options: SolverOptions = field(default_factory=lambda: SolverOptions(tol=1e-5, kkt_tol=1e-4))

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        if not self.alpha_grid or any(not 0 <= a <= 1 for a in self.alpha_grid):
            raise ValueError("alpha grid must be non-empty with values in [0, 1]")
        if self.lambda_grid is not None:
            grid = np.asarray(self.lambda_grid, dtype=float)
            if np.any(grid <= 0) or np.any(np.diff(grid) >= 0):
                raise ValueError("lambda grid must be positive and strictly decreasing")
            object.__setattr__(self, "lambda_grid", tuple(grid))
        if self.n_folds < 2:
            raise ValueError("need at least 2 folds")
        if not 0 <= self.r2_stop <= 1:
            raise ValueError("r2_stop must lie in [0, 1]")
        if self.embargo < 0:
            raise ValueError("embargo must be >= 0")

    def lambdas(self, problem: DesignProblem, alpha: float) -> np.ndarray:
        if self.lambda_grid is not None:
            return np.asarray(self.lambda_grid)
        prep = PreparedProblem(problem, self.kind, self.group_weights, self.options.standardize)
        return lambda_grid(prep.lambda_max(alpha), self.n_lambda, self.lambda_min_ratio)


@dataclass(frozen=True)
class CvResult:
    alphas: np.ndarray
    lambdas: np.ndarray
    cv_error: np.ndarray
    cv_se: np.ndarray
    fold_errors: np.ndarray
    best: tuple[float, float]
    best_index: tuple[int, int]
    one_se: tuple[float, float]
    one_se_index: tuple[int, int]


def _select(err: np.ndarray, lambdas: np.ndarray, alphas: np.ndarray, bound: float) -> tuple[int, int]:
    # among cells within the bound prefer larger lambda, then larger alpha
    ok = np.argwhere(err <= bound)
    keys = [(lambdas[a, l], alphas[a]) for a, l in ok]
    a, l = ok[max(range(len(keys)), key=keys.__getitem__)]
    return int(a), int(l)


def _training_rows(n: int, fold: np.ndarray, embargo: int) -> np.ndarray:
    keep = np.ones(n, dtype=bool)
    keep[max(fold[0] - embargo, 0): fold[-1] + 1 + embargo] = False
    return np.flatnonzero(keep)


def cross_validate(problem: DesignProblem, plan: CvPlan | None = None) -> CvResult:
    """Held-out MSE for every (alpha, lambda) and the selected pair.

    Ties (and the minimum) are resolved toward the larger lambda and then the
    larger alpha, i.e. the sparser model. The one-standard-error pair keeps the
    selected alpha and takes the largest lambda whose error is within one
    standard error of the minimum.
    """
    plan = plan or CvPlan()
    folds = make_folds(problem.T, plan.n_folds)
    alphas = np.asarray(plan.alpha_grid)
    lambdas = np.vstack([plan.lambdas(problem, a) for a in alphas])
    errs = np.zeros((alphas.size, lambdas.shape[1], len(folds)))
    for k, fold in enumerate(folds):
        train = _training_rows(problem.T, fold, plan.embargo)
        if train.size < 2:
            raise ValueError("embargo leaves no training rows")
        prep = PreparedProblem(problem.subset(train), plan.kind, plan.group_weights,
                               plan.fold_options.standardize)
        Xv, yv = problem.X[fold], problem.y[fold]
        for a, alpha in enumerate(alphas):
            betas = prep.solve(lambdas[a], alpha, plan.fold_options, r2_stop=plan.r2_stop)[0]
            pred = prep.to_original(betas) @ Xv.T
            errs[a, :, k] = ((pred - yv) ** 2).mean(axis=1)
    cv = errs.mean(axis=2)
    se = errs.std(axis=2, ddof=1) / np.sqrt(len(folds)) if len(folds) > 1 else np.zeros_like(cv)
    best_idx = _select(cv, lambdas, alphas, cv.min() * (1 + 1e-12))
    # one-SE rule within the selected alpha: lambda scales differ across alphas
    a_best = best_idx[0]
    row = cv[a_best:a_best + 1]
    one_idx = (a_best, _select(row, lambdas[a_best:a_best + 1], alphas[a_best:a_best + 1],
                               cv[best_idx] + se[best_idx])[1])
    return CvResult(
        alphas=alphas, lambdas=lambdas, cv_error=cv, cv_se=se, fold_errors=errs,
        best=(float(alphas[best_idx[0]]), float(lambdas[best_idx])), best_index=best_idx,
        one_se=(float(alphas[one_idx[0]]), float(lambdas[one_idx])), one_se_index=one_idx,
    )


def refit(problem: DesignProblem, result: CvResult, plan: CvPlan | None = None,
          one_se: bool = False) -> SgLassoFit:
    """Full-sample fit at the selected pair, warm-started along its lambda grid."""
    plan = plan or CvPlan()
    a, l = result.one_se_index if one_se else result.best_index
    path = fit_path(problem, float(result.alphas[a]), result.lambdas[a, : l + 1], plan.options,
                    plan.group_weights, plan.kind)
    return path[-1]


def fit_cv(problem: DesignProblem, plan: CvPlan | None = None,
           one_se: bool = False) -> tuple[CvResult, SgLassoFit]:
    plan = plan or CvPlan()
    result = cross_validate(problem, plan)
    return result, refit(problem, result, plan, one_se)
