"""Rolling-window nowcasting and forecast comparison.

Forecast records carry ``error = realized - prediction``; a record whose
target has not been observed yet keeps ``realized`` and ``error`` as NaN and
is ignored by the accuracy measures. Squared-error differentials are always
``e1^2 - e2^2``, so negative DM statistics and falling CUMSFE paths favor the
first model.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np
from scipy import stats

from .design import DesignProblem, DesignSpec, InsufficientHistoryError, build_design, prediction_rows, usable_periods
from .timeseries import LowFrequencySeries, MixedFrequencyPanel
from .tuning import CvPlan, fit_cv

HORIZONS = ("2-month", "1-month", "end-of-quarter", "custom")
BASELINES = ("AR", "PCA-OLS", "ridge-U", "lasso-U", "elasticnet-U")
AR_GROUPS = ("ar", "intercept")


@dataclass(frozen=True)
class ForecastRecord:
    origin: int
    prediction: float
    realized: float = float("nan")
    horizon: str = "custom"
    active_groups: tuple[str, ...] = ()
    alpha: float = float("nan")
    lam: float = float("nan")

    def __post_init__(self):
        if self.horizon not in HORIZONS:
            raise ValueError(f"unknown horizon {self.horizon!r}")

    @property
    def target_period(self) -> int:
        """Low-frequency period being predicted (the origin is the last complete one)."""
        return self.origin + 1

    @property
    def error(self) -> float:
        return self.realized - self.prediction


@dataclass(frozen=True)
class LinearFit:
    """Baseline fit expressed as coefficients on the full design."""

    beta: np.ndarray
    method: str
    active_groups: tuple[str, ...] = ()
    alpha: float = float("nan")
    lam: float = float("nan")

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.beta


def _n_ar_columns(problem: DesignProblem) -> int:
    if problem.spec is not None:
        return int(problem.spec.include_intercept) + problem.spec.ar_lags
    n = 0
    for name in problem.column_names:
        if name == "const" or name.startswith("y[lag"):
            n += 1
        else:
            break
    return n


def ols(X: np.ndarray, y: np.ndarray) -> np.ndarray:
    """Least squares; raises on a rank-deficient design."""
    X = np.asarray(X, dtype=float)
    rank = np.linalg.matrix_rank(X)
    if rank < X.shape[1]:
        raise np.linalg.LinAlgError(f"rank-deficient design: rank {rank} < {X.shape[1]} columns")
    return np.linalg.lstsq(X, y, rcond=None)[0]


def first_principal_component(Z: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """(mean, std, loading) of the first PC of the standardized columns of ``Z``.

    Constant columns get unit scale so they drop out. The sign is fixed so the
    largest-magnitude loading is positive.
    """
    mu = Z.mean(axis=0)
    sd = Z.std(axis=0)
    sd = np.where(sd > 0, sd, 1.0)
    _, _, vt = np.linalg.svd((Z - mu) / sd, full_matrices=False)
    v = vt[0]
    if v[np.argmax(np.abs(v))] < 0:
        v = -v
    return mu, sd, v


def baseline_fit(problem: DesignProblem, method: str, plan: CvPlan | None = None) -> LinearFit:
    """Comparison models on a design whose first columns are intercept and AR lags.

    ``AR`` and ``PCA-OLS`` are least squares (rank deficiency is an error);
    the penalized variants use the per-coordinate elastic-net penalty tuned by
    the same blocked cross-validation as the main estimator.
    """
    plan = plan or CvPlan()
    p = problem.p
    k = _n_ar_columns(problem)
    if method == "AR":
        beta = np.zeros(p)
        beta[:k] = ols(problem.X[:, :k], problem.y)
        return LinearFit(beta, method, _active(problem, beta))
    if method == "PCA-OLS":
        if not problem.intercept:
            raise ValueError("PCA-OLS needs an intercept column")
        if k == p:
            raise ValueError("PCA-OLS needs covariate columns")
        mu, sd, v = first_principal_component(problem.X[:, k:])
        score = ((problem.X[:, k:] - mu) / sd) @ v
        coef = ols(np.column_stack([problem.X[:, :k], score]), problem.y)
        beta = np.zeros(p)
        beta[:k] = coef[:k]
        beta[k:] = coef[k] * v / sd
        beta[0] -= coef[k] * float(v @ (mu / sd))
        return LinearFit(beta, method, _active(problem, beta))
    alphas = {"ridge-U": (0.0,), "lasso-U": (1.0,), "elasticnet-U": plan.alpha_grid}.get(method)
    if alphas is None:
        raise ValueError(f"unknown baseline {method!r}; choose from {list(BASELINES)}")
    result, fit = fit_cv(problem, replace(plan, kind="elasticnet", alpha_grid=alphas))
    return LinearFit(fit.beta, method, _active(problem, fit.beta), fit.alpha, fit.lam)


def _active(problem: DesignProblem, beta: np.ndarray) -> tuple[str, ...]:
    return tuple(n for n, g in problem.groups if np.any(beta[g] != 0))


def rolling_nowcast(panel: MixedFrequencyPanel, spec: DesignSpec, window: int,
                    plan: CvPlan | None = None, method: str = "sglasso",
                    horizon: str = "custom") -> list[ForecastRecord]:
    """One record per target period that has ``window`` usable periods before it.

    Each fit only sees a copy of the panel whose target ends just before the
    period being predicted, so no target value at or after it can leak into
    the design, the AR lags, or the standardization.
    """
    if window < 1:
        raise ValueError("window must be >= 1")
    plan = plan or CvPlan()
    usable = usable_periods(panel, spec)
    if usable.size <= window:
        raise InsufficientHistoryError(
            f"{usable.size} usable periods cannot supply a window of {window} plus one origin"
        )
    y = panel.target
    records = []
    for i in range(window, usable.size):
        s = int(usable[i])
        train = usable[i - window:i]
        cut = s - y.first_period
        labels = None if y.labels is None else y.labels[:cut]
        seen = panel.with_target(LowFrequencySeries(y.values[:cut], y.first_period, labels, y.name))
        prob = build_design(seen, spec, train)
        x_new = prediction_rows(seen, spec, s)[0]
        if method == "sglasso":
            _, fit = fit_cv(prob, plan)
        else:
            fit = baseline_fit(prob, method, plan)
        realized = y.at(s) if y.has(s) else float("nan")
        records.append(ForecastRecord(
            origin=s - 1, prediction=float(x_new @ fit.beta), realized=realized,
            horizon=horizon, active_groups=tuple(fit.active_groups),
            alpha=float(fit.alpha), lam=float(fit.lam),
        ))
    return records


@dataclass(frozen=True)
class DmTest:
    statistic: float
    p_value: float
    degenerate: bool
    n: int
    hac_lags: int


def default_hac_lags(n: int) -> int:
    return int(math.floor(n ** (1.0 / 3.0) + 1e-12))


def bartlett_lrv(d: np.ndarray, lags: int) -> float:
    """Newey-West long-run variance of ``d`` with Bartlett weights."""
    n = d.size
    u = d - d.mean()
    lrv = u @ u / n
    for k in range(1, min(lags, n - 1) + 1):
        lrv += 2.0 * (1.0 - k / (lags + 1.0)) * (u[k:] @ u[:-k]) / n
    return float(lrv)


def diebold_mariano(e1, e2, hac_lags: int | None = None, small_sample: bool = False,
                    horizon: int = 1) -> DmTest:
    """Test of equal squared-error accuracy; negative statistics favor model 1.

    ``small_sample`` applies the Harvey-Leybourne-Newbold correction for a
    ``horizon``-step forecast and uses Student-t p-values.
    """
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape or e1.ndim != 1:
        raise ValueError(f"error sequences must have equal length ({e1.shape} vs {e2.shape})")
    n = e1.size
    if n < 5:
        raise ValueError("need at least 5 paired errors")
    lags = default_hac_lags(n) if hac_lags is None else int(hac_lags)
    if lags < 0:
        raise ValueError("hac_lags must be >= 0")
    d = e1 ** 2 - e2 ** 2
    if not np.any(d):
        return DmTest(0.0, 1.0, True, n, lags)
    lrv = bartlett_lrv(d, lags)
    mean = d.mean()
    if lrv <= 0.0:
        return DmTest(math.copysign(math.inf, mean) if mean else 0.0, 0.0 if mean else 1.0, True, n, lags)
    stat = mean / math.sqrt(lrv / n)
    if small_sample:
        h = horizon
        stat *= math.sqrt((n + 1 - 2 * h + h * (h - 1) / n) / n)
        pval = 2.0 * stats.t.sf(abs(stat), df=n - 1)
    else:
        pval = 2.0 * stats.norm.sf(abs(stat))
    return DmTest(float(stat), float(pval), False, n, lags)


def cumsfe(e1, e2) -> np.ndarray:
    """Running sum of ``e1^2 - e2^2``; positive values mean model 1 has erred more."""
    e1 = np.asarray(e1, dtype=float)
    e2 = np.asarray(e2, dtype=float)
    if e1.shape != e2.shape:
        raise ValueError("error sequences must have equal length")
    return np.cumsum(e1 ** 2 - e2 ** 2)


def rmse(e) -> float:
    e = np.asarray(e, dtype=float)
    return float(np.sqrt(np.mean(e ** 2)))


def relative_rmse(e_model, e_benchmark) -> float:
    return rmse(e_model) / rmse(e_benchmark)


def selection_fractions(fits: Sequence, category_map: Mapping[str, str]) -> list[dict[str, float]]:
    """Per fit, the share of all covariate groups that are selected, split by category.

    Autoregressive and intercept groups are not covariates and are skipped;
    any other active group missing from ``category_map`` is an error.
    """
    total = len(category_map)
    cats = sorted(set(category_map.values()))
    out = []
    for f in fits:
        counts = dict.fromkeys(cats, 0)
        for g in f.active_groups:
            if g in AR_GROUPS or (g.startswith("ar") and g[2:].isdigit()):
                continue
            if g not in category_map:
                raise KeyError(f"group {g!r} has no category")
            counts[category_map[g]] += 1
        out.append({c: (counts[c] / total if total else 0.0) for c in cats})
    return out


def _finite_pairs(errors: Mapping[str, np.ndarray]) -> np.ndarray:
    lens = {np.asarray(e).size for e in errors.values()}
    if len(lens) != 1:
        raise ValueError("error sequences must have equal length")
    keep = np.ones(lens.pop(), dtype=bool)
    for e in errors.values():
        keep &= np.isfinite(np.asarray(e, dtype=float))
    return keep


@dataclass
class EvaluationReport:
    benchmark: str
    n: int
    rmse: dict[str, float]
    relative_rmse: dict[str, float]
    dm: dict[str, DmTest]
    cumsfe: dict[str, np.ndarray] = field(repr=False)
    selection: dict[str, list[dict[str, float]]] = field(default_factory=dict, repr=False)


def evaluate(errors: Mapping[str, Sequence[float]], benchmark: str, hac_lags: int | None = None,
             small_sample: bool = False) -> EvaluationReport:
    """Compare every model with ``benchmark`` over origins where all errors are observed."""
    if benchmark not in errors:
        raise KeyError(f"benchmark {benchmark!r} not among the models")
    errors = {k: np.asarray(v, dtype=float) for k, v in errors.items()}
    keep = _finite_pairs(errors)
    errors = {k: v[keep] for k, v in errors.items()}
    eb = errors[benchmark]
    return EvaluationReport(
        benchmark=benchmark,
        n=int(keep.sum()),
        rmse={k: rmse(v) for k, v in errors.items()},
        relative_rmse={k: relative_rmse(v, eb) for k, v in errors.items()},
        dm={k: diebold_mariano(v, eb, hac_lags, small_sample) for k, v in errors.items() if k != benchmark},
        cumsfe={k: cumsfe(v, eb) for k, v in errors.items() if k != benchmark},
    )
