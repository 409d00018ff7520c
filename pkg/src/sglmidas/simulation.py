"""Monte Carlo experiments for ARDL-MIDAS prediction and weight recovery.

Data are generated from

    y_t = rho1 y_{t-1} + rho2 y_{t-2}
          + sum_{k<=3} (1/m) sum_{j=1}^m omega_k((j-1)/m) x_{t-(j-1)/m, k} + u_t

with Beta(1,3), Beta(2,3) and Beta(2,2) weight functions for the three
relevant covariates; the remaining covariates follow the same law with zero
loading. Each replication fits every method on ``T`` rows and predicts one
held-out period twice: with the target period's full high-frequency window
(``forecast_lead = m``) and with its most recent sub-period missing
(``nowcast_lead = m - 1``). See README for why these defaults were chosen.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, fields, replace
from typing import Any, Mapping

import numpy as np
from scipy import signal
from scipy.special import beta as beta_fn

from .design import CovariateSpec, DesignSpec, build_design, prediction_rows
from .dictionary import DictionarySpec, basis_values
from .solver import SolverOptions
from .timeseries import HighFrequencySeries, LowFrequencySeries, MixedFrequencyPanel
from .tuning import DEFAULT_ALPHAS, CvPlan, fit_cv

WEIGHT_SHAPES = ((1.0, 3.0), (2.0, 3.0), (2.0, 2.0))
WEIGHT_NAMES = tuple(f"Beta({a:g},{b:g})" for a, b in WEIGHT_SHAPES)
METHODS = ("FLOW", "STOCK", "MIDDLE", "LASSO-U", "LASSO-M", "SGL-M")
MIDAS_METHODS = ("LASSO-U", "LASSO-M", "SGL-M")
ORACLE = "ORACLE"

# values used in the published experiments; anything else needs custom=True
_PAPER_VALUES = {
    "T": {50, 100, 200},
    "n_noise": {7, 47},
    "m": {12},
    "rho1": {0.3},
    "rho2": {0.01},
    "sigma2_u": {1.0, 5.0},
    "hf_process": {"ar", "var"},
    "hf_rho": {0.2, 0.7},
    "hf_noise": {"gaussian", "student_t"},
    "hf_sigma2": {5.0},
    "degree": {3, 5, 10},
    "lag_fraction": {"full", "half"},
    "ar_lags": {5},
    "burn_in": {200},
}


def beta_weight(u, a: float, b: float):
    """Beta(a, b) density on [0, 1] for ``a, b >= 1``."""
    if a < 1 or b < 1:
        raise ValueError("beta weight parameters must be >= 1")
    u = np.asarray(u, dtype=float)
    if np.any((u < 0) | (u > 1)):
        raise ValueError("u must lie in [0, 1]")
    val = u ** (a - 1) * (1 - u) ** (b - 1) / beta_fn(a, b)
    return float(val) if val.ndim == 0 else val


@dataclass(frozen=True)
class SimulationScenario:
    T: int = 50
    n_noise: int = 7
    m: int = 12
    rho1: float = 0.3
    rho2: float = 0.01
    sigma2_u: float = 1.0
    hf_process: str = "ar"
    hf_rho: float = 0.2
    hf_noise: str = "gaussian"
    hf_sigma2: float = 5.0
    degree: int = 5
    lag_fraction: str = "full"
    ar_lags: int = 5
    burn_in: int = 200
    replications: int = 100
    seed: int = 0
    n_folds: int = 5
    alpha_grid: tuple[float, ...] = DEFAULT_ALPHAS
    n_lambda: int = 100
    lambda_min_ratio: float = 1e-4
    cv_tol: float = 1e-4
    selection_rule: str = "1se"
    methods: tuple[str, ...] = METHODS
    information_sets: tuple[str, ...] = ("forecast", "nowcast")
    forecast_lead: int | None = None
    nowcast_lead: int | None = None
    custom: bool = False

    def __post_init__(self):
        object.__setattr__(self, "alpha_grid", tuple(float(a) for a in self.alpha_grid))
        object.__setattr__(self, "methods", tuple(self.methods))
        object.__setattr__(self, "information_sets", tuple(self.information_sets))
        bad = sorted(set(self.methods) - set(METHODS))
        if bad or not self.methods:
            raise ValueError(f"unknown method(s) {bad}; choose from {list(METHODS)}")
        bad = sorted(set(self.information_sets) - {"forecast", "nowcast"})
        if bad or not self.information_sets:
            raise ValueError(f"unknown information set(s) {bad}")
        if self.selection_rule not in ("min", "1se"):
            raise ValueError(f"unknown selection_rule {self.selection_rule!r}")
        if self.cv_tol <= 0:
            raise ValueError("cv_tol must be positive")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.hf_process not in ("ar", "var"):
            raise ValueError(f"unknown hf_process {self.hf_process!r}")
        if self.hf_noise not in ("gaussian", "student_t"):
            raise ValueError(f"unknown hf_noise {self.hf_noise!r}")
        if self.lag_fraction not in ("full", "half"):
            raise ValueError(f"unknown lag_fraction {self.lag_fraction!r}")
        if self.T < 2 * self.n_folds or self.m < 1 or self.n_noise < 0 or self.degree < 0:
            raise ValueError("scenario dimensions out of range")
        for lead in (self.forecast_lead, self.nowcast_lead):
            if lead is not None and not 0 <= lead <= self.m:
                raise ValueError("leads must lie in [0, m]")
        if self.degree + 1 > self.n_lags:
            raise ValueError("dictionary has more basis functions than lags")
        if not self.custom:
            for name, allowed in _PAPER_VALUES.items():
                if getattr(self, name) not in allowed:
                    raise ValueError(
                        f"{name}={getattr(self, name)!r} is not a published setting "
                        f"{sorted(allowed, key=str)}; set custom=true to run it"
                    )

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> "SimulationScenario":
        known = {f.name for f in fields(cls)}
        unknown = sorted(set(data) - known)
        if unknown:
            raise ValueError(f"unknown scenario key(s): {', '.join(unknown)}")
        return cls(**data)

    def to_dict(self) -> dict:
        return asdict(self)

    @property
    def n_covariates(self) -> int:
        return len(WEIGHT_SHAPES) + self.n_noise

    @property
    def n_lags(self) -> int:
        return self.m if self.lag_fraction == "full" else math.ceil(self.m / 2)

    @property
    def leads(self) -> dict[str, int]:
        f = self.m if self.forecast_lead is None else self.forecast_lead
        n = self.m - 1 if self.nowcast_lead is None else self.nowcast_lead
        full = {"forecast": f, "nowcast": n}
        return {k: full[k] for k in self.information_sets}

    @property
    def dictionary(self) -> DictionarySpec:
        return DictionarySpec.from_degree(self.degree)

    def cv_plan(self, alphas=None) -> CvPlan:
        return CvPlan(n_folds=self.n_folds, alpha_grid=alphas or self.alpha_grid,
                      n_lambda=self.n_lambda, lambda_min_ratio=self.lambda_min_ratio,
                      options=SolverOptions(),
                      fold_options=SolverOptions(tol=self.cv_tol, kkt_tol=10 * self.cv_tol))


def var_transition(n: int, block: int = 5, first: float = 0.15, rest: float = 0.075) -> np.ndarray:
    """Block-diagonal VAR(1) matrix: constant ``first`` block then ``rest`` blocks."""
    phi = np.zeros((n, n))
    for b, start in enumerate(range(0, n, block)):
        stop = min(start + block, n)
        phi[start:stop, start:stop] = first if b == 0 else rest
    return phi


def _hf_paths(sc: SimulationScenario, n_sub: int, rng: np.random.Generator) -> np.ndarray:
    K = sc.n_covariates
    if sc.hf_process == "var":
        phi = var_transition(K)
        eps = rng.standard_normal((n_sub, K))
        x = np.empty((n_sub, K))
        prev = rng.standard_normal(K)
        for h in range(n_sub):
            prev = phi @ prev + eps[h]
            x[h] = prev
        return x
    if sc.hf_noise == "gaussian":
        eps = rng.standard_normal((n_sub, K)) * math.sqrt(sc.hf_sigma2)
        var_eps = sc.hf_sigma2
    else:
        eps = rng.standard_t(5, size=(n_sub, K))
        var_eps = 5.0 / 3.0
    x0 = rng.standard_normal(K) * math.sqrt(var_eps / (1 - sc.hf_rho ** 2))
    zi = (sc.hf_rho * x0)[None, :]
    return signal.lfilter([1.0], [1.0, -sc.hf_rho], eps, axis=0, zi=zi)[0]


def _y_init_var(sc: SimulationScenario) -> float:
    r1, r2 = sc.rho1, sc.rho2
    return sc.sigma2_u * (1 - r2) / ((1 + r2) * ((1 - r2) ** 2 - r1 ** 2))


def true_weights(m: int) -> np.ndarray:
    """Weight functions on the lag grid, shape (3, m)."""
    grid = np.arange(m) / m
    return np.vstack([beta_weight(grid, a, b) for a, b in WEIGHT_SHAPES])


@dataclass(frozen=True)
class SimulatedData:
    panel: MixedFrequencyPanel
    signal: np.ndarray
    noise: np.ndarray

    @property
    def holdout(self) -> int:
        return self.panel.target.last_period


def simulate_ardl_midas(scenario: SimulationScenario, rng: np.random.Generator,
                        full: bool = False) -> MixedFrequencyPanel | SimulatedData:
    """One sample: ``ar_lags`` pre-sample periods, ``T`` estimation periods and one holdout.

    Target periods are numbered from 1; covariates start one period earlier so
    any lead in [0, m] has a complete window. With ``full=True`` the
    high-frequency signal and the innovations of the kept periods are returned
    as well.
    """
    sc = scenario
    m = sc.m
    keep = sc.ar_lags + sc.T + 1
    n_per = sc.burn_in + keep + 1
    x = _hf_paths(sc, n_per * m, rng)
    omega = true_weights(m)
    # column j of a period block is lag j+1, i.e. the block read backwards
    blocks = x[:, :3].reshape(n_per, m, 3)[:, ::-1, :]
    sig = np.einsum("tjk,kj->t", blocks, omega) / m
    u = rng.standard_normal(n_per) * math.sqrt(sc.sigma2_u)
    y_init = rng.standard_normal(2) * math.sqrt(_y_init_var(sc))
    zi = signal.lfiltic([1.0], [1.0, -sc.rho1, -sc.rho2], y=[y_init[1], y_init[0]])
    y = signal.lfilter([1.0], [1.0, -sc.rho1, -sc.rho2], sig + u, zi=zi)[0]
    y_keep = y[-keep:]
    x_keep = x[-(keep + 1) * m:]
    covs = tuple(
        HighFrequencySeries(f"x{k + 1}", x_keep[:, k], m=m, first_period=0, q=1,
                            category="relevant" if k < 3 else "noise")
        for k in range(sc.n_covariates)
    )
    panel = MixedFrequencyPanel(LowFrequencySeries(y_keep, first_period=1), covs)
    if full:
        return SimulatedData(panel, sig[-keep:], u[-keep:])
    return panel


def method_design(method: str, scenario: SimulationScenario, lead: int) -> DesignSpec:
    sc = scenario
    agg = {"FLOW": "flow", "STOCK": "stock", "MIDDLE": "middle",
           "LASSO-U": "unrestricted", "LASSO-M": "midas", "SGL-M": "midas"}[method]
    covs = tuple(
        CovariateSpec(f"x{k + 1}", sc.dictionary, agg, q=1, lead=lead, delay=0, n_lags=sc.n_lags)
        for k in range(sc.n_covariates)
    )
    return DesignSpec(ar_lags=sc.ar_lags, covariates=covs, include_intercept=True,
                      penalize_intercept=False, ar_grouping="separate")


def _ols_predict(X, y, x_new) -> float:
    if X.shape[1] >= X.shape[0]:
        return float("nan")
    coef, *_ = np.linalg.lstsq(X, y, rcond=None)
    return float(x_new @ coef)


def estimated_weights(method: str, beta: np.ndarray, scenario: SimulationScenario,
                      spec: DesignSpec) -> np.ndarray:
    """Fitted weight functions of the three relevant covariates on the lag grid (3, m)."""
    sc = scenario
    start = int(spec.include_intercept) + spec.ar_lags
    grid = np.arange(sc.m) / sc.m
    out = np.zeros((3, sc.m))
    if method == "LASSO-U":
        for k in range(3):
            out[k, : sc.n_lags] = beta[start + k * sc.n_lags: start + (k + 1) * sc.n_lags]
        return out
    L = sc.dictionary.n_basis
    basis = basis_values(sc.dictionary, grid)
    for k in range(3):
        out[k] = basis @ beta[start + k * L: start + (k + 1) * L]
    return out


@dataclass
class ReplicationOutcome:
    sq_errors: dict[str, dict[str, float]]
    mise: dict[str, np.ndarray]
    train_periods: np.ndarray
    holdout: int


def run_replication(scenario: SimulationScenario, rep: int) -> ReplicationOutcome:
    sc = scenario
    rng = np.random.default_rng([sc.seed, rep])
    data = simulate_ardl_midas(sc, rng, full=True)
    panel = data.panel
    hold = data.holdout
    train = np.arange(1 + sc.ar_lags, hold)
    realized = panel.target.at(hold)
    errors: dict[str, dict[str, float]] = {}
    mise: dict[str, np.ndarray] = {}
    omega = true_weights(sc.m)
    oracle_err = float(data.noise[-1])
    for info, lead in sc.leads.items():
        errors[info] = {ORACLE: oracle_err ** 2}
        for method in sc.methods:
            spec = method_design(method, sc, lead)
            prob = build_design(panel, spec, train)
            x_new = prediction_rows(panel, spec, hold)[0]
            if method in ("FLOW", "STOCK", "MIDDLE"):
                pred = _ols_predict(prob.X, prob.y, x_new)
            else:
                alphas = sc.alpha_grid if method == "SGL-M" else (1.0,)
                _, fitted = fit_cv(prob, sc.cv_plan(alphas), one_se=sc.selection_rule == "1se")
                pred = float(x_new @ fitted.beta)
                if info == "forecast":
                    w_hat = estimated_weights(method, fitted.beta, sc, spec)
                    mise[method] = ((w_hat - omega) ** 2).mean(axis=1)
            errors[info][method] = (realized - pred) ** 2
    return ReplicationOutcome(errors, mise, train, hold)


def _mean_se(vals: np.ndarray) -> tuple[float, float]:
    vals = np.asarray(vals, dtype=float)
    if np.any(np.isnan(vals)):
        return float("nan"), float("nan")
    se = vals.std(ddof=1) / math.sqrt(vals.size) if vals.size > 1 else float("nan")
    return float(vals.mean()), float(se)


@dataclass
class ScenarioResult:
    scenario: SimulationScenario
    forecast: dict[str, tuple[float, float]]
    nowcast: dict[str, tuple[float, float]]
    mise: dict[str, dict[str, tuple[float, float]]]
    replications: int
    raw_errors: dict[str, dict[str, np.ndarray]] = field(repr=False, default_factory=dict)
    raw_mise: dict[str, np.ndarray] = field(repr=False, default_factory=dict)

    def rows(self) -> list[tuple[str, str, str, float, float]]:
        out = []
        for info in ("forecast", "nowcast"):
            for method, (mean, se) in getattr(self, info).items():
                out.append((info, method, "", mean, se))
        for method, per in self.mise.items():
            for weight, (mean, se) in per.items():
                out.append(("mise", method, weight, mean, se))
        return out

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["measure", "method", "weight", "mean", "std_error"])
        for info, method, weight, mean, se in self.rows():
            w.writerow([info, method, weight, _fmt(mean), _fmt(se)])
        return buf.getvalue()


def _fmt(v: float) -> str:
    return "" if math.isnan(v) else repr(float(v))


def run_scenario(scenario: SimulationScenario, n_jobs: int = 1, progress=None) -> ScenarioResult:
    """Run every replication and average squared errors and MISE.

    Replication ``r`` draws from ``default_rng([seed, r])``, so results do not
    depend on ``n_jobs``. Aggregated OLS baselines are blank (NaN) when they
    have at least as many regressors as rows.
    """
    reps = range(scenario.replications)
    if n_jobs == 1:
        outcomes = []
        for r in reps:
            outcomes.append(run_replication(scenario, r))
            if progress is not None:
                progress(r + 1)
    else:
        from joblib import Parallel, delayed

        outcomes = Parallel(n_jobs=n_jobs)(delayed(run_replication)(scenario, r) for r in reps)
    names = tuple(scenario.methods) + (ORACLE,)
    raw = {info: {meth: np.array([o.sq_errors[info][meth] for o in outcomes]) for meth in names}
           for info in scenario.leads}
    mise_methods = [m for m in MIDAS_METHODS if m in scenario.methods and "forecast" in raw]
    raw_mise = {meth: np.vstack([o.mise[meth] for o in outcomes]) for meth in mise_methods}
    mise = {meth: {WEIGHT_NAMES[k]: _mean_se(raw_mise[meth][:, k]) for k in range(3)}
            for meth in mise_methods}
    summarize = lambda info: {meth: _mean_se(v) for meth, v in raw.get(info, {}).items()}
    return ScenarioResult(
        scenario=scenario,
        forecast=summarize("forecast"),
        nowcast=summarize("nowcast"),
        mise=mise,
        replications=len(outcomes),
        raw_errors=raw,
        raw_mise=raw_mise,
    )


def load_scenario(path) -> SimulationScenario:
    with open(path) as fh:
        return SimulationScenario.from_dict(json.load(fh))


PSEUDO_CATEGORIES = ("real", "financial", "survey", "news")


def pseudo_empirical_panel(rng: np.random.Generator, n_covariates: int = 40, n_periods: int = 82,
                           m: int = 3, informative: bool = True, n_signal: int = 4,
                           hf_rho: float = 0.5, ar: float = 0.3, noise_sd: float = 1.0) -> MixedFrequencyPanel:
    """Synthetic quarterly/monthly nowcasting panel.

    Covariates are independent AR(1) monthly series with unit innovations,
    labelled round-robin with ``PSEUDO_CATEGORIES``. When ``informative`` the
    target loads on the current-quarter months of the first ``n_signal``
    covariates through Beta(2,2) weights; otherwise it is a pure AR(1).
    Covariates start one quarter before the target.
    """
    if n_covariates < n_signal:
        raise ValueError("n_signal exceeds the number of covariates")
    n_sub = (n_periods + 1) * m
    burn = 50 * m
    eps = rng.standard_normal((n_sub + burn, n_covariates))
    x = signal_lfilter(eps, hf_rho)[burn:]
    w = beta_weight((np.arange(m) + 0.5) / m, 2.0, 2.0)
    w = w / w.sum()
    cur = x[m:].reshape(n_periods, m, n_covariates)
    drive = np.zeros(n_periods)
    if informative:
        loads = np.linspace(1.0, 0.5, n_signal) * 1.5
        drive = np.einsum("tjk,j,k->t", cur[:, :, :n_signal], w, loads)
    u = rng.standard_normal(n_periods + 50) * noise_sd
    y = signal.lfilter([1.0], [1.0, -ar], np.concatenate([u[:50], drive + u[50:]]))[50:]
    covs = tuple(
        HighFrequencySeries(f"x{k + 1:02d}", x[:, k], m=m, first_period=0, lead=m,
                            category=PSEUDO_CATEGORIES[k % len(PSEUDO_CATEGORIES)])
        for k in range(n_covariates)
    )
    return MixedFrequencyPanel(LowFrequencySeries(y, first_period=1), covs)


def signal_lfilter(eps: np.ndarray, rho: float) -> np.ndarray:
    """AR(1) filter along axis 0 started at zero."""
    return signal.lfilter([1.0], [1.0, -rho], eps, axis=0)
