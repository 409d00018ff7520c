"""ARDL-MIDAS design matrices.

A row targets low-frequency period ``s``; its information origin is
``t = s - 1``. Columns are, in order, the intercept, ``y_{s-1} .. y_{s-J}``,
and for every covariate the aggregated lag window

    x_{t + (h+1-j)/m},  j = 1 .. n_lags,

where ``h`` is the covariate's lead net of its publication delay. ``h = 0``
stops at the end of period ``t`` (a pure forecast), ``h = m`` covers the whole
target period (the contemporaneous alignment of a plain ARDL-MIDAS model).
The window is multiplied by a weight matrix: a polynomial dictionary, the
identity (unrestricted lags) or a simple FLOW/STOCK/MIDDLE aggregation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from .dictionary import DictionarySpec, build_weight_matrix
from .timeseries import GroupStructure, HighFrequencySeries, MixedFrequencyPanel

AGGREGATIONS = ("midas", "unrestricted", "flow", "stock", "middle")


class InsufficientHistoryError(ValueError):
    pass


@dataclass(frozen=True)
class CovariateSpec:
    """How one covariate enters the regression.

    ``q``, ``lead`` and ``delay`` default to the series metadata when None.
    """

    name: str
    dictionary: DictionarySpec = field(default_factory=DictionarySpec)
    aggregation: str = "midas"
    q: int | None = None
    lead: int | None = None
    delay: int | None = None
    n_lags: int | None = None
    category: str | None = None

    def __post_init__(self):
        if self.aggregation not in AGGREGATIONS:
            raise ValueError(f"unknown aggregation {self.aggregation!r}")

    def resolve(self, series: HighFrequencySeries) -> "ResolvedCovariate":
        q = series.q if self.q is None else self.q
        lead = series.lead if self.lead is None else self.lead
        delay = series.delay if self.delay is None else self.delay
        total = series.m * q
        n_lags = total if self.n_lags is None else self.n_lags
        if q < 1:
            raise ValueError(f"{self.name}: q must be >= 1")
        if not 0 <= lead <= series.m:
            raise ValueError(f"{self.name}: lead must lie in [0, m]")
        if delay < 0:
            raise ValueError(f"{self.name}: delay must be >= 0")
        if not 1 <= n_lags <= total:
            raise ValueError(f"{self.name}: n_lags must lie in [1, m*q]")
        if self.aggregation == "midas" and self.dictionary.n_basis > n_lags:
            raise ValueError(
                f"{self.name}: {self.dictionary.n_basis} basis functions exceed {n_lags} aggregated lags"
            )
        cat = self.category if self.category is not None else series.category
        return ResolvedCovariate(self, series, q, lead - delay, n_lags, cat)


@dataclass(frozen=True)
class ResolvedCovariate:
    spec: CovariateSpec
    series: HighFrequencySeries
    q: int
    eff_lead: int
    n_lags: int
    category: str | None

    @property
    def m(self) -> int:
        return self.series.m

    @property
    def offsets(self) -> np.ndarray:
        """Sub-period offsets ``f`` of the window relative to the end of the origin period."""
        return self.eff_lead + 1 - np.arange(1, self.n_lags + 1)

    def weights(self) -> np.ndarray:
        return covariate_weights(self.spec.aggregation, self.spec.dictionary, self.m, self.q, self.n_lags)

    def column_names(self) -> list[str]:
        agg, name = self.spec.aggregation, self.spec.name
        if agg == "midas":
            return [f"{name}[w{l}]" for l in range(self.spec.dictionary.n_basis)]
        if agg == "unrestricted":
            return [f"{name}[lag{j}]" for j in range(1, self.n_lags + 1)]
        return [f"{name}[{agg}{b + 1}]" for b in range(self.weights().shape[1])]


def covariate_weights(aggregation: str, dictionary: DictionarySpec, m: int, q: int, n_lags: int) -> np.ndarray:
    """Weight matrix mapping an ``n_lags`` window to regression columns."""
    total = m * q
    if aggregation == "midas":
        return build_weight_matrix(dictionary, total, n_lags)
    if aggregation == "unrestricted":
        return np.eye(n_lags) / total
    blocks = [np.arange(b * m, min((b + 1) * m, n_lags)) for b in range(q)]
    blocks = [blk for blk in blocks if blk.size]
    W = np.zeros((n_lags, len(blocks)))
    for b, blk in enumerate(blocks):
        if aggregation == "flow":
            W[blk, b] = 1.0 / blk.size
        elif aggregation == "stock":
            W[blk[0], b] = 1.0
        elif aggregation == "middle":
            # ties go to the more recent lag: the 6th of 12
            W[blk[math.ceil(blk.size / 2) - 1], b] = 1.0
        else:
            raise ValueError(f"unknown aggregation {aggregation!r}")
    return W


@dataclass(frozen=True)
class DesignSpec:
    ar_lags: int = 1
    covariates: tuple[CovariateSpec, ...] = ()
    include_intercept: bool = True
    penalize_intercept: bool = True
    group_mode: str = "per-covariate"
    ar_grouping: str = "joint"

    def __post_init__(self):
        object.__setattr__(self, "covariates", tuple(self.covariates))
        if self.ar_lags < 0:
            raise ValueError("ar_lags must be >= 0")
        if self.group_mode not in ("per-covariate", "per-category"):
            raise ValueError(f"unknown group_mode {self.group_mode!r}")
        if self.ar_grouping not in ("joint", "separate"):
            raise ValueError(f"unknown ar_grouping {self.ar_grouping!r}")
        names = [c.name for c in self.covariates]
        if len(set(names)) != len(names):
            raise ValueError("duplicate covariate in design spec")

    @classmethod
    def for_panel(cls, panel: MixedFrequencyPanel, dictionary: DictionarySpec | None = None,
                  aggregation: str = "midas", **kw) -> "DesignSpec":
        """Same treatment for every covariate of ``panel``."""
        dictionary = dictionary or DictionarySpec()
        covs = tuple(CovariateSpec(c.name, dictionary, aggregation) for c in panel.covariates)
        return cls(covariates=covs, **kw)

    def with_covariates(self, **changes) -> "DesignSpec":
        """Apply the same field changes to every covariate spec."""
        return replace(self, covariates=tuple(replace(c, **changes) for c in self.covariates))


def column_scaling(X: np.ndarray, center: bool) -> tuple[np.ndarray, np.ndarray]:
    """Per-column (center, scale) with scale the empirical norm ``|x - c|_2 / sqrt(T)``."""
    T = X.shape[0]
    c = X.mean(axis=0) if center else np.zeros(X.shape[1])
    d = np.sqrt(((X - c) ** 2).sum(axis=0) / T)
    return c, d


@dataclass(frozen=True)
class DesignProblem:
    y: np.ndarray
    X: np.ndarray
    groups: GroupStructure
    column_names: tuple[str, ...] = ()
    intercept: bool = True
    penalize_intercept: bool = True
    periods: np.ndarray | None = None
    spec: DesignSpec | None = None

    def __post_init__(self):
        y = np.array(self.y, dtype=float)
        X = np.array(self.X, dtype=float)
        if X.ndim != 2 or y.shape != (X.shape[0],):
            raise ValueError(f"dimension mismatch: y {y.shape} vs X {X.shape}")
        if self.groups.p != X.shape[1]:
            raise ValueError("group structure does not cover the design columns")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise ValueError("design contains non-finite entries")
        for a in (y, X):
            a.setflags(write=False)
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        names = tuple(self.column_names) or tuple(f"x{j}" for j in range(X.shape[1]))
        object.__setattr__(self, "column_names", names)
        if self.periods is not None:
            per = np.array(self.periods, dtype=np.int64)
            per.setflags(write=False)
            object.__setattr__(self, "periods", per)
        if self.intercept and not np.allclose(X[:, 0], 1.0):
            raise ValueError("intercept column must be the first column of ones")

    @property
    def T(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def centered(self) -> bool:
        """Columns are centered when the intercept is free of the penalty."""
        return self.intercept and not self.penalize_intercept

    @property
    def scaling(self) -> tuple[np.ndarray, np.ndarray]:
        c, d = column_scaling(self.X, self.centered)
        if self.centered:
            c[0], d[0] = 0.0, 1.0
        return c, d

    def subset(self, rows) -> "DesignProblem":
        rows = np.asarray(rows)
        per = None if self.periods is None else self.periods[rows]
        return replace(self, y=self.y[rows], X=self.X[rows], periods=per)

    def with_groups(self, groups: GroupStructure) -> "DesignProblem":
        return replace(self, groups=groups)


def _resolve(panel: MixedFrequencyPanel, spec: DesignSpec) -> list[ResolvedCovariate]:
    out = []
    for cs in spec.covariates:
        try:
            series = panel.covariate(cs.name)
        except KeyError:
            raise ValueError(f"covariate {cs.name!r} not in panel") from None
        out.append(cs.resolve(series))
    return out


def lag_window(rc: ResolvedCovariate, periods, impute_zero: bool = False) -> np.ndarray:
    """Raw high-frequency window ``Z`` (rows = target periods, columns = lags j)."""
    periods = np.asarray(periods)
    pos = rc.series.position(periods[:, None] - 1, rc.offsets[None, :])
    vals = rc.series.values
    late = pos >= vals.size
    if late.any():
        bad = periods[late.any(axis=1)]
        raise InsufficientHistoryError(
            f"{rc.spec.name}: no data for target period(s) {bad.tolist()[:5]} at lead {rc.eff_lead}"
        )
    early = pos < 0
    if early.any() and not impute_zero:
        bad = periods[early.any(axis=1)]
        raise InsufficientHistoryError(
            f"{rc.spec.name}: insufficient pre-sample history for target period(s) {bad.tolist()[:5]}"
            " (set impute_zero to fill with zeros)"
        )
    Z = vals[np.clip(pos, 0, None)]
    if early.any():
        Z = np.where(early, 0.0, Z)
    return Z


def _ar_block(panel: MixedFrequencyPanel, J: int, periods: np.ndarray) -> np.ndarray:
    y = panel.target
    lags = periods[:, None] - np.arange(1, J + 1)[None, :]
    if J and (lags.min() < y.first_period or lags.max() > y.last_period):
        raise InsufficientHistoryError("autoregressive lags fall outside the target sample")
    return y.values[lags - y.first_period] if J else np.empty((periods.size, 0))


def _features(panel, spec: DesignSpec, periods, rcs=None) -> np.ndarray:
    periods = np.asarray(periods, dtype=np.int64)
    rcs = _resolve(panel, spec) if rcs is None else rcs
    blocks = []
    if spec.include_intercept:
        blocks.append(np.ones((periods.size, 1)))
    blocks.append(_ar_block(panel, spec.ar_lags, periods))
    for rc in rcs:
        blocks.append(lag_window(rc, periods, panel.impute_zero) @ rc.weights())
    return np.hstack(blocks)


def _column_layout(spec: DesignSpec, rcs: Sequence[ResolvedCovariate]):
    names, labels = [], []
    if spec.include_intercept:
        names.append("const")
        labels.append("ar" if spec.ar_grouping == "joint" else "intercept")
    for j in range(1, spec.ar_lags + 1):
        names.append(f"y[lag{j}]")
        labels.append("ar" if spec.ar_grouping == "joint" else f"ar{j}")
    for rc in rcs:
        cols = rc.column_names()
        names.extend(cols)
        if spec.group_mode == "per-category":
            if rc.category is None:
                raise ValueError(f"{rc.spec.name}: per-category grouping needs a category")
            labels.extend([f"category:{rc.category}"] * len(cols))
        else:
            labels.extend([rc.spec.name] * len(cols))
    return names, labels


def usable_periods(panel: MixedFrequencyPanel, spec: DesignSpec) -> np.ndarray:
    """Target periods whose regressors can be built (target value not required)."""
    y = panel.target
    rcs = _resolve(panel, spec)
    cand = np.arange(y.first_period + spec.ar_lags, y.last_period + 2)
    ok = np.ones(cand.size, dtype=bool)
    for rc in rcs:
        pos = rc.series.position(cand[:, None] - 1, rc.offsets[None, :])
        ok &= (pos < rc.series.values.size).all(axis=1)
        if not panel.impute_zero:
            ok &= (pos >= 0).all(axis=1)
    return cand[ok]


def build_design(panel: MixedFrequencyPanel, spec: DesignSpec, periods=None) -> DesignProblem:
    """Regression problem over target periods with observed ``y``.

    By default every target period from ``first_period + J`` to the end of the
    target sample is used, and missing covariate history is an error.
    """
    y = panel.target
    rcs = _resolve(panel, spec)
    if periods is None:
        periods = np.arange(y.first_period + spec.ar_lags, y.last_period + 1)
        if periods.size == 0:
            raise InsufficientHistoryError(f"{len(y)} target observations cannot supply {spec.ar_lags} lags")
    periods = np.asarray(periods, dtype=np.int64)
    if periods.min() < y.first_period or periods.max() > y.last_period:
        raise ValueError("requested periods without an observed target")
    X = _features(panel, spec, periods, rcs)
    names, labels = _column_layout(spec, rcs)
    if len(names) != X.shape[1]:
        raise ValueError("dimension mismatch between column layout and design")
    return DesignProblem(
        y=y.values[periods - y.first_period],
        X=X,
        groups=GroupStructure.from_labels(labels),
        column_names=tuple(names),
        intercept=spec.include_intercept,
        penalize_intercept=spec.penalize_intercept,
        periods=periods,
        spec=spec,
    )


def prediction_rows(panel: MixedFrequencyPanel, spec: DesignSpec, periods) -> np.ndarray:
    """Regressor rows for target periods whose ``y`` may be unobserved."""
    return _features(panel, spec, np.atleast_1d(periods))


def aggregate_simple(panel: MixedFrequencyPanel, method: str, q: int | None = None,
                     periods=None, n_lags: int | None = None) -> dict[str, np.ndarray]:
    """FLOW / STOCK / MIDDLE aggregates per covariate.

    Returns ``{name: array (n_periods, q)}`` with one column per lagged
    low-frequency period, aligned with the covariate's lead and delay.
    """
    method = method.lower()
    if method not in ("flow", "stock", "middle"):
        raise ValueError(f"unknown aggregation {method!r}")
    out = {}
    for series in panel.covariates:
        rc = CovariateSpec(series.name, aggregation=method, q=q, n_lags=n_lags).resolve(series)
        per = usable_periods(panel, DesignSpec(0, (rc.spec,))) if periods is None else np.asarray(periods)
        out[series.name] = lag_window(rc, per, panel.impute_zero) @ rc.weights()
    return out


def design_audit(panel: MixedFrequencyPanel, spec: DesignSpec, periods=None) -> list[dict]:
    """Index bookkeeping per covariate: effective lead and window endpoints."""
    rcs = _resolve(panel, spec)
    if periods is None:
        periods = usable_periods(panel, spec)
    periods = np.asarray(periods)
    out = []
    for rc in rcs:
        off = rc.offsets
        out.append({
            "covariate": rc.spec.name,
            "m": rc.m,
            "lead": rc.eff_lead + (rc.spec.delay if rc.spec.delay is not None else rc.series.delay),
            "delay": rc.spec.delay if rc.spec.delay is not None else rc.series.delay,
            "effective_lead": rc.eff_lead,
            "n_lags": rc.n_lags,
            "newest_offset": int(off[0]),
            "oldest_offset": int(off[-1]),
            "first_target": int(periods[0]) if periods.size else None,
            "first_window_index": [int(i) for i in rc.series.position(periods[0] - 1, off[[0, -1]])] if periods.size else None,
            "last_target": int(periods[-1]) if periods.size else None,
            "last_window_index": [int(i) for i in rc.series.position(periods[-1] - 1, off[[0, -1]])] if periods.size else None,
        })
    return out
