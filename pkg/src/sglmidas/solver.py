"""Sparse-group LASSO by block coordinate descent.

Solves

    min_b  |y - X b|_T^2 + 2 * lam * Omega(b),
    Omega(b) = alpha * |b|_1 + (1 - alpha) * sum_G w_G |b_G|_2,

with ``|v|_T^2 = |v|_2^2 / T``. ``alpha = 1`` is the LASSO and ``alpha = 0``
the group LASSO. By default every penalized column is rescaled to unit
empirical norm before solving, so the penalty acts on ``d * b`` where ``d``
holds the column norms; coefficients are always reported on the original
scale and ``SgLassoFit.scales`` records ``d``. A free intercept is handled by
centering.

The ``elasticnet`` penalty kind replaces the group norm with a ridge term,
``lam * (alpha * |b|_1 + (1 - alpha) / 2 * |b|_2^2)``, on singleton groups.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import _kernels
from .design import DesignProblem, column_scaling
from .timeseries import GroupStructure

logger = logging.getLogger(__name__)

KINDS = ("sglasso", "elasticnet")


def soft_threshold(z, t):
    """``sign(z) * max(|z| - t, 0)``, elementwise."""
    if np.any(np.asarray(t) < 0):
        raise ValueError("threshold must be non-negative")
    out = np.sign(z) * np.maximum(np.abs(z) - t, 0.0)
    return float(out) if np.ndim(out) == 0 else out


def prox_sparse_group(z, t: float, alpha: float, weight: float = 1.0) -> np.ndarray:
    """Proximal map of ``t * (alpha |b|_1 + (1 - alpha) * weight * |b|_2)`` for one group."""
    if t < 0:
        raise ValueError("t must be non-negative")
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    s = np.atleast_1d(soft_threshold(np.asarray(z, dtype=float), alpha * t))
    nrm = np.linalg.norm(s)
    gt = (1.0 - alpha) * t * weight
    if nrm <= gt:
        return np.zeros_like(s)
    return s * (1.0 - gt / nrm)


@dataclass(frozen=True)
class PenaltySpec:
    lam: float
    alpha: float = 0.5
    group_weights: object = None
    kind: str = "sglasso"

    def __post_init__(self):
        if self.lam < 0:
            raise ValueError("lambda must be >= 0")
        if not 0.0 <= self.alpha <= 1.0:
            raise ValueError("alpha must lie in [0, 1]")
        if self.kind not in KINDS:
            raise ValueError(f"unknown penalty kind {self.kind!r}")

    def strengths(self) -> tuple[float, float, float]:
        """(l1, group, ridge) multipliers used by the kernels."""
        if self.kind == "elasticnet":
            return self.lam * self.alpha, 0.0, self.lam * (1.0 - self.alpha)
        return self.lam * self.alpha, self.lam * (1.0 - self.alpha), 0.0


@dataclass(frozen=True)
class SolverOptions:
    tol: float = 1e-7
    max_iter: int = 10_000
    kkt_tol: float = 1e-6
    standardize: bool = True
    active_set: bool = True
    inner_max: int = 5
    record_history: bool = False

    def __post_init__(self):
        if self.tol <= 0:
            raise ValueError("tolerance must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")


@dataclass(frozen=True)
class SgLassoFit:
    beta: np.ndarray
    lam: float
    alpha: float
    objective: float
    iterations: int
    converged: bool
    kkt_residual: float
    scales: np.ndarray
    groups: GroupStructure
    kind: str = "sglasso"
    history: np.ndarray | None = field(default=None, repr=False)
    intercept: bool = True

    @property
    def active_set(self) -> np.ndarray:
        return np.flatnonzero(self.beta)

    @property
    def active_groups(self) -> tuple[str, ...]:
        return tuple(n for n, g in self.groups if np.any(self.beta[g] != 0))

    def predict(self, X) -> np.ndarray:
        return np.asarray(X, dtype=float) @ self.beta


def _group_weights(groups: GroupStructure, spec) -> np.ndarray:
    if spec is None:
        return np.ones(len(groups))
    if isinstance(spec, str):
        if spec != "sqrt":
            raise ValueError(f"unknown group weight rule {spec!r}")
        return np.sqrt(groups.sizes.astype(float))
    w = np.asarray(spec, dtype=float)
    if w.shape != (len(groups),) or np.any(w <= 0):
        raise ValueError("group weights must be one positive number per group")
    return w


class PreparedProblem:
    """Standardized working copy of a design problem, reusable across penalties."""

    def __init__(self, problem: DesignProblem, kind: str = "sglasso", group_weights=None,
                 standardize: bool = True):
        if kind not in KINDS:
            raise ValueError(f"unknown penalty kind {kind!r}")
        self.problem = problem
        self.kind = kind
        X, y = problem.X, problem.y
        T, p = X.shape
        self.center = problem.centered
        penalized = np.ones(p, dtype=bool)
        if self.center:
            penalized[0] = False
        c, d = column_scaling(X, self.center)
        tiny = 1e-12 * (1.0 + np.abs(X).max(axis=0))
        nondegenerate = d > tiny
        self.working = np.flatnonzero(penalized & nondegenerate)
        if not standardize:
            d = np.ones(p)
        d = np.where(nondegenerate, d, 1.0)
        if self.center:
            c[0], d[0] = 0.0, 1.0
        self.c, self.d = c, d
        self.y_mean = y.mean() if self.center else 0.0
        w = self.working
        self.Xt = np.ascontiguousarray(((X[:, w] - c[w]) / d[w]).T)
        self.yw = np.ascontiguousarray(y - self.y_mean)
        self.T = T

        # groups restricted to working columns, in working coordinates
        pos = -np.ones(p, dtype=np.int64)
        pos[w] = np.arange(w.size)
        weights = _group_weights(problem.groups, group_weights)
        members, gw = [], []
        for (name, g), wt in zip(problem.groups, weights):
            idx = pos[g]
            idx = idx[idx >= 0]
            if kind == "elasticnet":
                members.extend([np.array([i]) for i in idx])
                gw.extend([1.0] * idx.size)
            elif idx.size:
                members.append(np.sort(idx))
                gw.append(wt)
        self.gptr = np.concatenate([[0], np.cumsum([m.size for m in members])]).astype(np.int64)
        self.gidx = np.concatenate(members).astype(np.int64) if members else np.empty(0, np.int64)
        self.gw = np.asarray(gw, dtype=float)
        self.lip = np.array([_block_lipschitz(self.Xt[m], T) for m in members])
        self.full_weights = weights

    @property
    def n_working(self) -> int:
        return self.working.size

    def gradient(self) -> np.ndarray:
        """``X~' y~ / T`` on working columns (the gradient at zero)."""
        return self.Xt @ self.yw / self.T

    def to_original(self, b: np.ndarray) -> np.ndarray:
        """Map working coefficients (rows of ``b``) to the original parameterization."""
        b = np.atleast_2d(b)
        out = np.zeros((b.shape[0], self.problem.p))
        w = self.working
        out[:, w] = b / self.d[w]
        if self.center:
            out[:, 0] = self.y_mean - out[:, w] @ self.c[w]
        return out

    def to_working(self, beta: np.ndarray) -> np.ndarray:
        return np.asarray(beta, dtype=float)[self.working] * self.d[self.working]

    def lambda_max(self, alpha: float) -> float:
        return _lambda_max_from_gradient(self.gradient(), self.gptr, self.gidx, self.gw, alpha, self.kind)

    def solve(self, lambdas, alpha: float, options: SolverOptions, b_init=None, history=None,
              r2_stop: float = 0.0):
        lambdas = np.asarray(lambdas, dtype=float)
        strengths = np.array([PenaltySpec(lam, alpha, kind=self.kind).strengths() for lam in lambdas])
        if strengths.size == 0:
            strengths = strengths.reshape(0, 3)
        b0 = np.zeros(self.n_working) if b_init is None else np.asarray(b_init, dtype=float)
        hist = np.empty(0) if history is None else history
        if self.n_working == 0:
            n = lambdas.size
            r = self.yw
            obj = np.full(n, r @ r / self.T)
            return np.zeros((n, 0)), np.zeros(n, np.int64), np.ones(n, bool), np.zeros(n), obj
        return _kernels.solve_path(
            self.Xt, self.yw, self.gptr, self.gidx, self.lip, self.gw,
            np.ascontiguousarray(strengths[:, 0]), np.ascontiguousarray(strengths[:, 1]),
            np.ascontiguousarray(strengths[:, 2]), b0, options.tol, options.max_iter,
            options.inner_max, options.active_set, options.kkt_tol, hist, r2_stop,
        )


def _block_lipschitz(Xg: np.ndarray, T: int) -> float:
    if Xg.shape[0] == 1:
        return float(Xg[0] @ Xg[0] / T)
    gram = Xg @ Xg.T if Xg.shape[0] <= Xg.shape[1] else Xg.T @ Xg
    return float(np.linalg.eigvalsh(gram / T)[-1])


def _group_threshold(c: np.ndarray, alpha: float, weight: float) -> float:
    """Smallest ``t`` with ``|S(c, alpha t)|_2 <= (1 - alpha) * weight * t``."""
    amax = np.abs(c).max() if c.size else 0.0
    if amax == 0.0:
        return 0.0
    if alpha >= 1.0:
        return float(amax)
    if alpha <= 0.0:
        return float(np.linalg.norm(c) / weight)
    f = lambda t: np.linalg.norm(soft_threshold(c, alpha * t)) - (1.0 - alpha) * weight * t
    hi = min(amax / alpha, np.linalg.norm(c) / ((1.0 - alpha) * weight))
    if f(hi) >= 0.0:
        return float(hi)
    return float(brentq(f, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps))


# relative slack so the zero solution survives floating-point evaluation at lambda_max
_LAMBDA_MAX_SLACK = 1e-10


def _lambda_max_from_gradient(c, gptr, gidx, gw, alpha, kind) -> float:
    if kind == "elasticnet":
        best = float(np.abs(c).max() / max(alpha, 1e-3)) if c.size else 0.0
    else:
        best = 0.0
        for g in range(gptr.size - 1):
            best = max(best, _group_threshold(c[gidx[gptr[g]:gptr[g + 1]]], alpha, gw[g]))
    return best * (1.0 + _LAMBDA_MAX_SLACK)


def lambda_max(problem: DesignProblem, alpha: float, group_weights=None, standardize: bool = True,
               kind: str = "sglasso") -> float:
    """Smallest lambda at which every penalized coefficient is zero.

    For ``alpha = 1`` this is ``max_j |X_j' y / T|`` on the standardized
    (and, with a free intercept, centered) design; otherwise the largest
    per-group root of ``|S(X_G' y / T, alpha t)|_2 = (1 - alpha) w_G t``.
    The elastic-net kind uses ``max_j |X_j' y / T| / max(alpha, 1e-3)``.
    """
    if not 0.0 <= alpha <= 1.0:
        raise ValueError("alpha must lie in [0, 1]")
    return PreparedProblem(problem, kind, group_weights, standardize).lambda_max(alpha)


def _make_fit(prep: PreparedProblem, b, lam, alpha, sweeps, conv, kkt_res, obj, history=None) -> SgLassoFit:
    beta = prep.to_original(b)[0]
    return SgLassoFit(
        beta=beta, lam=float(lam), alpha=float(alpha), objective=float(obj),
        iterations=int(sweeps), converged=bool(conv), kkt_residual=float(kkt_res),
        scales=prep.d.copy(), groups=prep.problem.groups, kind=prep.kind,
        history=history, intercept=prep.problem.intercept,
    )


def fit(problem: DesignProblem, penalty: PenaltySpec, options: SolverOptions | None = None,
        beta0=None) -> SgLassoFit:
    """Solve the penalized least-squares problem at one (lambda, alpha).

    ``beta0`` (original scale) seeds the descent. A fit that hits
    ``options.max_iter`` is returned with ``converged=False``.
    """
    options = options or SolverOptions()
    prep = PreparedProblem(problem, penalty.kind, penalty.group_weights, options.standardize)
    b0 = None if beta0 is None else prep.to_working(beta0)
    hist = np.full(options.max_iter, np.nan) if options.record_history else None
    betas, sweeps, conv, kkts, objs = prep.solve([penalty.lam], penalty.alpha, options, b0, hist)
    if hist is not None:
        hist = hist[: sweeps[0]]
    out = _make_fit(prep, betas[0], penalty.lam, penalty.alpha, sweeps[0], conv[0], kkts[0], objs[0], hist)
    if not out.converged:
        logger.warning("fit did not converge: lam=%g alpha=%g kkt=%.2e after %d sweeps",
                       penalty.lam, penalty.alpha, out.kkt_residual, out.iterations)
    return out


def fit_path(problem: DesignProblem, alpha: float, lambda_grid: Sequence[float],
             options: SolverOptions | None = None, group_weights=None,
             kind: str = "sglasso") -> list[SgLassoFit]:
    """Warm-started fits along a strictly decreasing lambda grid."""
    grid = np.asarray(lambda_grid, dtype=float)
    if grid.ndim != 1 or grid.size == 0:
        raise ValueError("lambda grid must be a non-empty sequence")
    if np.any(np.diff(grid) >= 0):
        raise ValueError("lambda grid must be strictly decreasing")
    options = options or SolverOptions()
    prep = PreparedProblem(problem, kind, group_weights, options.standardize)
    betas, sweeps, conv, kkts, objs = prep.solve(grid, alpha, options)
    return [_make_fit(prep, betas[i], grid[i], alpha, sweeps[i], conv[i], kkts[i], objs[i])
            for i in range(grid.size)]


def lambda_grid(lam_max: float, n: int = 100, ratio: float = 1e-4) -> np.ndarray:
    """``n`` log-spaced values from ``lam_max`` down to ``ratio * lam_max``."""
    lam_max = max(lam_max, 1e-10)
    return np.geomspace(lam_max, lam_max * ratio, n)


def _scaled_parts(problem: DesignProblem, beta, scales):
    beta = np.asarray(beta, dtype=float)
    d = np.ones(problem.p) if scales is None else np.asarray(scales, dtype=float)
    penalized = np.ones(problem.p, dtype=bool)
    if problem.centered:
        penalized[0] = False
    return beta, d, penalized


def penalty_value(problem: DesignProblem, beta, penalty: PenaltySpec, scales=None) -> float:
    """``Omega(d * beta)`` over penalized coefficients."""
    beta, d, penalized = _scaled_parts(problem, beta, scales)
    b = np.where(penalized, beta * d, 0.0)
    if penalty.kind == "elasticnet":
        return float(penalty.alpha * np.abs(b).sum() + 0.5 * (1 - penalty.alpha) * b @ b)
    w = _group_weights(problem.groups, penalty.group_weights)
    grp = sum(wt * np.linalg.norm(b[g]) for (_, g), wt in zip(problem.groups, w))
    return float(penalty.alpha * np.abs(b).sum() + (1 - penalty.alpha) * grp)


def objective(problem: DesignProblem, beta, penalty: PenaltySpec, scales=None) -> float:
    """``|y - X beta|_T^2 + 2 lam Omega(d * beta)``; ``scales=None`` means ``d = 1``."""
    r = problem.y - problem.X @ np.asarray(beta, dtype=float)
    return float(r @ r / problem.T + 2 * penalty.lam * penalty_value(problem, beta, penalty, scales))


def kkt_residual(problem: DesignProblem, beta, penalty: PenaltySpec, scales=None) -> float:
    """Largest violation of the optimality conditions ``X'(y - X b)/T in lam * dOmega(b)``.

    Conditions are checked in the scaled coordinates ``d * beta``: equality for
    nonzero coefficients, the dual bound ``|S(c_G, lam alpha)|_2 <= lam (1 - alpha) w_G``
    for zero groups and ``|c_j| <= lam alpha`` for zero entries of active groups.
    An unpenalized intercept must have zero gradient.
    """
    beta, d, penalized = _scaled_parts(problem, beta, scales)
    r = problem.y - problem.X @ beta
    grad = problem.X.T @ r / problem.T
    l1, grp, ridge = penalty.strengths()
    worst = 0.0 if penalized.all() else abs(grad[0])
    b = beta * d
    c = grad / d
    if penalty.kind == "elasticnet":
        groups = [np.array([j]) for j in range(problem.p)]
        weights = np.ones(problem.p)
    else:
        groups = [g for _, g in problem.groups]
        weights = _group_weights(problem.groups, penalty.group_weights)
    for g, wt in zip(groups, weights):
        g = g[penalized[g]]
        if g.size == 0:
            continue
        bg, cg = b[g], c[g]
        nrm = np.linalg.norm(bg)
        if nrm == 0.0:
            v = np.linalg.norm(np.maximum(np.abs(cg) - l1, 0.0)) - grp * wt
            worst = max(worst, v)
            continue
        nz = bg != 0
        target = l1 * np.sign(bg[nz]) + grp * wt * bg[nz] / nrm + ridge * bg[nz]
        worst = max(worst, np.abs(cg[nz] - target).max(initial=0.0),
                    (np.abs(cg[~nz]) - l1).max(initial=0.0))
    return float(max(worst, 0.0))
