"""Compiled inner loops for block coordinate descent.

All routines work on a standardized working problem: ``Xt`` holds the
penalized columns as rows (``p_w x T``, C-contiguous), groups are given in
CSR form ``gidx[gptr[g]:gptr[g+1]]`` and the objective is

    |r|^2 / T + 2 * (l1 * |b|_1 + grp * sum_g w_g |b_g|_2 + ridge / 2 * |b|^2).
"""

import numpy as np
from numba import njit


@njit(cache=True)
def _dot(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


@njit(cache=True)
def objective_value(r, beta, gptr, gidx, gw, l1, grp, ridge):
    T = r.shape[0]
    pen = 0.0
    for g in range(gptr.shape[0] - 1):
        sq = 0.0
        ab = 0.0
        for a in range(gptr[g], gptr[g + 1]):
            v = beta[gidx[a]]
            sq += v * v
            ab += abs(v)
        pen += l1 * ab + grp * gw[g] * np.sqrt(sq) + 0.5 * ridge * sq
    return _dot(r, r) / T + 2.0 * pen


@njit(cache=True)
def _update_coords(Xt, r, beta, gidx, lo, hi, colsq, l1, ridge):
    # without a group term the prox separates: exact coordinate minimization
    T = r.shape[0]
    change = 0.0
    active = False
    for a in range(lo, hi):
        j = gidx[a]
        cj = colsq[j]
        if cj == 0.0:
            continue
        v = cj * beta[j] + _dot(Xt[j], r) / T
        if v > l1:
            v -= l1
        elif v < -l1:
            v += l1
        else:
            v = 0.0
        new = v / (cj + ridge)
        d = new - beta[j]
        if d != 0.0:
            xj = Xt[j]
            for i in range(T):
                r[i] -= d * xj[i]
            beta[j] = new
            if abs(d) > change:
                change = abs(d)
        if new != 0.0:
            active = True
    return change, active


@njit(cache=True)
def _update_group(Xt, r, beta, gidx, lo, hi, L, l1, grpw, ridge, tol, inner_max, z, b0, colsq):
    if grpw == 0.0:
        return _update_coords(Xt, r, beta, gidx, lo, hi, colsq, l1, ridge)
    T = r.shape[0]
    n = hi - lo
    for a in range(n):
        b0[a] = beta[gidx[lo + a]]
    t1 = l1 / L
    t2 = grpw / L
    shrink = 1.0 / (1.0 + ridge / L)
    for it in range(inner_max):
        nrm = 0.0
        for a in range(n):
            j = gidx[lo + a]
            v = beta[j] + _dot(Xt[j], r) / (T * L)
            if v > t1:
                v -= t1
            elif v < -t1:
                v += t1
            else:
                v = 0.0
            z[a] = v
            nrm += v * v
        nrm = np.sqrt(nrm)
        if nrm <= t2:
            scale = 0.0
        else:
            scale = (1.0 - t2 / nrm) * shrink
        step = 0.0
        for a in range(n):
            j = gidx[lo + a]
            new = z[a] * scale
            d = new - beta[j]
            if d != 0.0:
                xj = Xt[j]
                for i in range(T):
                    r[i] -= d * xj[i]
                beta[j] = new
                if abs(d) > step:
                    step = abs(d)
        # a single coordinate with unit curvature is minimized exactly in one step
        if step < tol or n == 1:
            break
    change = 0.0
    active = False
    for a in range(n):
        v = beta[gidx[lo + a]]
        d = abs(v - b0[a])
        if d > change:
            change = d
        if v != 0.0:
            active = True
    return change, active


@njit(cache=True)
def bcd(Xt, r, beta, gptr, gidx, lip, gw, l1, grp, ridge, tol, max_sweeps,
        inner_max, active_set, history, hist_offset, colsq):
    """Cyclic block updates; returns (sweeps, converged).

    Blocks without a group penalty are updated one coordinate at a time.

    After two full sweeps only active groups are visited until they settle,
    then a full sweep checks whether any other group wants to enter.
    """
    n_groups = gptr.shape[0] - 1
    maxsize = 1
    for g in range(n_groups):
        if gptr[g + 1] - gptr[g] > maxsize:
            maxsize = gptr[g + 1] - gptr[g]
    z = np.empty(maxsize)
    b0 = np.empty(maxsize)
    active = np.zeros(n_groups, dtype=np.bool_)
    for g in range(n_groups):
        for a in range(gptr[g], gptr[g + 1]):
            if beta[gidx[a]] != 0.0:
                active[g] = True
    full = True
    n_full = 0
    sweeps = 0
    converged = False
    while sweeps < max_sweeps:
        max_change = 0.0
        for g in range(n_groups):
            if not full and not active[g]:
                continue
            change, act = _update_group(Xt, r, beta, gidx, gptr[g], gptr[g + 1], lip[g], l1,
                                        grp * gw[g], ridge, tol, inner_max, z, b0, colsq)
            active[g] = act
            if change > max_change:
                max_change = change
        if hist_offset + sweeps < history.shape[0]:
            history[hist_offset + sweeps] = objective_value(r, beta, gptr, gidx, gw, l1, grp, ridge)
        sweeps += 1
        if full:
            n_full += 1
            if max_change < tol:
                converged = True
                break
            if active_set and n_full >= 2:
                full = False
        elif max_change < tol:
            full = True
    return sweeps, converged


@njit(cache=True)
def kkt(Xt, r, beta, gptr, gidx, gw, l1, grp, ridge):
    """Largest violation of the subgradient optimality conditions."""
    T = r.shape[0]
    worst = 0.0
    for g in range(gptr.shape[0] - 1):
        lo, hi = gptr[g], gptr[g + 1]
        nrm = 0.0
        for a in range(lo, hi):
            nrm += beta[gidx[a]] ** 2
        nrm = np.sqrt(nrm)
        if nrm == 0.0:
            s = 0.0
            for a in range(lo, hi):
                c = abs(_dot(Xt[gidx[a]], r) / T)
                if c > l1:
                    s += (c - l1) ** 2
            v = np.sqrt(s) - grp * gw[g]
            if v > worst:
                worst = v
        else:
            for a in range(lo, hi):
                j = gidx[a]
                c = _dot(Xt[j], r) / T
                b = beta[j]
                if b != 0.0:
                    sgn = 1.0 if b > 0 else -1.0
                    v = abs(c - (l1 * sgn + grp * gw[g] * b / nrm + ridge * b))
                else:
                    v = abs(c) - l1
                if v > worst:
                    worst = v
    return worst


@njit(cache=True)
def solve_path(Xt, y, gptr, gidx, lip, gw, l1s, grps, ridges, b_init, tol, max_sweeps,
               inner_max, active_set, kkt_tol, history, r2_stop):
    """Warm-started fits over a sequence of penalty levels.

    Returns (betas, sweeps, converged, kkt_residuals, objectives). With
    ``0 < r2_stop < 1`` the path stops once the in-sample R^2 reaches it; the
    remaining rows repeat the last solution and are flagged not converged.
    """
    p = Xt.shape[0]
    T = y.shape[0]
    n = l1s.shape[0]
    betas = np.zeros((n, p))
    sweeps = np.zeros(n, dtype=np.int64)
    conv = np.zeros(n, dtype=np.bool_)
    kkts = np.zeros(n)
    objs = np.zeros(n)
    beta = b_init.copy()
    r = y.copy()
    for j in range(p):
        if beta[j] != 0.0:
            for i in range(T):
                r[i] -= beta[j] * Xt[j, i]
    tss = _dot(y, y)
    colsq = np.empty(p)
    for j in range(p):
        colsq[j] = _dot(Xt[j], Xt[j]) / T
    stop = n
    for k in range(n):
        done = 0
        t = tol
        ok = False
        res = 0.0
        for attempt in range(4):
            s, ok = bcd(Xt, r, beta, gptr, gidx, lip, gw, l1s[k], grps[k], ridges[k], t,
                        max_sweeps - done, inner_max, active_set, history, done, colsq)
            done += s
            res = kkt(Xt, r, beta, gptr, gidx, gw, l1s[k], grps[k], ridges[k])
            if not ok or res <= kkt_tol or done >= max_sweeps:
                break
            t = t * 0.1
        betas[k] = beta
        sweeps[k] = done
        conv[k] = ok and res <= kkt_tol
        kkts[k] = res
        objs[k] = objective_value(r, beta, gptr, gidx, gw, l1s[k], grps[k], ridges[k])
        if 0.0 < r2_stop < 1.0 and _dot(r, r) <= (1.0 - r2_stop) * tss:
            stop = k + 1
            break
    for k in range(stop, n):
        betas[k] = beta
        kkts[k] = np.nan
        objs[k] = np.nan
    return betas, sweeps, conv, kkts, objs
