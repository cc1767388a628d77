"""Compiled coordinate-descent loops.

Both kernels are ``nogil`` so callers can run independent problems on a
thread pool.  Stopping is checked once per full sweep.  The Lasso kernel
stops when the duality gap is below ``gap_tol`` and the stationarity
conditions hold to ``kkt_tol`` relative to ``lam``; a small gap alone does
not bound the gradient tightly.
"""

import numpy as np
from numba import njit


@njit(cache=True, nogil=True)
def _soft(x, t):
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


@njit(cache=True, nogil=True)
def lasso_cd(Xt, y, lam, theta, max_iter, gap_tol, skip, kkt_tol=1e-7):
    """Cyclic CD for (1/2n)||y - X theta||^2 + lam ||theta||_1.

    ``Xt`` is X transposed (p x n, C-contiguous).  Column ``skip`` (if >= 0)
    is treated as absent and its coefficient pinned at 0.  ``theta`` is
    updated in place.  Returns (sweeps, gap, residual, objective trace,
    relative KKT violation).
    """
    p, n = Xt.shape
    col_sq = np.empty(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += Xt[j, i] * Xt[j, i]
        col_sq[j] = s / n
    r = y.copy()
    for j in range(p):
        if theta[j] != 0.0:
            for i in range(n):
                r[i] -= Xt[j, i] * theta[j]
    yy = 0.0
    for i in range(n):
        yy += y[i] * y[i]
    trace = np.empty(max_iter + 1)
    gap = np.inf
    kkt = np.inf
    sweeps = 0
    trace[0] = _primal(r, theta, lam, n)
    for it in range(max_iter):
        for j in range(p):
            if j == skip or col_sq[j] == 0.0:
                continue
            old = theta[j]
            dot = 0.0
            for i in range(n):
                dot += Xt[j, i] * r[i]
            new = _soft(dot / n + col_sq[j] * old, lam) / col_sq[j]
            if new != old:
                d = new - old
                for i in range(n):
                    r[i] -= Xt[j, i] * d
                theta[j] = new
        sweeps = it + 1
        primal = _primal(r, theta, lam, n)
        trace[sweeps] = primal
        dual, kkt = _dual(Xt, y, r, theta, lam, n, yy, skip)
        gap = primal - dual
        if gap <= gap_tol and kkt <= kkt_tol:
            break
    return sweeps, max(gap, 0.0), r, trace[: sweeps + 1], kkt


@njit(cache=True, nogil=True)
def _primal(r, theta, lam, n):
    rr = 0.0
    for i in range(r.shape[0]):
        rr += r[i] * r[i]
    l1 = 0.0
    for j in range(theta.shape[0]):
        l1 += abs(theta[j])
    return 0.5 * rr / n + lam * l1


@njit(cache=True, nogil=True)
def _dual(Xt, y, r, theta, lam, n, yy, skip):
    # dual point u = s * r rescaled into {||X^T u / n||_inf <= lam};
    # also returns max(|g|_inf / lam - 1, max_supp 1 - sign(theta) g / lam)
    p = Xt.shape[0]
    gmax = 0.0
    short = 0.0
    for j in range(p):
        if j == skip:
            continue
        dot = 0.0
        for i in range(n):
            dot += Xt[j, i] * r[i]
        a = abs(dot) / n
        if a > gmax:
            gmax = a
        if theta[j] != 0.0:
            v = 1.0 - np.sign(theta[j]) * dot / n / lam
            if v > short:
                short = v
    s = 1.0
    if gmax > lam:
        s = lam / gmax
    uy = 0.0
    uu = 0.0
    for i in range(n):
        u = s * r[i]
        uy += u * y[i]
        uu += u * u
    return (uy - 0.5 * uu) / n, max(gmax / lam - 1.0, short, 0.0)


@njit(cache=True, nogil=True)
def quadratic_cd(Sigma, z, lam, theta, max_iter, gap_tol):
    """CD for 0.5 (theta - z)^T Sigma (theta - z) + lam ||theta||_1."""
    p = z.shape[0]
    g = np.zeros(p)
    Sz = np.zeros(p)
    for a in range(p):
        for b in range(p):
            g[a] += Sigma[a, b] * (theta[b] - z[b])
            Sz[a] += Sigma[a, b] * z[b]
    gap = np.inf
    sweeps = 0
    for it in range(max_iter):
        for j in range(p):
            old = theta[j]
            new = _soft(old - g[j] / Sigma[j, j], lam / Sigma[j, j])
            if new != old:
                d = new - old
                for a in range(p):
                    g[a] += Sigma[a, j] * d
                theta[j] = new
        sweeps = it + 1
        # primal and dual of the equivalent Lasso with design Sigma^{1/2}
        dSd = 0.0
        dSz = 0.0
        gmax = 0.0
        l1 = 0.0
        for a in range(p):
            dSd += (theta[a] - z[a]) * g[a]
            dSz += (theta[a] - z[a]) * Sz[a]
            if abs(g[a]) > gmax:
                gmax = abs(g[a])
            l1 += abs(theta[a])
        s = 1.0
        if gmax > lam:
            s = lam / gmax
        primal = 0.5 * dSd + lam * l1
        dual = -s * dSz - 0.5 * s * s * dSd
        gap = primal - dual
        if gap <= gap_tol:
            break
    return sweeps, max(gap, 0.0)
