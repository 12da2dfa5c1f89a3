"""Numeric inner loops.

Every kernel exists as a plain function (``*_py``) that is valid numpy code
and as the selected implementation (no suffix), which is the numba-compiled
version unless numba is disabled.  The aggregation kernel additionally has a
vectorised numpy fallback because its plain-Python loop would be very slow.
"""
import numpy as np

from ._accel import HAVE_NUMBA, jit

# ---------------------------------------------------------------------------
# lasso by coordinate descent on a Gram matrix
#
# minimise 0.5 b'Gb - c'b + lam |b|_1 over b with b[exclude] = 0.  The
# gradient g = Gb - c is carried along and refreshed before every KKT check.
# ---------------------------------------------------------------------------


def _kkt_gram(g, beta, lam, exclude):
    worst = 0.0
    for l in range(beta.shape[0]):
        if l == exclude:
            continue
        if beta[l] > 0.0:
            v = abs(g[l] + lam)
        elif beta[l] < 0.0:
            v = abs(g[l] - lam)
        else:
            v = abs(g[l]) - lam
        if v > worst:
            worst = v
    return worst


def _fresh_gradient_loop(G, c, beta, g):
    d = beta.shape[0]
    for l in range(d):
        g[l] = -c[l]
    for k in range(d):
        bk = beta[k]
        if bk != 0.0:
            for l in range(d):
                g[l] += G[k, l] * bk


def _fresh_gradient_np(G, c, beta, g):
    nz = np.flatnonzero(beta)
    g[:] = G[nz].T @ beta[nz] - c


def _axpy_loop(g, delta, row):
    for i in range(g.shape[0]):
        g[i] += delta * row[i]


def _axpy_np(g, delta, row):
    g += delta * row


def _dot_loop(a, b):
    s = 0.0
    for i in range(a.shape[0]):
        s += a[i] * b[i]
    return s


def _dot_np(a, b):
    return float(a @ b)


def _objective_gram(g, c, beta, lam):
    s = 0.0
    for l in range(beta.shape[0]):
        s += 0.5 * beta[l] * (g[l] - c[l]) + lam * abs(beta[l])
    return s


def _sweep_gram(G, g, beta, lam, exclude, coords, ncoords):
    maxchange = 0.0
    for t in range(ncoords):
        l = coords[t]
        if l == exclude:
            continue
        gll = G[l, l]
        if gll <= 0.0:
            continue
        old = beta[l]
        z = gll * old - g[l]
        if z > lam:
            new = (z - lam) / gll
        elif z < -lam:
            new = (z + lam) / gll
        else:
            new = 0.0
        if new != old:
            delta = new - old
            beta[l] = new
            _axpy(g, delta, G[l])
            if abs(delta) > maxchange:
                maxchange = abs(delta)
    return maxchange


def _cd_gram_py(G, c, lam, beta, exclude, tol, kkt_tol, max_iter, hist):
    """Returns (sweeps, converged, kkt).  ``beta`` is updated in place.

    ``hist`` receives the objective after each sweep when it has room.
    """
    d = beta.shape[0]
    g = np.empty(d)
    _fresh_gradient(G, c, beta, g)
    allc = np.arange(d)
    active = np.empty(d, dtype=np.int64)
    it = 0
    kkt = np.inf
    while it < max_iter:
        mc = _sweep_gram(G, g, beta, lam, exclude, allc, d)
        if it < hist.shape[0]:
            hist[it] = _objective_gram(g, c, beta, lam)
        it += 1
        if mc <= tol:
            _fresh_gradient(G, c, beta, g)
            kkt = _kkt_gram(g, beta, lam, exclude)
            if kkt <= kkt_tol:
                return it, True, kkt
            continue
        na = 0
        for l in range(d):
            if beta[l] != 0.0:
                active[na] = l
                na += 1
        while it < max_iter:
            mc = _sweep_gram(G, g, beta, lam, exclude, active, na)
            if it < hist.shape[0]:
                hist[it] = _objective_gram(g, c, beta, lam)
            it += 1
            if mc <= tol:
                break
    _fresh_gradient(G, c, beta, g)
    kkt = _kkt_gram(g, beta, lam, exclude)
    return it, False, kkt


# ---------------------------------------------------------------------------
# lasso by coordinate descent on the raw design (large d, no Gram matrix)
#
# minimise (1/2n) sum_i w_i (y_i - x_i'b)^2 + lam |b|_1 with b[exclude] = 0.
# ---------------------------------------------------------------------------


def _resid_gradient(XT, w, r, g):
    n = r.shape[0]
    wr = w * r
    for l in range(XT.shape[0]):
        g[l] = -_dot(XT[l], wr) / n


def _cd_resid_py(XT, w, y, lam, beta, exclude, tol, kkt_tol, max_iter):
    """Residual-form lasso; ``XT`` is the transposed design (d, n), C order."""
    d, n = XT.shape
    colsq = np.zeros(d)
    for l in range(d):
        colsq[l] = _dot(XT[l] * w, XT[l]) / n
    r = y.copy()
    for l in range(d):
        if beta[l] != 0.0:
            _axpy(r, -beta[l], XT[l])
    g = np.empty(d)
    it = 0
    kkt = np.inf
    while it < max_iter:
        maxchange = 0.0
        for l in range(d):
            if l == exclude or colsq[l] <= 0.0:
                continue
            s = _dot(XT[l] * w, r)
            old = beta[l]
            z = colsq[l] * old + s / n
            if z > lam:
                new = (z - lam) / colsq[l]
            elif z < -lam:
                new = (z + lam) / colsq[l]
            else:
                new = 0.0
            if new != old:
                delta = new - old
                beta[l] = new
                _axpy(r, -delta, XT[l])
                if abs(delta) > maxchange:
                    maxchange = abs(delta)
        it += 1
        if maxchange <= tol:
            _resid_gradient(XT, w, r, g)
            kkt = _kkt_gram(g, beta, lam, exclude)
            if kkt <= kkt_tol:
                return it, True, kkt
    _resid_gradient(XT, w, r, g)
    kkt = _kkt_gram(g, beta, lam, exclude)
    return it, False, kkt


# ---------------------------------------------------------------------------
# nodewise regressions for every column of a Gram matrix
# ---------------------------------------------------------------------------


def _nodewise_one(G, j, lam, tol, kkt_tol, max_iter, gamma_row):
    d = G.shape[0]
    c = G[j].copy()
    hist = np.empty(0)
    it, ok, kkt = _cd_gram(G, c, lam, gamma_row, j, tol, kkt_tol, max_iter, hist)
    # tau^2 = G_jj - 2 gamma'c + gamma'G gamma + lam |gamma|_1
    gg = np.zeros(d)
    l1 = 0.0
    for k in range(d):
        bk = gamma_row[k]
        if bk != 0.0:
            l1 += abs(bk)
            _axpy(gg, bk, G[k])
    tau2 = G[j, j] - 2.0 * _dot(gamma_row, c) + _dot(gamma_row, gg) + lam * l1
    return tau2, it, ok, kkt


def _nodewise_all_py(G, lam, tol, kkt_tol, max_iter):
    d = G.shape[0]
    gamma = np.zeros((d, d))
    tau2 = np.empty(d)
    iters = np.empty(d, dtype=np.int64)
    conv = np.empty(d, dtype=np.bool_)
    kkt = np.empty(d)
    for j in range(d):
        t, it, ok, kk = _nodewise_one(G, j, lam, tol, kkt_tol, max_iter, gamma[j])
        tau2[j] = t
        iters[j] = it
        conv[j] = ok
        kkt[j] = kk
    return gamma, tau2, iters, conv, kkt


# ---------------------------------------------------------------------------
# one-dimensional minimisation of sum_k w_k min((v_k - x)^2, eta^2)
#
# ``v`` must be sorted ascending.  Returns (x, f, lo, hi, tie) where v[lo:hi]
# are the inliers of x (|v - x| <= eta) and ``tie`` flags a second distinct
# local minimum within ``tie_tol`` of the best objective.
# ---------------------------------------------------------------------------


def _eval_f(v, w, eta, x):
    eta2 = eta * eta
    f = 0.0
    lo = -1
    hi = -1
    for k in range(v.shape[0]):
        r = v[k] - x
        r2 = r * r
        if abs(r) <= eta:
            f += w[k] * r2
            if lo < 0:
                lo = k
            hi = k + 1
        else:
            f += w[k] * eta2
    if lo < 0:
        lo = 0
        hi = 0
    return f, lo, hi


def _window_mean(v, w, lo, hi):
    sw = 0.0
    swv = 0.0
    for k in range(lo, hi):
        sw += w[k]
        swv += w[k] * v[k]
    return swv / sw


def _redescending_py(v, w, eta, tie_tol):
    m = v.shape[0]
    ncand_max = m * (m + 1) // 2 + 3 * m
    cx = np.empty(ncand_max)
    nc = 0
    W = np.zeros(m + 1)
    S = np.zeros(m + 1)
    for k in range(m):
        W[k + 1] = W[k] + w[k]
        S[k + 1] = S[k] + w[k] * v[k]
    for i in range(m):
        for k in range(i, m):
            if v[k] - v[i] > 2.0 * eta:
                break
            cx[nc] = (S[k + 1] - S[i]) / (W[k + 1] - W[i])
            nc += 1
    for k in range(m):
        cx[nc] = v[k]
        cx[nc + 1] = v[k] - eta
        cx[nc + 2] = v[k] + eta
        nc += 3
    cf = np.empty(nc)
    clo = np.empty(nc, dtype=np.int64)
    chi = np.empty(nc, dtype=np.int64)
    fmin = np.inf
    for t in range(nc):
        f, lo, hi = _eval_f(v, w, eta, cx[t])
        cf[t] = f
        clo[t] = lo
        chi[t] = hi
        if f < fmin:
            fmin = f
    tol = tie_tol * max(1.0, fmin)
    # group near-optimal candidates by inlier window, then polish each
    # group to the exact mean of its window
    best_x = 0.0
    best_f = np.inf
    best_lo = 0
    best_hi = 0
    ngroups = 0
    seen_lo = np.empty(nc, dtype=np.int64)
    seen_hi = np.empty(nc, dtype=np.int64)
    gx = np.empty(nc)
    for t in range(nc):
        if cf[t] > fmin + tol:
            continue
        lo = clo[t]
        hi = chi[t]
        dup = False
        for s in range(ngroups):
            if seen_lo[s] == lo and seen_hi[s] == hi:
                dup = True
                break
        if dup:
            continue
        seen_lo[ngroups] = lo
        seen_hi[ngroups] = hi
        if hi > lo:
            x = _window_mean(v, w, lo, hi)
        else:
            x = cx[t]
        f, lo2, hi2 = _eval_f(v, w, eta, x)
        gx[ngroups] = x
        ngroups += 1
        if f > fmin + tol:
            continue
        cnt = hi2 - lo2
        if best_f == np.inf:
            better = True
        else:
            bcnt = best_hi - best_lo
            if cnt != bcnt:
                better = cnt > bcnt
            else:
                better = x < best_x
        if better:
            best_x = x
            best_f = f
            best_lo = lo2
            best_hi = hi2
    # distinct minima: polished locations that differ beyond round-off
    tie = False
    scale = 1e-12 * max(1.0, abs(best_x), eta)
    for s in range(ngroups):
        if abs(gx[s] - best_x) > scale:
            f, lo2, hi2 = _eval_f(v, w, eta, gx[s])
            if f <= fmin + tol:
                tie = True
                break
    return best_x, best_f, best_lo, best_hi, tie


def _redescending_numpy(v, w, eta, tie_tol):
    """Vectorised fallback with the same candidate set and tie rules."""
    m = v.shape[0]
    W = np.concatenate(([0.0], np.cumsum(w)))
    S = np.concatenate(([0.0], np.cumsum(w * v)))
    i, k = np.triu_indices(m)
    keep = v[k] - v[i] <= 2.0 * eta
    i, k = i[keep], k[keep]
    cx = np.concatenate(((S[k + 1] - S[i]) / (W[k + 1] - W[i]), v, v - eta, v + eta))

    def evaluate(xs):
        r = v[None, :] - xs[:, None]
        inl = np.abs(r) <= eta
        f = np.where(inl, w * r * r, w * eta * eta).sum(axis=1)
        any_in = inl.any(axis=1)
        lo = np.where(any_in, inl.argmax(axis=1), 0)
        hi = np.where(any_in, m - inl[:, ::-1].argmax(axis=1), 0)
        return f, lo, hi

    cf, clo, chi = evaluate(cx)
    fmin = cf.min()
    tol = tie_tol * max(1.0, fmin)
    near = np.flatnonzero(cf <= fmin + tol)
    pairs, first = np.unique(np.stack([clo[near], chi[near]], axis=1), axis=0, return_index=True)
    # keep candidate order so that empty windows fall back to the first seen x
    order = np.argsort(first)
    pairs, first = pairs[order], first[order]
    gx = np.array([
        (w[lo:hi] * v[lo:hi]).sum() / w[lo:hi].sum() if hi > lo else cx[near[f0]]
        for (lo, hi), f0 in zip(pairs, first)
    ])
    gf, glo, ghi = evaluate(gx)
    ok = gf <= fmin + tol
    cnt = ghi - glo
    cand = np.flatnonzero(ok)
    b = cand[np.lexsort((gx[cand], -cnt[cand]))[0]]
    best_x = gx[b]
    scale = 1e-12 * max(1.0, abs(best_x), eta)
    tie = bool(np.any(ok & (np.abs(gx - best_x) > scale)))
    return float(best_x), float(gf[b]), int(glo[b]), int(ghi[b]), tie


if HAVE_NUMBA:
    _fresh_gradient = jit(_fresh_gradient_loop)
    _axpy = jit(_axpy_loop)
    _dot = jit(_dot_loop)
    _kkt_gram = jit(_kkt_gram)
    _objective_gram = jit(_objective_gram)
    _sweep_gram = jit(_sweep_gram)
    _cd_gram = jit(_cd_gram_py)
    _resid_gradient = jit(_resid_gradient)
    cd_resid = jit(_cd_resid_py)
    _nodewise_one = jit(_nodewise_one)
    nodewise_all = jit(_nodewise_all_py)
    _eval_f = jit(_eval_f)
    _window_mean = jit(_window_mean)
    redescending = jit(_redescending_py)
else:
    _fresh_gradient = _fresh_gradient_np
    _axpy = _axpy_np
    _dot = _dot_np
    _cd_gram = _cd_gram_py
    cd_resid = _cd_resid_py
    nodewise_all = _nodewise_all_py
    redescending = _redescending_numpy

cd_gram = _cd_gram
