"""SMO solver for the epsilon-SVR dual.

The dual is written over ``2n`` variables ``a = [alpha, alpha_star]`` with
signs ``s = [+1]*n + [-1]*n``:

    min_a  1/2 a^T Q a + p^T a,   Q_tu = s_t s_u K(t mod n, u mod n)
    s.t.   0 <= a <= C,  s^T a = 0,
    p = [eps - y, eps + y]

Working pairs are chosen with second-order information; the solver stops
when the maximal KKT violation drops below ``tol``.  Predictions are
``sum((alpha - alpha_star) * K(x_i, x)) - rho``.
"""
import numpy as np

from .._accel import USE_NUMBA, njit

TAU = 1e-12


@njit
def _rho_nb(a, G, sgn, C):
    ub = np.inf
    lb = -np.inf
    n_free = 0
    s_free = 0.0
    for t in range(a.shape[0]):
        yg = sgn[t] * G[t]
        if a[t] >= C:
            if sgn[t] < 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        elif a[t] <= 0.0:
            if sgn[t] > 0:
                ub = min(ub, yg)
            else:
                lb = max(lb, yg)
        else:
            n_free += 1
            s_free += yg
    if n_free > 0:
        return s_free / n_free
    return (ub + lb) / 2.0


@njit
def _smo_nb(K, y, C, eps, tol, max_iter):
    n = y.shape[0]
    m = 2 * n
    a = np.zeros(m)
    sgn = np.ones(m)
    G = np.empty(m)
    for t in range(n):
        sgn[n + t] = -1.0
        G[t] = eps - y[t]
        G[n + t] = eps + y[t]
    n_iter = 0
    converged = False
    while n_iter < max_iter:
        # first index: maximal violator in the "up" set
        g_max = -np.inf
        i = -1
        for t in range(m):
            if sgn[t] > 0:
                if a[t] < C and -G[t] >= g_max:
                    g_max = -G[t]
                    i = t
            else:
                if a[t] > 0 and G[t] >= g_max:
                    g_max = G[t]
                    i = t
        ki = i % n if i >= 0 else 0
        g_max2 = -np.inf
        j = -1
        obj_min = np.inf
        for t in range(m):
            kt = t % n
            if sgn[t] > 0:
                if a[t] > 0:
                    diff = g_max + G[t]
                    if G[t] >= g_max2:
                        g_max2 = G[t]
                    if diff > 0 and i >= 0:
                        quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                        if quad <= 0:
                            quad = TAU
                        obj = -(diff * diff) / quad
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
            else:
                if a[t] < C:
                    diff = g_max - G[t]
                    if -G[t] >= g_max2:
                        g_max2 = -G[t]
                    if diff > 0 and i >= 0:
                        quad = K[ki, ki] + K[kt, kt] - 2.0 * K[ki, kt]
                        if quad <= 0:
                            quad = TAU
                        obj = -(diff * diff) / quad
                        if obj <= obj_min:
                            obj_min = obj
                            j = t
        if g_max + g_max2 < tol or j < 0:
            converged = True
            break
        n_iter += 1
        kj = j % n
        quad = K[ki, ki] + K[kj, kj] - 2.0 * K[ki, kj]
        if quad <= 0:
            quad = TAU
        ai_old = a[i]
        aj_old = a[j]
        if sgn[i] != sgn[j]:
            delta = (-G[i] - G[j]) / quad
            diff = a[i] - a[j]
            a[i] += delta
            a[j] += delta
            if diff > 0:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = diff
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = -diff
            if diff > 0:
                if a[i] > C:
                    a[i] = C
                    a[j] = C - diff
            else:
                if a[j] > C:
                    a[j] = C
                    a[i] = C + diff
        else:
            delta = (G[i] - G[j]) / quad
            total = a[i] + a[j]
            a[i] -= delta
            a[j] += delta
            if total > C:
                if a[i] > C:
                    a[i] = C
                    a[j] = total - C
            else:
                if a[j] < 0:
                    a[j] = 0.0
                    a[i] = total
            if total > C:
                if a[j] > C:
                    a[j] = C
                    a[i] = total - C
            else:
                if a[i] < 0:
                    a[i] = 0.0
                    a[j] = total
        di = (a[i] - ai_old) * sgn[i]
        dj = (a[j] - aj_old) * sgn[j]
        for t in range(m):
            kt = t % n
            G[t] += sgn[t] * (K[ki, kt] * di + K[kj, kt] * dj)
    rho = _rho_nb(a, G, sgn, C)
    return a, G, rho, n_iter, converged


def _rho_np(a, G, sgn, C):
    yg = sgn * G
    at_ub = a >= C
    at_lb = a <= 0.0
    free = ~(at_ub | at_lb)
    if free.any():
        return float(yg[free].sum() / free.sum())
    pos = sgn > 0
    ub = yg[(at_ub & ~pos) | (at_lb & pos)]
    lb = yg[(at_ub & pos) | (at_lb & ~pos)]
    ub = ub.min() if ub.size else np.inf
    lb = lb.max() if lb.size else -np.inf
    return float((ub + lb) / 2.0)


def _last_argmax(v):
    return v.size - 1 - int(np.argmax(v[::-1]))


def _smo_np(K, y, C, eps, tol, max_iter):
    n = y.size
    m = 2 * n
    a = np.zeros(m)
    sgn = np.concatenate([np.ones(n), -np.ones(n)])
    G = np.concatenate([eps - y, eps + y])
    kidx = np.arange(m) % n
    Kdiag = np.diag(K)[kidx]
    n_iter, converged = 0, False
    while n_iter < max_iter:
        pos = sgn > 0
        up = np.where(pos, a < C, a > 0)
        low = np.where(pos, a > 0, a < C)
        score_up = np.where(up, -sgn * G, -np.inf)
        i = _last_argmax(score_up)
        g_max = score_up[i]
        score_low = np.where(low, sgn * G, -np.inf)
        g_max2 = score_low.max()
        if g_max + g_max2 < tol or not np.isfinite(g_max):
            converged = True
            break
        ki = kidx[i]
        diff = g_max + sgn * G
        quad = K[ki, ki] + Kdiag - 2.0 * K[ki, kidx]
        quad = np.where(quad <= 0, TAU, quad)
        obj = np.where(low & (diff > 0), -(diff * diff) / quad, np.inf)
        if not np.isfinite(obj).any():
            converged = True
            break
        j = _last_argmax(-obj)
        n_iter += 1
        kj = kidx[j]
        q = K[ki, ki] + K[kj, kj] - 2.0 * K[ki, kj]
        q = TAU if q <= 0 else q
        ai_old, aj_old = a[i], a[j]
        ai, aj = ai_old, aj_old
        if sgn[i] != sgn[j]:
            delta = (-G[i] - G[j]) / q
            d = ai - aj
            ai += delta
            aj += delta
            if d > 0:
                if aj < 0:
                    aj, ai = 0.0, d
            elif ai < 0:
                ai, aj = 0.0, -d
            if d > 0:
                if ai > C:
                    ai, aj = C, C - d
            elif aj > C:
                aj, ai = C, C + d
        else:
            delta = (G[i] - G[j]) / q
            total = ai + aj
            ai -= delta
            aj += delta
            if total > C:
                if ai > C:
                    ai, aj = C, total - C
            elif aj < 0:
                aj, ai = 0.0, total
            if total > C:
                if aj > C:
                    aj, ai = C, total - C
            elif ai < 0:
                ai, aj = 0.0, total
        a[i], a[j] = ai, aj
        di = (ai - ai_old) * sgn[i]
        dj = (aj - aj_old) * sgn[j]
        G += sgn * (K[ki, kidx] * di + K[kj, kidx] * dj)
    return a, G, _rho_np(a, G, sgn, C), n_iter, converged


def kkt_violation(a, G, C):
    """Maximal pairwise KKT violation of a dual point (0 at the optimum)."""
    n = a.size // 2
    sgn = np.concatenate([np.ones(n), -np.ones(n)])
    pos = sgn > 0
    up = np.where(pos, a < C, a > 0)
    low = np.where(pos, a > 0, a < C)
    g_up = np.max(np.where(up, -sgn * G, -np.inf))
    g_low = np.max(np.where(low, sgn * G, -np.inf))
    return float(g_up + g_low)


def smo_svr(K, y, C, eps, tol=1e-3, max_iter=1_000_000, use_numba=None):
    """Solve the epsilon-SVR dual for a precomputed kernel matrix.

    Returns ``(coef, rho, n_iter, converged, a, G)`` where
    ``coef = alpha - alpha_star``.
    """
    K = np.ascontiguousarray(K, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    fn = _smo_nb if use_numba else _smo_np
    a, G, rho, n_iter, converged = fn(K, y, float(C), float(eps), float(tol), int(max_iter))
    n = y.size
    return a[:n] - a[n:], float(rho), int(n_iter), bool(converged), a, G
