"""Cyclic coordinate descent for the L1-penalised least-squares problem

    min_b  (1 / 2n) * ||y - X b||^2 + alpha * ||b||_1

on a centered response (no intercept inside the solver).
"""
import numpy as np

from .._accel import USE_NUMBA, njit


@njit
def _cd_nb(X, y, alpha, tol, max_iter):
    n, p = X.shape
    beta = np.zeros(p)
    r = y.copy()
    col_sq = np.zeros(p)
    for j in range(p):
        s = 0.0
        for i in range(n):
            s += X[i, j] * X[i, j]
        col_sq[j] = s / n
    n_iter = 0
    converged = False
    for it in range(max_iter):
        n_iter = it + 1
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            g = 0.0
            for i in range(n):
                g += X[i, j] * r[i]
            rho = g / n + col_sq[j] * beta[j]
            if rho > alpha:
                new = (rho - alpha) / col_sq[j]
            elif rho < -alpha:
                new = (rho + alpha) / col_sq[j]
            else:
                new = 0.0
            d = new - beta[j]
            if d != 0.0:
                for i in range(n):
                    r[i] -= d * X[i, j]
                beta[j] = new
                if abs(d) > max_change:
                    max_change = abs(d)
        if max_change < tol:
            converged = True
            break
    return beta, n_iter, converged


def _cd_np(X, y, alpha, tol, max_iter):
    n, p = X.shape
    beta = np.zeros(p)
    r = y.copy()
    col_sq = (X * X).sum(axis=0) / n
    n_iter, converged = 0, False
    for it in range(max_iter):
        n_iter = it + 1
        max_change = 0.0
        for j in range(p):
            if col_sq[j] == 0.0:
                continue
            rho = X[:, j] @ r / n + col_sq[j] * beta[j]
            new = np.sign(rho) * max(abs(rho) - alpha, 0.0) / col_sq[j]
            d = new - beta[j]
            if d != 0.0:
                r -= d * X[:, j]
                beta[j] = new
                max_change = max(max_change, abs(d))
        if max_change < tol:
            converged = True
            break
    return beta, n_iter, converged


def lasso_cd(X, y, alpha, tol=1e-7, max_iter=100000, use_numba=None):
    """Return ``(beta, n_iter, converged)``.

    Stops once a full sweep moves no coefficient by ``tol`` or more.
    """
    X = np.asfortranarray(X, dtype=np.float64)
    y = np.ascontiguousarray(y, dtype=np.float64)
    use_numba = USE_NUMBA if use_numba is None else use_numba
    fn = _cd_nb if use_numba else _cd_np
    beta, n_iter, converged = fn(X, y, float(alpha), float(tol), int(max_iter))
    return beta, int(n_iter), bool(converged)
