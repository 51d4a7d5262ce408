"""Epsilon-insensitive support vector regression."""
from __future__ import annotations

import warnings

import numpy as np

from ..kernels import smo_svr
from .linear import _check_xy
from .model import RegressionModel, Standardizer, svr_kernel
from .params import SVRParams


def default_gamma(xs: np.ndarray) -> float:
    var = float(xs.var())
    return 1.0 / (xs.shape[1] * var) if var > 0 else 1.0


def fit_svr(x, y, hp: SVRParams | None = None, feature_names=None) -> RegressionModel:
    """Kernel SVR solved in the dual by SMO on standardized features."""
    hp = hp or SVRParams()
    x, y = _check_xy(x, y)
    n, p = x.shape
    std = Standardizer.fit(x)
    xs = std.transform(x)
    gamma = hp.gamma if hp.gamma is not None else default_gamma(xs)
    K = svr_kernel(xs, xs, hp.kernel, gamma)
    coef, rho, n_iter, converged, a, G = smo_svr(K, y, hp.C, hp.epsilon, hp.tol, hp.max_iter)
    if not converged:
        warnings.warn(f"SVR did not converge in {hp.max_iter} iterations", RuntimeWarning)
    sv = np.flatnonzero(coef != 0.0)
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(p)]
    return RegressionModel(
        "SVR", hp, names,
        {"support_vectors": xs[sv].copy(), "dual_coef": coef[sv].copy(), "rho": rho,
         "gamma": float(gamma), "kernel": hp.kernel},
        std, converged, {"n_iter": n_iter, "n_support": int(sv.size)},
    )


def svr_dual_state(x, y, hp: SVRParams | None = None):
    """Raw dual solution ``(K, a, G, rho)`` on the standardized training data,
    for auditing the optimizer."""
    hp = hp or SVRParams()
    x, y = _check_xy(x, y)
    xs = Standardizer.fit(x).transform(x)
    gamma = hp.gamma if hp.gamma is not None else default_gamma(xs)
    K = svr_kernel(xs, xs, hp.kernel, gamma)
    _, rho, _, _, a, G = smo_svr(K, y, hp.C, hp.epsilon, hp.tol, hp.max_iter)
    return K, a, G, rho
