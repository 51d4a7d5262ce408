"""Ordinary least squares and LASSO."""
from __future__ import annotations

import warnings

import numpy as np

from ..errors import DataError
from ..kernels import lasso_cd
from .model import RegressionModel, Standardizer
from .params import LassoParams, OLSParams


def _check_xy(x, y):
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.ndim != 2 or y.ndim != 1 or x.shape[0] != y.shape[0]:
        raise DataError("x must be (n, p) and y length n", code="shape")
    if not (np.isfinite(x).all() and np.isfinite(y).all()):
        raise DataError("non-finite values in training data", code="non_finite")
    return x, y


def fit_ols(x, y, hp: OLSParams | None = None, feature_names=None) -> RegressionModel:
    """Least squares with intercept via SVD on centered data.

    Rank-deficient designs get the minimum-norm slope vector.
    """
    x, y = _check_xy(x, y)
    n, p = x.shape
    if n < 2:
        raise DataError("OLS needs at least 2 rows", code="insufficient_data")
    xm = x.mean(axis=0)
    ym = y.mean()
    coef, *_ = np.linalg.lstsq(x - xm, y - ym, rcond=None)
    intercept = float(ym - xm @ coef)
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(p)]
    return RegressionModel("LR", hp or OLSParams(), names, {"coef": coef, "intercept": intercept})


def fit_lasso(x, y, hp: LassoParams | None = None, feature_names=None) -> RegressionModel:
    """L1-penalised least squares by cyclic coordinate descent.

    Features are standardized (population sd) inside the model; the
    intercept is the training mean of ``y`` and is not penalised.  When
    ``alpha`` reaches ``max_j |x_j^T y_c| / n`` the zero vector satisfies the
    optimality conditions and is returned without iterating.
    """
    hp = hp or LassoParams()
    x, y = _check_xy(x, y)
    n, p = x.shape
    if n < 2:
        raise DataError("LASSO needs at least 2 rows", code="insufficient_data")
    std = Standardizer.fit(x)
    xs = std.transform(x)
    ym = float(y.mean())
    yc = y - ym
    null_alpha = float(np.abs(xs.T @ yc).max()) / n if p else 0.0
    if hp.alpha >= null_alpha:
        beta, n_iter, converged = np.zeros(p), 0, True
    else:
        beta, n_iter, converged = lasso_cd(xs, yc, hp.alpha, hp.tol, hp.max_iter)
    if not converged:
        warnings.warn(f"LASSO did not converge in {hp.max_iter} sweeps", RuntimeWarning)
    names = list(feature_names) if feature_names is not None else [f"x{i}" for i in range(p)]
    return RegressionModel("LASSO", hp, names, {"coef": beta, "intercept": ym}, std,
                           converged, {"n_iter": n_iter})
