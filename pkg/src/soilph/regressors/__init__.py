"""Six regressors behind one fit/predict contract."""
from __future__ import annotations

from .linear import fit_lasso, fit_ols
from .model import (RegressionModel, Standardizer, Tree, dumps_model, load_model, loads_model,
                    model_from_dict, model_to_dict, predict, save_model)
from .params import KINDS, make_params, normalize_kind
from .svr import fit_svr
from .trees import fit_gbrt, fit_random_forest, fit_tree

FITTERS = {
    "LR": fit_ols,
    "LASSO": fit_lasso,
    "DTR": fit_tree,
    "RF": fit_random_forest,
    "GBRT": fit_gbrt,
    "SVR": fit_svr,
}


def fit(kind: str, x, y=None, hp=None, feature_names=None) -> RegressionModel:
    """Fit ``kind`` on arrays, or on a DesignMatrix passed as ``x``.

    ``hp`` may be a params object or a dict of overrides.
    """
    kind = normalize_kind(kind)
    if hasattr(x, "column_names"):
        feature_names = x.column_names if feature_names is None else feature_names
        x, y = x.x, x.y if y is None else y
    if hp is None or isinstance(hp, dict):
        hp = make_params(kind, hp)
    return FITTERS[kind](x, y, hp, feature_names)


__all__ = [
    "KINDS", "FITTERS", "RegressionModel", "Standardizer", "Tree", "fit", "predict",
    "fit_ols", "fit_lasso", "fit_tree", "fit_random_forest", "fit_gbrt", "fit_svr",
    "make_params", "normalize_kind", "dumps_model", "loads_model", "save_model",
    "load_model", "model_to_dict", "model_from_dict",
]
