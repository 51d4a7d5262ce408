"""Decision tree, random forest and gradient-boosted trees."""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

from ..kernels import grow_tree
from .linear import _check_xy
from .model import RegressionModel, Tree
from .params import ForestParams, GBRTParams, TreeParams


def default_workers() -> int:
    """Worker count from ``SOILPH_WORKERS`` (default: CPU count)."""
    env = os.environ.get("SOILPH_WORKERS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def _names(feature_names, p):
    return list(feature_names) if feature_names is not None else [f"x{i}" for i in range(p)]


def _depth(d):
    return -1 if d is None else d


def fit_tree(x, y, hp: TreeParams | None = None, feature_names=None) -> RegressionModel:
    """CART regression tree (best variance-reduction split, midpoint thresholds)."""
    hp = hp or TreeParams()
    x, y = _check_xy(x, y)
    tree = Tree.from_arrays(grow_tree(x, y, _depth(hp.max_depth), hp.min_samples_split,
                                      hp.min_samples_leaf))
    return RegressionModel("DTR", hp, _names(feature_names, x.shape[1]), {"tree": tree})


def _forest_member(x, y, hp: ForestParams, t: int, n_feat: int) -> Tree:
    rng = np.random.default_rng([hp.seed, t])
    n, p = x.shape
    rows = rng.integers(0, n, size=n) if hp.bootstrap else np.arange(n)
    keys = rng.random((2 * n + 1, p)) if n_feat < p else None
    return Tree.from_arrays(grow_tree(x[rows], y[rows], _depth(hp.max_depth),
                                      hp.min_samples_split, hp.min_samples_leaf,
                                      n_feat, keys))


def fit_random_forest(x, y, hp: ForestParams | None = None, feature_names=None,
                      workers: int | None = None) -> RegressionModel:
    """Bagged CART trees; tree ``t`` draws its randomness from ``(seed, t)``,
    so the forest does not depend on the worker count."""
    hp = hp or ForestParams()
    x, y = _check_xy(x, y)
    p = x.shape[1]
    n_feat = min(p, max(1, math.ceil(hp.max_features * p)))
    workers = default_workers() if workers is None else workers
    if workers > 1 and hp.n_trees > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            trees = list(pool.map(lambda t: _forest_member(x, y, hp, t, n_feat), range(hp.n_trees)))
    else:
        trees = [_forest_member(x, y, hp, t, n_feat) for t in range(hp.n_trees)]
    return RegressionModel("RF", hp, _names(feature_names, p), {"trees": trees})


def fit_gbrt(x, y, hp: GBRTParams | None = None, feature_names=None) -> RegressionModel:
    """Least-squares gradient boosting: each stage fits a depth-limited tree
    to the current residuals and is added with the learning rate.

    ``info["train_mse"]`` holds the training MSE after each stage (entry 0
    is the constant initial model).
    """
    hp = hp or GBRTParams()
    x, y = _check_xy(x, y)
    init = float(y.mean())
    f = np.full(y.shape[0], init)
    mse = [float(np.mean((y - f) ** 2))]
    trees = []
    for _ in range(hp.n_stages):
        tree = Tree.from_arrays(grow_tree(x, y - f, _depth(hp.max_depth),
                                          hp.min_samples_split, hp.min_samples_leaf))
        f = f + hp.learning_rate * tree.predict(x)
        trees.append(tree)
        mse.append(float(np.mean((y - f) ** 2)))
    return RegressionModel("GBRT", hp, _names(feature_names, x.shape[1]),
                           {"init": init, "learning_rate": float(hp.learning_rate), "trees": trees},
                           info={"train_mse": mse})
