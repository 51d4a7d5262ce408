"""Hyperparameters for each regressor kind, validated at construction."""
from __future__ import annotations

from dataclasses import asdict, dataclass, fields

from ..errors import ConfigError

KINDS = ("LR", "LASSO", "DTR", "RF", "GBRT", "SVR")


def _need(cond: bool, msg: str):
    if not cond:
        raise ConfigError(msg, code="hyperparameter")


def _depth_ok(d):
    return d is None or (isinstance(d, int) and d >= 0)


@dataclass(frozen=True)
class OLSParams:
    pass


@dataclass(frozen=True)
class LassoParams:
    alpha: float = 1.0
    tol: float = 1e-7
    max_iter: int = 100_000

    def __post_init__(self):
        _need(self.alpha >= 0, "LASSO alpha must be >= 0")
        _need(self.tol > 0, "LASSO tol must be > 0")
        _need(self.max_iter >= 1, "LASSO max_iter must be >= 1")


@dataclass(frozen=True)
class TreeParams:
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        _need(_depth_ok(self.max_depth), "max_depth must be None or a nonnegative int")
        _need(self.min_samples_split >= 2, "min_samples_split must be >= 2")
        _need(self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class ForestParams:
    n_trees: int = 100
    max_features: float = 1.0
    bootstrap: bool = True
    seed: int = 0
    max_depth: int | None = None
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        _need(self.n_trees >= 1, "n_trees must be >= 1")
        _need(0 < self.max_features <= 1, "max_features must be in (0, 1]")
        _need(_depth_ok(self.max_depth), "max_depth must be None or a nonnegative int")
        _need(self.min_samples_split >= 2, "min_samples_split must be >= 2")
        _need(self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class GBRTParams:
    n_stages: int = 100
    learning_rate: float = 0.1
    max_depth: int | None = 3
    min_samples_split: int = 2
    min_samples_leaf: int = 1

    def __post_init__(self):
        _need(self.n_stages >= 0, "n_stages must be >= 0")
        _need(0 < self.learning_rate <= 1, "learning_rate must be in (0, 1]")
        _need(_depth_ok(self.max_depth), "max_depth must be None or a nonnegative int")
        _need(self.min_samples_split >= 2, "min_samples_split must be >= 2")
        _need(self.min_samples_leaf >= 1, "min_samples_leaf must be >= 1")


@dataclass(frozen=True)
class SVRParams:
    C: float = 1.0
    epsilon: float = 0.1
    kernel: str = "rbf"
    gamma: float | None = None  # None: 1 / (p * var(X)) on standardized X
    tol: float = 1e-3
    max_iter: int = 1_000_000

    def __post_init__(self):
        _need(self.C > 0, "SVR C must be > 0")
        _need(self.epsilon >= 0, "SVR epsilon must be >= 0")
        _need(self.kernel in ("rbf", "linear"), "SVR kernel must be 'rbf' or 'linear'")
        _need(self.gamma is None or self.gamma > 0, "SVR gamma must be > 0")
        _need(self.tol > 0, "SVR tol must be > 0")
        _need(self.max_iter >= 1, "SVR max_iter must be >= 1")


PARAM_TYPES = {
    "LR": OLSParams,
    "LASSO": LassoParams,
    "DTR": TreeParams,
    "RF": ForestParams,
    "GBRT": GBRTParams,
    "SVR": SVRParams,
}


def normalize_kind(kind: str) -> str:
    k = str(kind).strip().upper()
    if k == "OLS":
        k = "LR"
    if k not in KINDS:
        raise ConfigError(f"unknown model kind {kind!r}; expected one of {', '.join(KINDS)}",
                          code="model_kind")
    return k


def make_params(kind: str, values: dict | None = None):
    """Hyperparameter object for ``kind``, overriding defaults with ``values``."""
    cls = PARAM_TYPES[normalize_kind(kind)]
    values = dict(values or {})
    known = {f.name for f in fields(cls)}
    extra = set(values) - known
    if extra:
        raise ConfigError(f"unknown {kind} hyperparameter(s): {sorted(extra)}", code="hyperparameter")
    try:
        return cls(**values)
    except TypeError as exc:
        raise ConfigError(str(exc), code="hyperparameter") from None


def params_to_dict(params) -> dict:
    return asdict(params)
