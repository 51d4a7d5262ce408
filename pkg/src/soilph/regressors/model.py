"""Fitted-model container, prediction and JSON serialization."""
from __future__ import annotations

import json
import os
from dataclasses import dataclass, field

import numpy as np

from ..errors import ModelFormatError, SchemaError
from ..kernels import predict_tree
from .params import make_params, normalize_kind, params_to_dict

FORMAT_TAG = "soilph-model"
FORMAT_VERSION = 1


@dataclass(frozen=True)
class Standardizer:
    mean: np.ndarray
    scale: np.ndarray

    @classmethod
    def fit(cls, x: np.ndarray) -> "Standardizer":
        mean = x.mean(axis=0)
        sd = x.std(axis=0)
        # constant columns are left centered at zero
        sd = np.where(sd > 0, sd, 1.0)
        return cls(mean, sd)

    def transform(self, x: np.ndarray) -> np.ndarray:
        return (x - self.mean) / self.scale


@dataclass
class Tree:
    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    n_samples: np.ndarray

    @classmethod
    def from_arrays(cls, arrays) -> "Tree":
        return cls(*arrays)

    def predict(self, x: np.ndarray) -> np.ndarray:
        return predict_tree(x, self.feature, self.threshold, self.left, self.right, self.value)

    @property
    def depth(self) -> int:
        depth = np.zeros(self.feature.size, dtype=np.int64)
        for node in range(self.feature.size):  # preorder: parents come first
            if self.feature[node] >= 0:
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def to_dict(self) -> dict:
        return {k: getattr(self, k).tolist() for k in
                ("feature", "threshold", "left", "right", "value", "n_samples")}

    @classmethod
    def from_dict(cls, d: dict) -> "Tree":
        ints = ("feature", "left", "right", "n_samples")
        return cls(*(np.asarray(d[k], dtype=np.int64 if k in ints else np.float64)
                     for k in ("feature", "threshold", "left", "right", "value", "n_samples")))


@dataclass
class RegressionModel:
    kind: str
    hyperparameters: object
    feature_names: list[str]
    params: dict
    standardizer: Standardizer | None = None
    converged: bool = True
    info: dict = field(default_factory=dict)
    metadata: dict = field(default_factory=dict)

    def predict(self, x) -> np.ndarray:
        return predict(self, x)


def _as_matrix(model: RegressionModel, x) -> np.ndarray:
    names = getattr(x, "column_names", None)
    if names is not None:
        if list(names) != list(model.feature_names):
            diff = [c for c in names if c not in model.feature_names] or \
                   [c for c in model.feature_names if c not in names]
            raise SchemaError(f"feature columns do not match model (e.g. {diff[:1]})",
                              code="schema_mismatch")
        x = x.x
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 1 and x.size == 0:
        x = x.reshape(0, len(model.feature_names))
    if x.ndim != 2 or x.shape[1] != len(model.feature_names):
        raise SchemaError(f"expected {len(model.feature_names)} feature columns, got "
                          f"{x.shape[1] if x.ndim == 2 else x.shape}", code="schema_mismatch")
    return x


def rbf_kernel(a: np.ndarray, b: np.ndarray, gamma: float) -> np.ndarray:
    sq = (a * a).sum(1)[:, None] + (b * b).sum(1)[None, :] - 2.0 * a @ b.T
    return np.exp(-gamma * np.maximum(sq, 0.0))


def svr_kernel(a, b, kernel, gamma):
    return rbf_kernel(a, b, gamma) if kernel == "rbf" else a @ b.T


def predict(model: RegressionModel, x) -> np.ndarray:
    """Predictions for the rows of ``x`` (array or DesignMatrix)."""
    x = _as_matrix(model, x)
    if x.shape[0] == 0:
        return np.empty(0)
    if model.standardizer is not None:
        x = model.standardizer.transform(x)
    p = model.params
    kind = model.kind
    if kind in ("LR", "LASSO"):
        return x @ p["coef"] + p["intercept"]
    if kind == "DTR":
        return p["tree"].predict(x)
    if kind == "RF":
        acc = np.zeros(x.shape[0])
        for t in p["trees"]:
            acc += t.predict(x)
        return acc / len(p["trees"])
    if kind == "GBRT":
        acc = np.full(x.shape[0], p["init"])
        for t in p["trees"]:
            acc += p["learning_rate"] * t.predict(x)
        return acc
    if kind == "SVR":
        if p["dual_coef"].size == 0:
            return np.full(x.shape[0], -p["rho"])
        k = svr_kernel(x, p["support_vectors"], p["kernel"], p["gamma"])
        return k @ p["dual_coef"] - p["rho"]
    raise ModelFormatError(f"unknown model kind {kind!r}")


# ---------------------------------------------------------------------------
# serialization


def _params_to_json(kind, p):
    if kind in ("LR", "LASSO"):
        return {"coef": p["coef"].tolist(), "intercept": float(p["intercept"])}
    if kind == "DTR":
        return {"tree": p["tree"].to_dict()}
    if kind == "RF":
        return {"trees": [t.to_dict() for t in p["trees"]]}
    if kind == "GBRT":
        return {"init": float(p["init"]), "learning_rate": float(p["learning_rate"]),
                "trees": [t.to_dict() for t in p["trees"]]}
    return {"support_vectors": p["support_vectors"].tolist(),
            "dual_coef": p["dual_coef"].tolist(), "rho": float(p["rho"]),
            "gamma": float(p["gamma"]), "kernel": p["kernel"]}


def _params_from_json(kind, d, n_features):
    if kind in ("LR", "LASSO"):
        return {"coef": np.asarray(d["coef"], dtype=np.float64), "intercept": float(d["intercept"])}
    if kind == "DTR":
        return {"tree": Tree.from_dict(d["tree"])}
    if kind == "RF":
        return {"trees": [Tree.from_dict(t) for t in d["trees"]]}
    if kind == "GBRT":
        return {"init": float(d["init"]), "learning_rate": float(d["learning_rate"]),
                "trees": [Tree.from_dict(t) for t in d["trees"]]}
    sv = np.asarray(d["support_vectors"], dtype=np.float64).reshape(-1, n_features)
    return {"support_vectors": sv, "dual_coef": np.asarray(d["dual_coef"], dtype=np.float64),
            "rho": float(d["rho"]), "gamma": float(d["gamma"]), "kernel": d["kernel"]}


def model_to_dict(model: RegressionModel) -> dict:
    std = None
    if model.standardizer is not None:
        std = {"mean": model.standardizer.mean.tolist(), "scale": model.standardizer.scale.tolist()}
    return {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "kind": model.kind,
        "hyperparameters": params_to_dict(model.hyperparameters),
        "feature_names": list(model.feature_names),
        "standardizer": std,
        "converged": bool(model.converged),
        "info": model.info,
        "metadata": model.metadata,
        "params": _params_to_json(model.kind, model.params),
    }


def model_from_dict(d: dict) -> RegressionModel:
    if d.get("format") != FORMAT_TAG:
        raise ModelFormatError("not a soilph model document")
    if d.get("version") != FORMAT_VERSION:
        raise ModelFormatError(f"unsupported model version {d.get('version')!r} "
                               f"(expected {FORMAT_VERSION})", code="model_version")
    kind = normalize_kind(d["kind"])
    names = list(d["feature_names"])
    std = d.get("standardizer")
    if std is not None:
        std = Standardizer(np.asarray(std["mean"], dtype=np.float64),
                           np.asarray(std["scale"], dtype=np.float64))
    return RegressionModel(kind, make_params(kind, d.get("hyperparameters")), names,
                           _params_from_json(kind, d["params"], len(names)), std,
                           bool(d.get("converged", True)), dict(d.get("info", {})),
                           dict(d.get("metadata", {})))


def dumps_model(model: RegressionModel) -> str:
    return json.dumps(model_to_dict(model), indent=1, sort_keys=True)


def loads_model(text: str) -> RegressionModel:
    try:
        d = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"model file is not valid JSON: {exc}") from None
    return model_from_dict(d)


def save_model(model: RegressionModel, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_model(model))
        fh.write("\n")


def load_model(path: str | os.PathLike) -> RegressionModel:
    with open(path, encoding="utf-8") as fh:
        return loads_model(fh.read())
