"""Metrics, cross-validation and the three-design experiment runner.

Designs:

A  per-radius ``CropName+Min/Max/Avg<r>`` plus a location-only baseline
   ``Long/Lat/CropName``, every model kind
B  feature ablation at one radius (default 400 m), rows restricted to
   fields with neighbors at that radius
C  cumulative stacking of ``Nb/Dist/Avg<r>`` blocks over increasing radii,
   rows fixed to the fields with neighbors at the smallest stacked radius
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
import platform
import time
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np

from . import __version__
from ._accel import backend
from .errors import ConfigError, DataError, SoilPHError
from .features import (Block, DesignMatrix, FeatureSpec, NeighborSummaryRow, build_design_matrix,
                       neighbor_summary_table, parse_feature_spec, radius_stats)
from .ingest import FieldDataset, parse_field_csv
from .regressors import KINDS, fit, make_params, normalize_kind, predict
from .spatial import build_index
from .synth import SynthConfig, generate_synthetic_fields

DEFAULT_RADII = (100.0, 200.0, 300.0, 400.0, 500.0, 750.0, 1000.0, 1500.0, 2000.0)
PAPER_SUBSET = ("LR", "SVR", "GBRT")


# ---------------------------------------------------------------------------
# metrics


@dataclass(frozen=True)
class MetricPair:
    r2: float
    mae: float


def _pair(y, yhat):
    y = np.asarray(y, dtype=np.float64)
    yhat = np.asarray(yhat, dtype=np.float64)
    if y.shape != yhat.shape or y.ndim != 1:
        raise DataError(f"length mismatch: {y.shape} vs {yhat.shape}", code="length_mismatch")
    if y.size == 0:
        raise DataError("metrics need at least one value", code="empty")
    return y, yhat


def r2_score(y, yhat) -> float:
    """Coefficient of determination ``1 - SS_res / SS_tot``."""
    y, yhat = _pair(y, yhat)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    if ss_tot == 0.0:
        raise DataError("R^2 is undefined for a constant target", code="degenerate_target")
    return 1.0 - float(np.sum((y - yhat) ** 2)) / ss_tot


def mae(y, yhat) -> float:
    y, yhat = _pair(y, yhat)
    return float(np.mean(np.abs(y - yhat)))


# ---------------------------------------------------------------------------
# splitting


def kfold_indices(n: int, k: int, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """Seeded shuffle, then ``k`` contiguous folds (sizes differ by at most 1)."""
    if k < 2:
        raise ConfigError("k must be >= 2", code="protocol")
    if k > n:
        raise DataError(f"k={k} folds need at least {k} rows, have {n}", code="too_few_rows")
    perm = np.random.default_rng(seed).permutation(n)
    folds = np.array_split(perm, k)
    out = []
    for i, test in enumerate(folds):
        train = np.concatenate([f for j, f in enumerate(folds) if j != i])
        out.append((np.sort(train), np.sort(test)))
    return out


def holdout_indices(n: int, fraction: float, seed: int) -> list[tuple[np.ndarray, np.ndarray]]:
    """One split; ``fraction`` of the rows go to the test side."""
    if not 0 < fraction < 1:
        raise ConfigError("holdout fraction must be in (0, 1)", code="protocol")
    perm = np.random.default_rng(seed).permutation(n)
    n_test = min(n - 1, max(1, int(round(fraction * n))))
    return [(np.sort(perm[n_test:]), np.sort(perm[:n_test]))]


@dataclass(frozen=True)
class Protocol:
    kind: str = "kfold"
    k: int = 5
    fraction: float = 0.2
    seed: int = 42

    def __post_init__(self):
        if self.kind not in ("kfold", "holdout"):
            raise ConfigError(f"unknown protocol {self.kind!r}", code="protocol")
        if self.kind == "kfold" and self.k < 2:
            raise ConfigError("k must be >= 2", code="protocol")
        if self.kind == "holdout" and not 0 < self.fraction < 1:
            raise ConfigError("holdout fraction must be in (0, 1)", code="protocol")

    def splits(self, n: int):
        if self.kind == "kfold":
            return kfold_indices(n, self.k, self.seed)
        return holdout_indices(n, self.fraction, self.seed)

    @property
    def label(self) -> str:
        if self.kind == "kfold":
            return f"{self.k}-fold CV, seed {self.seed}"
        return f"holdout {self.fraction:g}, seed {self.seed}"


@dataclass
class CVResult:
    folds: list[MetricPair]
    aggregate: MetricPair
    seconds: float = 0.0


def _with_seed(kind: str, hp: dict | None, seed: int) -> dict:
    hp = dict(hp or {})
    if kind == "RF":
        hp.setdefault("seed", seed)
    return hp


def _fit_eval(dm: DesignMatrix, kind: str, hp: dict, train, test) -> MetricPair:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        model = fit(kind, dm.x[train], dm.y[train], hp, dm.column_names)
    pred = predict(model, dm.x[test])
    return MetricPair(r2_score(dm.y[test], pred), mae(dm.y[test], pred))


def _aggregate(folds: Sequence[MetricPair]) -> MetricPair:
    return MetricPair(float(np.mean([f.r2 for f in folds])), float(np.mean([f.mae for f in folds])))


def kfold_cv(dm: DesignMatrix, kind: str, k: int = 5, seed: int = 42,
             hp: dict | None = None) -> CVResult:
    """k-fold CV of one model kind; the aggregate is the unweighted fold mean."""
    return cross_validate(dm, kind, Protocol("kfold", k=k, seed=seed), hp)


def cross_validate(dm: DesignMatrix, kind: str, protocol: Protocol,
                   hp: dict | None = None) -> CVResult:
    kind = normalize_kind(kind)
    hp = _with_seed(kind, hp, protocol.seed)
    t0 = time.perf_counter()
    folds = [_fit_eval(dm, kind, hp, tr, te) for tr, te in protocol.splits(dm.x.shape[0])]
    return CVResult(folds, _aggregate(folds), time.perf_counter() - t0)


# ---------------------------------------------------------------------------
# experiment configuration


def design_a_specs(radii: Sequence[float], encoding: str = "onehot") -> list[FeatureSpec]:
    specs = [parse_feature_spec("Long/Lat/CropName", encoding)]
    specs += [parse_feature_spec(f"CropName+Min/Max/Avg{r:g}", encoding) for r in radii]
    return specs


def design_b_specs(radius: float = 400.0, encoding: str = "onehot") -> list[FeatureSpec]:
    r = f"{radius:g}"
    texts = [
        "Long/Lat/CropName",
        f"Long/Lat/CropName+Avg{r}",
        f"Nb/Dist/Avg{r}+CropName",
        f"Nb/Dist/Avg{r}+CropType",
        f"Nb/Dist/Max/Min/Avg{r}",
        f"Nb/Dist/Max/Min/Avg{r}+CropName",
        f"Nb/Dist/Max/Min/Avg{r}+CropName/CropType",
    ]
    return [parse_feature_spec(t, encoding, require_radii=(radius,)) for t in texts]


def design_c_specs(radii: Sequence[float], encoding: str = "onehot") -> list[FeatureSpec]:
    radii = sorted(float(r) for r in radii)
    base = [Block("Long"), Block("Lat"), Block("CropName")]
    specs = [FeatureSpec(tuple(base), encoding, (radii[0],))]
    blocks = list(base)
    for r in radii:
        blocks += [Block("Nb", r), Block("Dist", r), Block("Avg", r)]
        specs.append(FeatureSpec(tuple(blocks), encoding, (radii[0],)))
    return specs


def stacking_label(spec: FeatureSpec, first: bool) -> str:
    if first:
        return spec.label
    r = spec.blocks[-1].radius
    return f"+ Nb/Dist/Avg{r:g}"


@dataclass
class ExperimentConfig:
    data: str | None = None
    synthetic: dict | None = None
    radii: tuple[float, ...] = DEFAULT_RADII
    designs: tuple[str, ...] = ("A", "B", "C")
    models: dict[str, tuple[str, ...]] = field(default_factory=lambda: {
        "A": KINDS, "B": PAPER_SUBSET, "C": PAPER_SUBSET})
    hyperparameters: dict[str, dict] = field(default_factory=dict)
    protocol: Protocol = field(default_factory=Protocol)
    encoding: str = "onehot"
    ablation_radius: float = 400.0
    stacking_radii: tuple[float, ...] | None = None
    schema: dict[str, str] | None = None
    seed: int = 42

    def __post_init__(self):
        self.radii = tuple(sorted(float(r) for r in self.radii))
        if not self.radii or any(not r > 0 for r in self.radii):
            raise ConfigError("radii must be a nonempty list of positive meters", code="config")
        self.designs = tuple(str(d).upper() for d in self.designs)
        bad = set(self.designs) - {"A", "B", "C"}
        if bad:
            raise ConfigError(f"unknown design(s) {sorted(bad)}", code="config")
        self.models = {d: tuple(normalize_kind(k) for k in ks) for d, ks in self.models.items()}
        self.hyperparameters = {normalize_kind(k): dict(v) for k, v in self.hyperparameters.items()}
        for k, v in self.hyperparameters.items():
            make_params(k, _with_seed(k, v, self.seed))
        if self.data is None and self.synthetic is None:
            raise ConfigError("config needs 'data' or 'synthetic'", code="config")
        if self.encoding not in ("onehot", "ordinal"):
            raise ConfigError(f"unknown encoding {self.encoding!r}", code="config")
        if self.stacking_radii is not None:
            self.stacking_radii = tuple(sorted(float(r) for r in self.stacking_radii))

    @property
    def resolved_stacking_radii(self) -> tuple[float, ...]:
        if self.stacking_radii is not None:
            return self.stacking_radii
        return tuple(r for r in self.radii if r >= 200.0) or self.radii

    def restrict_models(self, kinds: Sequence[str]) -> None:
        kinds = tuple(normalize_kind(k) for k in kinds)
        self.models = {d: kinds for d in ("A", "B", "C")}

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | None = None) -> "ExperimentConfig":
        d = dict(d)
        known = {"data", "synthetic", "radii", "designs", "models", "hyperparameters", "protocol",
                 "encoding", "ablation_radius", "stacking_radii", "schema", "seed"}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config key(s): {sorted(extra)}", code="config")
        seed = int(d.get("seed", 42))
        proto = dict(d.pop("protocol", {}) or {})
        proto.setdefault("seed", seed)
        try:
            protocol = Protocol(**proto)
        except TypeError as exc:
            raise ConfigError(f"bad protocol: {exc}", code="config") from None
        models = d.pop("models", None)
        if isinstance(models, (list, tuple)):
            models = {k: tuple(models) for k in ("A", "B", "C")}
        elif isinstance(models, dict):
            defaults = {"A": KINDS, "B": PAPER_SUBSET, "C": PAPER_SUBSET}
            models = defaults | {str(k).upper(): tuple(v) for k, v in models.items()}
        if d.get("data") and base_dir and not os.path.isabs(d["data"]):
            d["data"] = os.path.join(base_dir, d["data"])
        kwargs = {k: v for k, v in d.items() if k in known}
        kwargs["seed"] = seed
        if models is not None:
            kwargs["models"] = models
        try:
            return cls(protocol=protocol, **kwargs)
        except TypeError as exc:
            raise ConfigError(f"bad config: {exc}", code="config") from None

    @classmethod
    def load(cls, path: str) -> "ExperimentConfig":
        try:
            with open(path, encoding="utf-8") as fh:
                d = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(f"config is not valid JSON: {exc}", code="config") from None
        if not isinstance(d, dict):
            raise ConfigError("config must be a JSON object", code="config")
        return cls.from_dict(d, os.path.dirname(os.path.abspath(path)))

    def to_dict(self) -> dict:
        return {
            "data": self.data, "synthetic": self.synthetic, "radii": list(self.radii),
            "designs": list(self.designs), "models": {k: list(v) for k, v in self.models.items()},
            "hyperparameters": self.hyperparameters, "protocol": asdict(self.protocol),
            "encoding": self.encoding, "ablation_radius": self.ablation_radius,
            "stacking_radii": list(self.resolved_stacking_radii), "schema": self.schema,
            "seed": self.seed,
        }


# ---------------------------------------------------------------------------
# running


@dataclass
class ResultRow:
    design: str
    spec: str
    model: str
    r2: float
    mae: float
    rows: int
    cols: int
    blocks: int
    fold_r2: list[float]
    fold_mae: list[float]
    seconds: float = 0.0


@dataclass
class ExperimentReport:
    results: list[ResultRow]
    summary: list[NeighborSummaryRow]
    metadata: dict

    def select(self, design: str, model: str | None = None, spec: str | None = None) -> list[ResultRow]:
        return [r for r in self.results if r.design == design
                and (model is None or r.model == model) and (spec is None or r.spec == spec)]


def load_dataset(cfg: ExperimentConfig) -> FieldDataset:
    if cfg.data:
        ds, rep = parse_field_csv(cfg.data, cfg.schema)
        if len(ds) == 0:
            raise DataError(f"{cfg.data}: no usable records", code="empty_dataset")
        return ds
    syn = dict(cfg.synthetic)
    syn.setdefault("seed", cfg.seed)
    if "bbox" in syn and syn["bbox"] is not None:
        syn["bbox"] = tuple(syn["bbox"])
    try:
        return generate_synthetic_fields(SynthConfig(**syn))
    except TypeError as exc:
        raise ConfigError(f"bad synthetic config: {exc}", code="config") from None


def _plan(cfg: ExperimentConfig) -> list[tuple[str, str, FeatureSpec]]:
    plan = []
    for design in cfg.designs:
        if design == "A":
            specs = design_a_specs(cfg.radii, cfg.encoding)
            plan += [("A", s.label, s) for s in specs]
        elif design == "B":
            plan += [("B", s.label, s) for s in design_b_specs(cfg.ablation_radius, cfg.encoding)]
        else:
            specs = design_c_specs(cfg.resolved_stacking_radii, cfg.encoding)
            plan += [("C", stacking_label(s, i == 0), s) for i, s in enumerate(specs)]
    return plan


def resolve_workers(workers: int | None = None) -> int:
    if workers is not None:
        return max(1, int(workers))
    env = os.environ.get("SOILPH_WORKERS")
    return max(1, int(env)) if env else (os.cpu_count() or 1)


def run_experiment(cfg: ExperimentConfig, workers: int | None = None,
                   dataset: FieldDataset | None = None) -> ExperimentReport:
    """Run every configured design and return the ordered report.

    The (spec, model, fold) cells run on a thread pool; the report order and
    values do not depend on the worker count.
    """
    t_start = time.perf_counter()
    workers = resolve_workers(workers)
    ds = dataset if dataset is not None else load_dataset(cfg)
    plan = _plan(cfg)
    all_radii = set(cfg.radii)
    for _, _, spec in plan:
        all_radii |= set(spec.radii)
    idx = build_index(ds, max(all_radii))
    stats = radius_stats(ds, idx, sorted(all_radii))
    summary = neighbor_summary_table(ds, idx, cfg.radii)

    matrices: dict[tuple[str, str], DesignMatrix] = {}
    for design, label, spec in plan:
        try:
            matrices[(design, label)] = build_design_matrix(ds, idx, spec, stats=stats)
        except SoilPHError as exc:
            raise type(exc)(f"design {design}, spec {label}: {exc}", code=exc.code) from exc

    cells = []
    for design, label, spec in plan:
        dm = matrices[(design, label)]
        for kind in cfg.models.get(design, ()):
            hp = _with_seed(kind, cfg.hyperparameters.get(kind), cfg.protocol.seed)
            try:
                splits = cfg.protocol.splits(dm.x.shape[0])
            except SoilPHError as exc:
                raise type(exc)(f"design {design}, spec {label}, model {kind}: {exc}",
                                code=exc.code) from exc
            for fold, (tr, te) in enumerate(splits):
                cells.append((design, label, kind, fold, hp, tr, te))

    def run_cell(cell):
        design, label, kind, fold, hp, tr, te = cell
        dm = matrices[(design, label)]
        t0 = time.perf_counter()
        try:
            if kind == "RF":
                # trees run inside the cell; avoid nested pools
                with warnings.catch_warnings():
                    warnings.simplefilter("ignore", RuntimeWarning)
                    from .regressors import fit_random_forest
                    model = fit_random_forest(dm.x[tr], dm.y[tr], make_params("RF", hp),
                                              dm.column_names, workers=1)
                pred = predict(model, dm.x[te])
                m = MetricPair(r2_score(dm.y[te], pred), mae(dm.y[te], pred))
            else:
                m = _fit_eval(dm, kind, hp, tr, te)
        except SoilPHError as exc:
            raise type(exc)(f"design {design}, spec {label}, model {kind}, fold {fold}: {exc}",
                            code=exc.code) from exc
        return m, time.perf_counter() - t0

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(run_cell, cells))
    else:
        outcomes = [run_cell(c) for c in cells]

    grouped: dict[tuple[str, str, str], list] = {}
    for cell, out in zip(cells, outcomes):
        grouped.setdefault(cell[:3], []).append(out)
    results = []
    for design, label, spec in plan:
        dm = matrices[(design, label)]
        for kind in cfg.models.get(design, ()):
            outs = grouped[(design, label, kind)]
            folds = [m for m, _ in outs]
            agg = _aggregate(folds)
            results.append(ResultRow(design, label, kind, agg.r2, agg.mae, dm.x.shape[0],
                                     dm.x.shape[1], len(spec.blocks),
                                     [f.r2 for f in folds], [f.mae for f in folds],
                                     float(sum(s for _, s in outs))))
    metadata = {
        "generated_unix": time.time(),
        "wall_seconds": time.perf_counter() - t_start,
        "workers": workers,
        "backend": backend(),
        "versions": {"soilph": __version__, "python": platform.python_version(),
                     "numpy": np.__version__, **_optional_versions()},
        "seed": cfg.seed,
        "protocol": cfg.protocol.label,
        "n_fields": len(ds),
        "config": cfg.to_dict(),
    }
    return ExperimentReport(results, summary, metadata)


def _optional_versions() -> dict:
    try:
        import numba
        return {"numba": numba.__version__}
    except ImportError:  # pragma: no cover
        return {}


# ---------------------------------------------------------------------------
# report output


REPORT_COLUMNS = ("design", "spec", "model", "r2", "mae", "rows", "cols", "blocks")


def report_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for r in report.results:
        w.writerow([r.design, r.spec, r.model, repr(r.r2), repr(r.mae), r.rows, r.cols, r.blocks])
    return buf.getvalue()


def folds_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["design", "spec", "model", "fold", "r2", "mae"])
    for r in report.results:
        for i, (a, b) in enumerate(zip(r.fold_r2, r.fold_mae)):
            w.writerow([r.design, r.spec, r.model, i, repr(a), repr(b)])
    return buf.getvalue()


def timings_csv(report: ExperimentReport) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["design", "spec", "model", "seconds"])
    for r in report.results:
        w.writerow([r.design, r.spec, r.model, f"{r.seconds:.4f}"])
    return buf.getvalue()


def _align(rows: list[list[str]]) -> str:
    widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
    out = []
    for j, r in enumerate(rows):
        cells = [c.ljust(widths[0]) if i == 0 else c.rjust(widths[i]) for i, c in enumerate(r)]
        out.append("  ".join(cells).rstrip())
        if j == 0:
            out.append("-" * len(out[-1]))
    return "\n".join(out)


def format_report(report: ExperimentReport) -> str:
    """Aligned text tables, one per design."""
    parts = []
    titles = {
        "A": "Design A: radius-based features (R2 / MAE)",
        "B": "Design B: individual features (R2)",
        "C": "Design C: combined features (R2)",
    }
    for design in ("A", "B", "C"):
        rows = [r for r in report.results if r.design == design]
        if not rows:
            continue
        specs = list(dict.fromkeys(r.spec for r in rows))
        models = list(dict.fromkeys(r.model for r in rows))
        by = {(r.spec, r.model): r for r in rows}
        if design == "A":
            head = ["Attr.", "Size"] + [f"{m} {t}" for m in models for t in ("R2", "MAE")]
        else:
            head = ["Feature", "Size"] + models
        table = [head]
        for s in specs:
            first = next(r for r in rows if r.spec == s)
            line = [s, f"({first.rows}, {first.blocks})"]
            for m in models:
                r = by.get((s, m))
                if r is None:
                    line += [""] * (2 if design == "A" else 1)
                elif design == "A":
                    line += [f"{r.r2:.3f}", f"{r.mae:.2f}"]
                else:
                    line += [f"{r.r2:.3f}"]
            table.append(line)
        parts.append(titles[design] + "\n" + _align(table))
    if report.summary:
        table = [["Radius (m)", "Fields", "Neighbors", "Distance (m)", "max-min(pH)"]]
        for s in report.summary:
            table.append([f"{s.radius_m:g}", str(s.fields_with_neighbors),
                          "" if s.mean_k is None else f"{s.mean_k:.2f}",
                          "" if s.mean_dist_m is None else f"{s.mean_dist_m:.2f}",
                          "" if s.mean_ph_spread is None else f"{s.mean_ph_spread:.2f}"])
        parts.append("Neighbor summary\n" + _align(table))
    return "\n\n".join(parts) + "\n"


def write_report(report: ExperimentReport, out_dir: str) -> dict[str, str]:
    """Write report files; only ``metadata.json`` and ``timings.csv`` vary
    between identical runs."""
    from .features import summary_rows_as_csv

    os.makedirs(out_dir, exist_ok=True)
    files = {
        "report.csv": report_csv(report),
        "folds.csv": folds_csv(report),
        "report.txt": format_report(report),
        "neighbor_summary.csv": summary_rows_as_csv(report.summary),
        "timings.csv": timings_csv(report),
        "metadata.json": json.dumps(report.metadata, indent=2, sort_keys=True, default=str) + "\n",
    }
    paths = {}
    for name, text in files.items():
        path = os.path.join(out_dir, name)
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        paths[name] = path
    return paths


def best_radius(report: ExperimentReport, model: str, design: str = "A") -> float | None:
    """Radius of the single-radius spec that gives ``model`` the highest R^2."""
    best, best_r = -math.inf, None
    for r in report.select(design, model):
        radii = parse_feature_spec(r.spec).radii
        if len(radii) == 1 and r.r2 > best:
            best, best_r = r.r2, radii[0]
    return best_r
