"""``soilph`` command line.

Exit codes: 0 success, 1 usage or configuration error, 2 data, schema or
model-file error, 3 anything else.  Data goes to stdout, diagnostics to
stderr.
"""
from __future__ import annotations

import argparse
import contextlib
import json
import os
import sys
from importlib import resources

import numpy as np

from . import __version__
from .errors import ConfigError, DataError, ModelFormatError, SchemaError, SoilPHError
from .evaluation import (ExperimentConfig, Protocol, cross_validate, format_report, resolve_workers,
                         run_experiment, write_report)
from .features import (CategoricalEncoder, FeatureSpec, build_design_matrix, format_summary_table,
                       neighbor_summary_table, parse_feature_spec, summary_rows_as_csv)
from .ingest import load_crop_mapping, parse_field_csv, write_field_csv
from .regressors import KINDS, fit, load_model, normalize_kind, predict, save_model
from .spatial import build_index
from .synth import SynthConfig, generate_synthetic_fields

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_RUNTIME = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Help(argparse.ArgumentDefaultsHelpFormatter):
    """Show defaults, except None/False ones that say nothing."""

    def _get_help_string(self, action):
        if action.default in (None, False) or action.required:
            return action.help
        return super()._get_help_string(action)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        print(f"{self.prog}: error: {message}", file=sys.stderr)
        raise SystemExit(EXIT_USAGE)


def _radii(text: str) -> list[float]:
    try:
        vals = [float(t) for t in text.split(",") if t.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"not a comma-separated list of meters: {text!r}") from None
    if not vals:
        raise argparse.ArgumentTypeError("need at least one radius")
    if any(not (v > 0 and np.isfinite(v)) for v in vals):
        raise argparse.ArgumentTypeError(f"radii must be positive meters: {text!r}")
    return sorted(set(vals))


def _json_obj(text: str) -> dict:
    """Inline JSON object, or a path to a JSON file."""
    try:
        if os.path.exists(text):
            with open(text, encoding="utf-8") as fh:
                d = json.load(fh)
        else:
            d = json.loads(text)
    except (json.JSONDecodeError, OSError) as exc:
        raise argparse.ArgumentTypeError(f"expected a JSON object or file: {exc}") from None
    if not isinstance(d, dict):
        raise argparse.ArgumentTypeError("expected a JSON object")
    return d


def _kind(text: str) -> str:
    try:
        return normalize_kind(text)
    except ConfigError as exc:
        raise argparse.ArgumentTypeError(str(exc)) from None


def _kinds(text: str) -> list[str]:
    return [_kind(t) for t in text.split(",") if t.strip()]


def _add_data(p, required=True):
    p.add_argument("--data", required=required, help="field CSV (header row, UTF-8)")
    p.add_argument("--schema", type=_json_obj, default=None,
                   help="JSON object or file mapping canonical column names to file headers")
    p.add_argument("--crop-map", default=None,
                   help="crop mapping file of name=Type lines (default: bundled mapping)")


def _add_spec(p):
    p.add_argument("--spec", required=True,
                   help="feature spec, e.g. 'CropName+Min/Max/Avg400' or 'Long/Lat/CropName'")
    p.add_argument("--encoding", choices=("onehot", "ordinal"), default="onehot",
                   help="categorical encoding")
    p.add_argument("--require-radii", type=_radii, default=None,
                   help="keep only fields with neighbors at these radii too")


def _add_model(p):
    p.add_argument("--model-kind", type=_kind, default="LR",
                   help=f"one of {', '.join(KINDS)}")
    p.add_argument("--hp", type=_json_obj, default=None,
                   help="hyperparameter overrides as JSON object or file")
    p.add_argument("--seed", type=int, default=42, help="random seed")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="soilph", description="Soil pH prediction from nearest-field features.",
                 formatter_class=_Help)
    ap.add_argument("--version", action="version", version=f"soilph {__version__}")
    sub = ap.add_subparsers(dest="command", metavar="COMMAND", parser_class=_Parser)
    sub.required = True
    fmt = _Help

    p = sub.add_parser("validate", help="parse and validate a field CSV", formatter_class=fmt)
    _add_data(p)
    p.add_argument("--strict", action="store_true", help="exit 2 if any row is rejected")
    p.add_argument("--out", default=None, help="write the accepted records as canonical CSV")

    p = sub.add_parser("stats", help="neighbor summary per radius", formatter_class=fmt)
    _add_data(p)
    p.add_argument("--radii", type=_radii, default=_radii("100,200,300,400,500,750,1000,1500,2000"),
                   help="comma-separated radii in meters")
    p.add_argument("--csv", default=None, help="also write the table as CSV to this path")

    p = sub.add_parser("features", help="export a design matrix as CSV", formatter_class=fmt)
    _add_data(p)
    _add_spec(p)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("train", help="fit a model and write a model file", formatter_class=fmt)
    _add_data(p)
    _add_spec(p)
    _add_model(p)
    p.add_argument("--out", required=True, help="model file to write (JSON)")

    p = sub.add_parser("evaluate", help="cross-validate one model on one spec", formatter_class=fmt)
    _add_data(p)
    _add_spec(p)
    _add_model(p)
    p.add_argument("--k", type=int, default=5, help="number of folds")
    p.add_argument("--holdout", type=float, default=None,
                   help="use one holdout split with this test fraction instead of k-fold")

    p = sub.add_parser("experiment", help="run designs A/B/C from a config", formatter_class=fmt)
    p.add_argument("--config", default=None,
                   help="experiment config JSON (default: bundled 1,000-field synthetic config)")
    p.add_argument("--out", required=True, help="output directory for report files")
    p.add_argument("--models", type=_kinds, default=None,
                   help="comma-separated model kinds for every design, e.g. lr,svr,gbrt")
    p.add_argument("--seed", type=int, default=None, help="override the config seed")
    p.add_argument("--workers", type=int, default=None,
                   help="worker threads (default: SOILPH_WORKERS or CPU count)")

    p = sub.add_parser("predict", help="predict pH with a model file", formatter_class=fmt)
    p.add_argument("--model", required=True, help="model file written by 'train'")
    _add_data(p)
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")

    p = sub.add_parser("synth", help="generate a synthetic field CSV", formatter_class=fmt)
    p.add_argument("--n", type=int, default=1000, help="number of fields")
    p.add_argument("--seed", type=int, default=0, help="random seed")
    p.add_argument("--correlation-length", type=float, default=800.0, help="meters")
    p.add_argument("--noise-sd", type=float, default=0.25, help="pH noise standard deviation")
    p.add_argument("--amplitude", type=float, default=1.0, help="surface amplitude in pH units")
    p.add_argument("--bbox", type=lambda s: tuple(float(v) for v in s.split(",")), default=None,
                   help="lon_min,lat_min,lon_max,lat_max (default: sized to 6 fields/km2)")
    p.add_argument("--out", default=None, help="output CSV (default: stdout)")
    return ap


# ---------------------------------------------------------------------------


def _load(args):
    mapping = load_crop_mapping(args.crop_map) if args.crop_map else None
    ds, rep = parse_field_csv(args.data, args.schema, mapping)
    if rep.rejected_count:
        print(f"{args.data}: {rep.rejected_count} row(s) rejected", file=sys.stderr)
    if len(ds) == 0:
        raise DataError(f"{args.data}: no usable records", code="empty_dataset")
    return ds, rep


def _spec(args) -> FeatureSpec:
    try:
        return parse_feature_spec(args.spec, args.encoding, args.require_radii or ())
    except SchemaError as exc:
        raise UsageError(f"bad --spec: {exc}") from None


def _design(ds, spec, **kw):
    r = max(spec.radii, default=1.0)
    return build_design_matrix(ds, build_index(ds, r), spec, **kw)


@contextlib.contextmanager
def _output(path):
    if path is None:
        yield sys.stdout
    else:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            yield fh


def cmd_validate(args) -> int:
    ds, rep = _load(args)
    print(rep.summary())
    for row, reason in rep.rejections:
        print(f"row {row}: {reason}", file=sys.stderr)
    if args.out:
        write_field_csv(ds, args.out)
    return EXIT_DATA if args.strict and rep.rejected_count else EXIT_OK


def cmd_stats(args) -> int:
    ds, _ = _load(args)
    rows = neighbor_summary_table(ds, build_index(ds, max(args.radii)), args.radii)
    print(format_summary_table(rows))
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            fh.write(summary_rows_as_csv(rows))
    return EXIT_OK


def cmd_features(args) -> int:
    ds, _ = _load(args)
    dm = _design(ds, _spec(args))
    with _output(args.out) as fh:
        dm.to_csv(fh)
    print(f"{dm.shape[0]} rows x {dm.shape[1]} columns", file=sys.stderr)
    return EXIT_OK


def _hp(args) -> dict:
    hp = dict(args.hp or {})
    if args.model_kind == "RF":
        hp.setdefault("seed", args.seed)
    return hp


def cmd_train(args) -> int:
    ds, _ = _load(args)
    spec = _spec(args)
    dm = _design(ds, spec)
    model = fit(args.model_kind, dm, hp=_hp(args))
    model.metadata.update({
        "feature_spec": spec.to_dict(),
        "encoders": {k: e.to_dict() for k, e in dm.encoders.items()},
        "training_rows": int(dm.shape[0]),
        "seed": args.seed,
    })
    save_model(model, args.out)
    print(f"trained {model.kind} on {dm.shape[0]} rows x {dm.shape[1]} columns -> {args.out}",
          file=sys.stderr)
    return EXIT_OK


def cmd_evaluate(args) -> int:
    ds, _ = _load(args)
    dm = _design(ds, _spec(args))
    if args.holdout is not None:
        proto = Protocol("holdout", fraction=args.holdout, seed=args.seed)
    else:
        proto = Protocol("kfold", k=args.k, seed=args.seed)
    res = cross_validate(dm, args.model_kind, proto, _hp(args))
    print("fold,r2,mae")
    for i, m in enumerate(res.folds):
        print(f"{i},{m.r2!r},{m.mae!r}")
    print(f"mean,{res.aggregate.r2!r},{res.aggregate.mae!r}")
    return EXIT_OK


def default_config_path() -> str:
    return str(resources.files("soilph") / "data" / "default_experiment.json")


def cmd_experiment(args) -> int:
    path = args.config or default_config_path()
    if not os.path.exists(path):
        raise UsageError(f"config not found: {path}")
    cfg = ExperimentConfig.load(path)
    if args.models:
        cfg.restrict_models(args.models)
    if args.seed is not None:
        cfg.seed = args.seed
        cfg.protocol = Protocol(cfg.protocol.kind, cfg.protocol.k, cfg.protocol.fraction, args.seed)
    report = run_experiment(cfg, workers=resolve_workers(args.workers))
    paths = write_report(report, args.out)
    sys.stdout.write(format_report(report))
    print(f"wrote {len(paths)} files to {args.out}", file=sys.stderr)
    return EXIT_OK


def cmd_predict(args) -> int:
    model = load_model(args.model)
    meta = model.metadata
    if "feature_spec" not in meta:
        raise ModelFormatError("model file has no feature spec; train it with 'soilph train'")
    spec = FeatureSpec.from_dict(meta["feature_spec"])
    encoders = {k: CategoricalEncoder.from_dict(v) for k, v in meta.get("encoders", {}).items()}
    ds, _ = _load(args)
    dm = _design(ds, spec, encoders=encoders, require_target=False)
    for col, n in dm.unseen_categories.items():
        print(f"{n} row(s) with {col} values unseen in training", file=sys.stderr)
    pred = predict(model, dm)
    ids = ds.field_ids
    with _output(args.out) as fh:
        fh.write("field_id,predicted_ph\n")
        for h, v in zip(dm.row_fields, pred):
            fh.write(f"{ids[h]},{float(v)!r}\n")
    dropped = len(ds) - dm.shape[0]
    if dropped:
        print(f"{dropped} field(s) without neighbors at {spec.radii} were skipped", file=sys.stderr)
    return EXIT_OK


def cmd_synth(args) -> int:
    try:
        cfg = SynthConfig(n_fields=args.n, seed=args.seed, bbox=args.bbox,
                          correlation_length_m=args.correlation_length,
                          noise_sd=args.noise_sd, ph_amplitude=args.amplitude)
    except (ValueError, TypeError) as exc:
        raise UsageError(str(exc)) from None
    ds = generate_synthetic_fields(cfg)
    with _output(args.out) as fh:
        write_field_csv(ds, fh)
    return EXIT_OK


COMMANDS = {
    "validate": cmd_validate, "stats": cmd_stats, "features": cmd_features, "train": cmd_train,
    "evaluate": cmd_evaluate, "experiment": cmd_experiment, "predict": cmd_predict,
    "synth": cmd_synth,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return COMMANDS[args.command](args)
    except (UsageError, ConfigError) as exc:
        print(f"soilph {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (SchemaError, DataError, ModelFormatError, OSError) as exc:
        print(f"soilph {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except SoilPHError as exc:
        print(f"soilph {args.command}: {exc}", file=sys.stderr)
        return EXIT_DATA
    except Exception as exc:  # noqa: BLE001
        print(f"soilph {args.command}: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
