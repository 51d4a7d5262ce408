"""Soil pH prediction from the pH of nearby fields.

Typical flow: :func:`parse_field_csv` -> :func:`build_index` ->
:func:`build_design_matrix` -> :func:`fit` / :func:`predict`, or
:func:`run_experiment` for the full design sweep.
"""
__version__ = "0.1.0"

from ._accel import backend
from .errors import ConfigError, DataError, ModelFormatError, SchemaError, SoilPHError
from .features import (Block, CategoricalEncoder, DesignMatrix, FeatureSpec, NeighborSummaryRow,
                       RadiusFeatures, build_design_matrix, encode_categorical,
                       neighbor_stats, neighbor_summary_table, parse_feature_spec, radius_stats,
                       stats_at_point)
from .ingest import (CropType, FieldDataset, FieldRecord, ValidationReport, load_crop_mapping,
                     map_crop_type, parse_field_csv, validate_dataset, write_field_csv)
from .regressors import KINDS, RegressionModel, fit, load_model, predict, save_model
from .spatial import (GeoPoint, NeighborSet, SpatialIndex, brute_force_radius_query, build_index,
                      centroid, haversine_distance, radius_query)
from .synth import SynthConfig, generate_synthetic_fields
from .evaluation import (ExperimentConfig, MetricPair, Protocol, kfold_cv, kfold_indices, mae,
                         r2_score, run_experiment, write_report)

__all__ = [
    "__version__", "backend",
    "SoilPHError", "SchemaError", "DataError", "ConfigError", "ModelFormatError",
    "CropType", "FieldRecord", "FieldDataset", "ValidationReport", "parse_field_csv",
    "write_field_csv", "validate_dataset", "load_crop_mapping", "map_crop_type",
    "GeoPoint", "NeighborSet", "SpatialIndex", "build_index", "radius_query",
    "brute_force_radius_query", "haversine_distance", "centroid",
    "RadiusFeatures", "NeighborSummaryRow", "Block", "FeatureSpec", "CategoricalEncoder",
    "DesignMatrix", "radius_stats", "neighbor_stats", "stats_at_point",
    "neighbor_summary_table", "parse_feature_spec", "encode_categorical", "build_design_matrix",
    "KINDS", "RegressionModel", "fit", "predict", "save_model", "load_model",
    "SynthConfig", "generate_synthetic_fields",
    "MetricPair", "Protocol", "ExperimentConfig", "r2_score", "mae", "kfold_indices",
    "kfold_cv", "run_experiment", "write_report",
]
