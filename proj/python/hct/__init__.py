"""Hierarchical clustering with batch-hard triplet fine-tuning."""

from ._core import (
    ConfigError,
    Error,
    GradientSingularityError,
    MergeSchedule,
    ParseError,
    SamplingError,
    ScheduleError,
    StageError,
    TrainingError,
    ValidationError,
    batch_hard_loss,
    evaluate_retrieval,
    generate_synthetic,
    label_quality,
    load_features,
    pairwise_cosine_distance,
    pairwise_euclidean,
    run_clustering,
    run_pipeline,
    save_features,
)

__all__ = [
    "ConfigError",
    "Error",
    "GradientSingularityError",
    "MergeSchedule",
    "ParseError",
    "SamplingError",
    "ScheduleError",
    "StageError",
    "TrainingError",
    "ValidationError",
    "batch_hard_loss",
    "evaluate_retrieval",
    "generate_synthetic",
    "label_quality",
    "load_features",
    "pairwise_cosine_distance",
    "pairwise_euclidean",
    "run_clustering",
    "run_pipeline",
    "save_features",
]
