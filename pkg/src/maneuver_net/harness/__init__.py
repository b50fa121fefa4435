"""Training, evaluation, metrics and sweeps."""

from .data import ClipData, ClipStore, extract_to_cache
from .metrics import (
    REFERENCE_CLASS_COUNTS,
    ClassMetrics,
    ConfusionMatrix,
    EvalReport,
    confusion_metrics,
    constant_predictor_matrix,
    majority_accuracy,
)
from .sweep import SweepCell, SweepResult, expand_grid, render_table, run_sweep
from .train import (
    EpochRecord,
    RunConfig,
    TrainResult,
    evaluate,
    load_checkpoint,
    make_model,
    predict,
    save_checkpoint,
    train,
)

__all__ = [
    "REFERENCE_CLASS_COUNTS",
    "ClassMetrics",
    "ClipData",
    "ClipStore",
    "ConfusionMatrix",
    "EpochRecord",
    "EvalReport",
    "RunConfig",
    "SweepCell",
    "SweepResult",
    "TrainResult",
    "confusion_metrics",
    "constant_predictor_matrix",
    "evaluate",
    "expand_grid",
    "extract_to_cache",
    "load_checkpoint",
    "majority_accuracy",
    "make_model",
    "predict",
    "render_table",
    "run_sweep",
    "save_checkpoint",
    "train",
]
