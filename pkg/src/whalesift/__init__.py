"""whalesift: build a labeled whale-encounter video corpus from a text query.

The pieces, in pipeline order:

- :mod:`whalesift.acquisition` — platform search, anonymized records, rate limiting
- :mod:`whalesift.corpus` — manifest of labeled videos, intervals, frame indexes
- :mod:`whalesift.framepipe` — decode, uniform sampling / middle padding, resize
- :mod:`whalesift.backbone` — per-frame embeddings (built-in CNN or an ONNX model)
- :mod:`whalesift.seqclassifier` — stacked recurrent classifier with its own trainer
- :mod:`whalesift.evaluation` — stratified folds, confusion metrics, report tables
- :mod:`whalesift.annotation_service` — HTTP labeling backend for the browser UI
- :mod:`whalesift.cli` — the ``whalesift`` command that drives all of it
"""

from __future__ import annotations

from .acquisition import (
    AnonymizedRecord,
    Anonymizer,
    AuthFailureError,
    NetworkFailureError,
    PrivateMap,
    QuotaExceededError,
    SearchRequest,
    YouTubeClient,
)
from .backbone import (
    BackboneSpec,
    FeatureSequence,
    OnnxBackbone,
    TinyConvBackbone,
    extract,
    load_backbone,
)
from .corpus import (
    Interval,
    Label,
    LabeledVideo,
    Manifest,
    assign_irrelevant_interval,
    interval_violation,
)
from .errors import WhalesiftError
from .evaluation import (
    ConfusionMatrix,
    CVSummary,
    FoldReport,
    FoldSpec,
    average,
    confusion,
    metrics,
    render_report,
    run_crossval,
    stratified_folds,
)
from .framepipe import (
    FrameSequence,
    PixelScale,
    PreprocessSpec,
    SamplePolicy,
    pad_middle,
    standardize,
    uniform_sample,
    uniform_sample_indices,
)
from .seeding import interval_seed, stage_seed
from .seqclassifier import (
    NetworkParams,
    Prediction,
    TrainConfig,
    forward,
    gradients,
    init_params,
    load_checkpoint,
    predict,
    save_checkpoint,
    train,
)
from .synthetic import SyntheticSpec, generate, write_corpus

__version__ = "0.1.0"

__all__ = [
    "AnonymizedRecord",
    "Anonymizer",
    "AuthFailureError",
    "BackboneSpec",
    "ConfusionMatrix",
    "CVSummary",
    "FeatureSequence",
    "FoldReport",
    "FoldSpec",
    "FrameSequence",
    "Interval",
    "Label",
    "LabeledVideo",
    "Manifest",
    "NetworkFailureError",
    "NetworkParams",
    "OnnxBackbone",
    "PixelScale",
    "Prediction",
    "PreprocessSpec",
    "PrivateMap",
    "QuotaExceededError",
    "SamplePolicy",
    "SearchRequest",
    "SyntheticSpec",
    "TinyConvBackbone",
    "TrainConfig",
    "WhalesiftError",
    "YouTubeClient",
    "assign_irrelevant_interval",
    "average",
    "confusion",
    "extract",
    "forward",
    "generate",
    "gradients",
    "init_params",
    "interval_seed",
    "interval_violation",
    "load_backbone",
    "load_checkpoint",
    "metrics",
    "pad_middle",
    "predict",
    "render_report",
    "run_crossval",
    "save_checkpoint",
    "stage_seed",
    "standardize",
    "stratified_folds",
    "train",
    "uniform_sample",
    "uniform_sample_indices",
    "write_corpus",
    "__version__",
]
