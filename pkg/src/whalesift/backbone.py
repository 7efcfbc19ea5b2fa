"""Frame embedding backbones.

Turns standardized frame stacks into fixed-width feature sequences, either
with the built-in seeded tiny CNN (fast, dependency-free, good for tests and
pipeline plumbing) or with a frozen convolutional network loaded from an
ONNX file.  Extraction is deterministic: the same frames and the same
backbone yield bitwise-identical features within one process configuration.

Features are cached on disk as one tensor file per video under
``<cache_root>/<backbone_name>/<local_id>``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import onnxlite, tensorio
from .errors import WhalesiftError
from .framepipe import FrameSequence, PixelScale

logger = logging.getLogger(__name__)

BUILTIN_NAME = "builtin-tiny"
BUILTIN_DIM = 8
_BUILTIN_MIN_SIDE = 7  # two valid 3x3 convs at stride 2 need at least 7 px


class MissingModelError(WhalesiftError):
    """The configured ONNX model file does not exist."""


class ShapeMismatchError(WhalesiftError):
    """Frames or model tensors disagree with the declared geometry."""


@dataclass(frozen=True)
class BackboneSpec:
    """How to obtain a backbone.

    Exactly one source applies: ``model_path`` selects an ONNX model, and
    when it is absent the built-in tiny CNN is constructed from ``seed``.
    """

    input_side_px: int = 224
    model_path: Path | None = None
    seed: int = 0
    pixel_scale: PixelScale = PixelScale.SYMMETRIC_UNIT

    def __post_init__(self) -> None:
        if self.input_side_px < 1:
            raise ValueError(f"input_side_px must be positive, got {self.input_side_px}")
        if self.model_path is None and self.input_side_px < _BUILTIN_MIN_SIDE:
            raise ValueError(
                f"built-in backbone needs input_side_px >= {_BUILTIN_MIN_SIDE}, "
                f"got {self.input_side_px}"
            )
        if self.model_path is not None:
            object.__setattr__(self, "model_path", Path(self.model_path))


@dataclass(frozen=True)
class FeatureSequence:
    """Per-frame embeddings for one video: ``features`` is (T, D) float32."""

    local_id: str
    features: np.ndarray
    backbone_name: str

    def __post_init__(self) -> None:
        feats = np.asarray(self.features, dtype=np.float32)
        if feats.ndim != 2:
            raise ValueError(f"features must be (T, D), got shape {feats.shape}")
        if not np.all(np.isfinite(feats)):
            raise ValueError(f"non-finite feature values for {self.local_id!r}")
        object.__setattr__(self, "features", feats)

    @property
    def frame_count(self) -> int:
        return int(self.features.shape[0])

    @property
    def dim(self) -> int:
        return int(self.features.shape[1])


class TinyConvBackbone:
    """Two seeded 3x3 valid convolutions at stride 2, then global average
    pooling down to :data:`BUILTIN_DIM` channels.

    Weights and biases are drawn once from ``numpy.random.default_rng(seed)``,
    so a given seed always names the same network.  Because both convolutions
    are unpadded, a spatially constant input produces a spatially constant
    activation map, and the pooled features do not depend on the input side
    length.
    """

    name = BUILTIN_NAME
    output_dim = BUILTIN_DIM

    def __init__(self, seed: int, input_side_px: int) -> None:
        if input_side_px < _BUILTIN_MIN_SIDE:
            raise ValueError(
                f"input side {input_side_px} too small; need >= {_BUILTIN_MIN_SIDE}"
            )
        self.seed = seed
        self.input_side_px = input_side_px
        rng = np.random.default_rng(seed)
        scale = 0.1
        self._w1 = rng.standard_normal((16, 3, 3, 3)) * scale
        self._b1 = rng.standard_normal(16) * scale
        self._w2 = rng.standard_normal((BUILTIN_DIM, 16, 3, 3)) * scale
        self._b2 = rng.standard_normal(BUILTIN_DIM) * scale

    def extract_batch(self, frames: np.ndarray) -> np.ndarray:
        """(N, S, S, 3) float frames -> (N, D) float32 features."""
        x = np.asarray(frames, dtype=np.float64).transpose(0, 3, 1, 2)
        h = np.maximum(onnxlite.conv2d(x, self._w1, self._b1, strides=(2, 2)), 0.0)
        h = np.maximum(onnxlite.conv2d(h, self._w2, self._b2, strides=(2, 2)), 0.0)
        return h.mean(axis=(2, 3)).astype(np.float32)


class OnnxBackbone:
    """A frozen ONNX CNN run by :mod:`whalesift.onnxlite`.

    The graph must take a single 4-D image batch (NCHW ``(N, 3, S, S)`` or
    NHWC ``(N, S, S, 3)``) and produce a single 2-D ``(N, D)`` output, or a
    4-D ``(N, D, 1, 1)`` output which is flattened.
    """

    def __init__(self, model_path: Path, declared_side_px: int | None = None) -> None:
        model_path = Path(model_path)
        if not model_path.exists():
            raise MissingModelError(f"backbone model not found: {model_path}")
        self.name = model_path.stem
        self.model = onnxlite.load_model(model_path)
        onnxlite.check_supported(self.model)

        data_inputs = self.model.data_inputs()
        if len(data_inputs) != 1:
            raise ShapeMismatchError(
                f"model must have exactly one image input, found {len(data_inputs)}"
            )
        self._input = data_inputs[0]
        shape = self._input.shape
        if len(shape) != 4:
            raise ShapeMismatchError(f"model input must be 4-D, got shape {shape}")
        if shape[1] == 3:
            self.layout = "NCHW"
            sides = (shape[2], shape[3])
        elif shape[3] == 3:
            self.layout = "NHWC"
            sides = (shape[1], shape[2])
        else:
            raise ShapeMismatchError(
                f"cannot locate the 3-channel axis in input shape {shape}"
            )
        if sides[0] != sides[1]:
            raise ShapeMismatchError(f"model wants non-square input {sides}")
        side = sides[0]
        if side is None:
            if declared_side_px is None:
                raise ShapeMismatchError(
                    "model input side is dynamic; an explicit side length is required"
                )
            side = declared_side_px
        elif declared_side_px is not None and declared_side_px != side:
            raise ShapeMismatchError(
                f"configured side {declared_side_px} but model expects {side}"
            )
        self.input_side_px = int(side)

        if len(self.model.outputs) != 1:
            raise ShapeMismatchError(
                f"model must have exactly one output, found {len(self.model.outputs)}"
            )
        out_shape = self.model.outputs[0].shape
        if len(out_shape) == 4 and out_shape[2] == 1 and out_shape[3] == 1:
            dim = out_shape[1]
        elif len(out_shape) == 2:
            dim = out_shape[1]
        else:
            raise ShapeMismatchError(
                f"model output must be (N, D) or (N, D, 1, 1), got {out_shape}"
            )
        if dim is None:
            raise ShapeMismatchError("model output width is dynamic; cannot size features")
        self.output_dim = int(dim)

    def extract_batch(self, frames: np.ndarray) -> np.ndarray:
        x = np.asarray(frames, dtype=np.float32)
        if self.layout == "NCHW":
            x = x.transpose(0, 3, 1, 2)
        x = np.ascontiguousarray(x)
        outputs = onnxlite.run_model(self.model, {self._input.name: x})
        out = next(iter(outputs.values()))
        return np.asarray(out, dtype=np.float32).reshape(x.shape[0], -1)


def load_backbone(spec: BackboneSpec):
    """Construct the backbone an acquisition/extract run should use."""
    if spec.model_path is None:
        logger.info("using built-in backbone (seed=%d, side=%d)", spec.seed, spec.input_side_px)
        return TinyConvBackbone(seed=spec.seed, input_side_px=spec.input_side_px)
    logger.info("loading ONNX backbone from %s", spec.model_path)
    return OnnxBackbone(spec.model_path, declared_side_px=spec.input_side_px)


def extract(backbone, sequence: FrameSequence) -> FeatureSequence:
    """Embed every frame of one standardized sequence."""
    frames = sequence.frames
    side = frames.shape[1]
    if side != backbone.input_side_px:
        raise ShapeMismatchError(
            f"frames are {side}px but backbone {backbone.name!r} expects "
            f"{backbone.input_side_px}px"
        )
    features = backbone.extract_batch(frames)
    if features.shape != (frames.shape[0], backbone.output_dim):
        raise ShapeMismatchError(
            f"backbone produced {features.shape}, expected "
            f"({frames.shape[0]}, {backbone.output_dim})"
        )
    return FeatureSequence(
        local_id=sequence.local_id, features=features, backbone_name=backbone.name
    )


# -- feature cache ---------------------------------------------------------------


def feature_base(cache_root: Path, backbone_name: str, local_id: str) -> Path:
    return Path(cache_root) / backbone_name / local_id


def save_features(cache_root: Path, sequence: FeatureSequence) -> Path:
    base = feature_base(cache_root, sequence.backbone_name, sequence.local_id)
    base.parent.mkdir(parents=True, exist_ok=True)
    tensorio.save_tensor(base, sequence.features, sequence.local_id)
    return base


def has_features(cache_root: Path, backbone_name: str, local_id: str) -> bool:
    base = feature_base(cache_root, backbone_name, local_id)
    return base.with_suffix(".f32").exists() and base.with_suffix(".json").exists()


def load_features(cache_root: Path, backbone_name: str, local_id: str) -> FeatureSequence:
    base = feature_base(cache_root, backbone_name, local_id)
    array, meta = tensorio.load_tensor(base)
    if meta.get("local_id") not in (None, local_id):
        raise tensorio.TensorIOError(
            f"cache file {base} belongs to {meta.get('local_id')!r}, not {local_id!r}"
        )
    return FeatureSequence(local_id=local_id, features=array, backbone_name=backbone_name)
