"""Pipeline command line: one entry point, one config file, one seed.

Subcommands compose the stages end to end:

    search            query the platform, anonymize, append to the manifest
    prepare-frames    decode interval clips, cache JPEGs, build standardized tensors
    extract-features  embed standardized frames with the configured backbone
    train             fit the sequence classifier, write a checkpoint
    crossval          stratified k-fold train/eval, write report files
    predict           label feature files or corpus videos with a checkpoint
    report            re-render saved fold reports as text or CSV
    annotate          start the labeling HTTP service

Configuration comes from a JSON file (``--config``), with flags overriding
file values.  All randomness derives from the single top-level ``seed``
expanded per stage, so one number reproduces a whole run.  Exit codes:
0 success, 1 domain error, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from contextlib import contextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

import numpy as np
from filelock import Timeout
from PIL import Image

from . import backbone as backbone_mod
from . import synthetic, tensorio
from .acquisition import (
    Anonymizer,
    AuthFailureError,
    PrivateMap,
    SearchRequest,
    YouTubeClient,
)
from .annotation_service import ServiceConfig, serve
from .corpus import (
    FrameIndex,
    Interval,
    Label,
    LabeledVideo,
    Manifest,
    assign_irrelevant_interval,
    frame_path,
    frames_dir,
    manifest_lock,
    read_frame_index,
    write_frame_index,
)
from .errors import WhalesiftError
from .evaluation import CVSummary, FoldReport, average, render_report, run_crossval
from .framepipe import (
    FrameSequence,
    PixelScale,
    PreprocessSpec,
    SamplePolicy,
    enumerate_frames,
    load_frame_image,
    pad_middle,
    resize_normalize,
    uniform_sample_indices,
)
from .seeding import interval_seed, stage_seed
from .seqclassifier import TrainConfig, load_checkpoint, predict, save_checkpoint, train

logger = logging.getLogger(__name__)

API_KEY_ENV = "WHALESIFT_API_KEY"
MANIFEST_NAME = "manifest.ndjson"
PRIVATE_MAP_NAME = "private_map.tsv"
CHECKPOINT_NAME = "model.ckpt"
STANDARD_TENSOR = "standard"  # base name of the per-video standardized tensor


class UsageError(Exception):
    """Bad flags or config; exits with status 2."""


class PipelineError(WhalesiftError):
    """Domain failure while running a subcommand; exits with status 1."""


# -- configuration ---------------------------------------------------------------

_TRAIN_KEYS = {
    "learning_rate",
    "beta1",
    "beta2",
    "epsilon",
    "epochs",
    "batch_size",
    "dropout",
    "shuffle",
}

_DEFAULTS: dict = {
    "corpus_dir": "corpus",
    "frame_cache": None,  # default <corpus_dir>/frames
    "feature_cache": None,  # default <corpus_dir>/features
    "checkpoint_dir": None,  # default <corpus_dir>/checkpoints
    "report_dir": None,  # default <corpus_dir>/reports
    "video_dir": None,  # default <corpus_dir>/videos
    "static_dir": None,  # default: frontend/dist when present
    "query": "humpback whale",
    "max_results": 50,
    "max_videos": 100,
    "requests_per_second": 1.0,
    "frames": 31,
    "side_px": 224,
    "pixel_scale": "symmetric_unit",
    "decoder_template": None,  # default framepipe decoder
    "backbone": "builtin",
    "backbone_seed": 0,
    "hidden_sizes": [16, 8, 8],
    "folds": 5,
    "seed": 0,
    "bind": "127.0.0.1:8765",
    "synthetic_count": 200,
    "train": {},
}


@dataclass
class PipelineConfig:
    """Fully resolved settings for one invocation."""

    corpus_dir: Path
    frame_cache: Path
    feature_cache: Path
    checkpoint_dir: Path
    report_dir: Path
    video_dir: Path
    static_dir: Path | None
    query: str
    max_results: int
    max_videos: int
    requests_per_second: float
    frames: int
    side_px: int
    pixel_scale: PixelScale
    decoder_template: str | None
    backbone: str
    backbone_seed: int
    hidden_sizes: tuple[int, int, int]
    folds: int
    seed: int
    bind: tuple[str, int]
    synthetic_count: int
    train_overrides: dict

    @property
    def manifest_path(self) -> Path:
        return self.corpus_dir / MANIFEST_NAME

    @property
    def private_map_path(self) -> Path:
        return self.corpus_dir / PRIVATE_MAP_NAME

    def backbone_spec(self) -> backbone_mod.BackboneSpec:
        if self.backbone == "builtin":
            return backbone_mod.BackboneSpec(
                input_side_px=self.side_px,
                seed=self.backbone_seed,
                pixel_scale=self.pixel_scale,
            )
        return backbone_mod.BackboneSpec(
            input_side_px=self.side_px,
            model_path=Path(self.backbone),
            pixel_scale=self.pixel_scale,
        )

    def backbone_name(self) -> str:
        if self.backbone == "builtin":
            return backbone_mod.BUILTIN_NAME
        return Path(self.backbone).stem

    def train_config(self) -> TrainConfig:
        try:
            return TrainConfig(seed=stage_seed(self.seed, "train"), **self.train_overrides)
        except (TypeError, ValueError) as err:
            raise UsageError(f"config key 'train': {err}") from err

    def synthetic_spec(self) -> synthetic.SyntheticSpec:
        return synthetic.SyntheticSpec(
            count=self.synthetic_count,
            frame_count=self.frames,
            seed=stage_seed(self.seed, "synthetic"),
        )


def _require(condition: bool, key: str, message: str) -> None:
    if not condition:
        raise UsageError(f"config key {key!r}: {message}")


def load_config_file(path: str | None) -> dict:
    if path is None:
        return {}
    try:
        raw = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as err:
        raise UsageError(f"cannot read config {path}: {err}") from err
    except json.JSONDecodeError as err:
        raise UsageError(f"config {path} is not valid JSON: {err}") from err
    if not isinstance(raw, dict):
        raise UsageError(f"config {path} must be a JSON object")
    return raw


def build_config(file_values: dict, args: argparse.Namespace) -> PipelineConfig:
    unknown = sorted(set(file_values) - set(_DEFAULTS))
    if unknown:
        raise UsageError(f"unknown config key(s): {', '.join(unknown)}")
    values = {**_DEFAULTS, **file_values}

    # Flags win over the file.
    if getattr(args, "seed", None) is not None:
        values["seed"] = args.seed
    if getattr(args, "backbone", None) is not None:
        values["backbone"] = args.backbone
    if getattr(args, "frames", None) is not None:
        values["frames"] = args.frames
    if getattr(args, "folds", None) is not None:
        values["folds"] = args.folds

    train_overrides = values["train"]
    _require(isinstance(train_overrides, dict), "train", "must be an object")
    bad = sorted(set(train_overrides) - _TRAIN_KEYS)
    _require(not bad, "train", f"unknown key(s): {', '.join(bad)}")

    _require(isinstance(values["query"], str) and values["query"].strip() != "", "query", "must be a non-empty string")
    _require(int(values["frames"]) >= 1, "frames", "must be >= 1")
    _require(int(values["folds"]) >= 2, "folds", "must be >= 2")
    _require(int(values["side_px"]) >= 1, "side_px", "must be >= 1")
    _require(1 <= int(values["max_results"]) <= 50, "max_results", "must be in [1, 50]")
    _require(int(values["max_videos"]) >= 0, "max_videos", "must be >= 0 (0 = unlimited)")
    _require(float(values["requests_per_second"]) > 0, "requests_per_second", "must be positive")
    _require(int(values["synthetic_count"]) >= 2, "synthetic_count", "must be >= 2")

    scale_names = {s.value: s for s in PixelScale}
    _require(
        values["pixel_scale"] in scale_names,
        "pixel_scale",
        f"must be one of {sorted(scale_names)}",
    )

    hidden = values["hidden_sizes"]
    _require(
        isinstance(hidden, (list, tuple))
        and len(hidden) == 3
        and all(isinstance(h, int) and h >= 1 for h in hidden),
        "hidden_sizes",
        "must be three positive integers",
    )

    bind = values["bind"]
    host, _, port_text = str(bind).rpartition(":")
    _require(bool(host) and port_text.isdigit(), "bind", "must look like host:port")
    port = int(port_text)
    _require(0 <= port <= 65535, "bind", "port out of range")

    corpus_dir = Path(values["corpus_dir"])

    def path_or(key: str, default: Path) -> Path:
        return Path(values[key]) if values[key] else default

    static_dir: Path | None = None
    if values["static_dir"]:
        static_dir = Path(values["static_dir"])
    elif Path("frontend/dist").is_dir():
        static_dir = Path("frontend/dist")

    return PipelineConfig(
        corpus_dir=corpus_dir,
        frame_cache=path_or("frame_cache", corpus_dir / "frames"),
        feature_cache=path_or("feature_cache", corpus_dir / "features"),
        checkpoint_dir=path_or("checkpoint_dir", corpus_dir / "checkpoints"),
        report_dir=path_or("report_dir", corpus_dir / "reports"),
        video_dir=path_or("video_dir", corpus_dir / "videos"),
        static_dir=static_dir,
        query=str(values["query"]),
        max_results=int(values["max_results"]),
        max_videos=int(values["max_videos"]),
        requests_per_second=float(values["requests_per_second"]),
        frames=int(values["frames"]),
        side_px=int(values["side_px"]),
        pixel_scale=scale_names[values["pixel_scale"]],
        decoder_template=values["decoder_template"],
        backbone=str(values["backbone"]),
        backbone_seed=int(values["backbone_seed"]),
        hidden_sizes=tuple(int(h) for h in hidden),
        folds=int(values["folds"]),
        seed=int(values["seed"]),
        bind=(host, port),
        synthetic_count=int(values["synthetic_count"]),
        train_overrides=dict(train_overrides),
    )


@contextmanager
def _corpus_write_lock(cfg: PipelineConfig):
    """Serialize mutating subcommands on one corpus (cross-process)."""
    cfg.corpus_dir.mkdir(parents=True, exist_ok=True)
    lock = manifest_lock(cfg.manifest_path)
    try:
        lock.acquire(timeout=2.0)
    except Timeout:
        raise PipelineError(
            "corpus lock held; another subcommand or the annotation service is running"
        ) from None
    try:
        yield
    finally:
        lock.release()


def _load_manifest(cfg: PipelineConfig) -> Manifest:
    if not cfg.manifest_path.exists():
        raise PipelineError(f"no manifest at {cfg.manifest_path}; run `search` first")
    return Manifest.load(cfg.manifest_path)


def _plan(args: argparse.Namespace, lines: list[str]) -> bool:
    """Print the dry-run plan; returns True when the command should stop."""
    if not args.dry_run:
        return False
    print("dry run; no files will be written")
    for line in lines:
        print(f"  - {line}")
    return True


# -- search ----------------------------------------------------------------------


def _next_counter(manifest: Manifest) -> int:
    highest = 0
    for video in manifest:
        name = video.local_id
        if name.startswith("vid_") and name[4:].isdigit():
            highest = max(highest, int(name[4:]))
    return highest + 1


def cmd_search(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    if _plan(
        args,
        [
            f"query {cfg.query!r} ({cfg.max_results} per page, cap {cfg.max_videos or 'none'})",
            f"append anonymized records to {cfg.manifest_path}",
            f"platform ids recorded only in {cfg.private_map_path}",
        ],
    ):
        return 0

    api_key = os.environ.get(API_KEY_ENV)
    if not api_key:
        raise AuthFailureError(f"no API key: set the {API_KEY_ENV} environment variable")
    client = YouTubeClient(api_key=api_key, requests_per_second=cfg.requests_per_second)

    with _corpus_write_lock(cfg):
        manifest = (
            Manifest.load(cfg.manifest_path) if cfg.manifest_path.exists() else Manifest()
        )
        private_map = (
            PrivateMap.load(cfg.private_map_path)
            if cfg.private_map_path.exists()
            else PrivateMap()
        )
        known = private_map.platform_ids()
        anonymizer = Anonymizer(start=_next_counter(manifest))
        now = datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

        added = 0
        for meta in client.iter_search(
            SearchRequest(query=cfg.query, max_results=cfg.max_results)
        ):
            if meta.platform_video_id in known:
                continue
            record, entry = anonymizer.anonymize(meta, query=cfg.query, now=now)
            manifest.add(LabeledVideo(record=record))
            private_map.add(entry)
            known.add(meta.platform_video_id)
            added += 1
            if cfg.max_videos and added >= cfg.max_videos:
                break

        manifest.save(cfg.manifest_path)
        private_map.save(cfg.private_map_path)

    print(f"added {added} video(s); corpus now has {len(manifest)}")
    return 0


# -- prepare-frames ----------------------------------------------------------------


def _wanted_interval(cfg: PipelineConfig, video: LabeledVideo) -> Interval | None:
    """Which clip the frame cache should hold for this video right now."""
    duration = video.record.duration_s
    if video.label is None:
        # Unlabeled: a whole-video browsing strip for the annotator.
        return Interval(0.0, duration) if duration > 0 else None
    if video.interval is not None:
        return video.interval
    if video.label is Label.IRRELEVANT and duration > 0:
        return assign_irrelevant_interval(
            duration, seed=interval_seed(cfg.seed, video.local_id)
        )
    return None  # relevant without a human interval yet


def _find_video_file(video_dir: Path, local_id: str) -> Path | None:
    for candidate in sorted(video_dir.glob(f"{local_id}.*")):
        if candidate.suffix not in (".part", ".tmp") and candidate.is_file():
            return candidate
    return None


def _standard_base(cfg: PipelineConfig, local_id: str) -> Path:
    return frames_dir(cfg.frame_cache, local_id) / STANDARD_TENSOR


def _build_standard_tensor(cfg: PipelineConfig, local_id: str, native_count: int) -> None:
    """Standardize the cached JPEGs to (T, S, S, 3) float32 and store it."""
    policy = SamplePolicy(target_count=cfg.frames)
    spec = PreprocessSpec(side_px=cfg.side_px, pixel_scale=cfg.pixel_scale)
    indices = list(range(native_count))
    if native_count < policy.target_count:
        chosen = pad_middle(indices, policy.target_count)
    elif native_count == policy.target_count:
        chosen = indices
    else:
        chosen = uniform_sample_indices(native_count, policy.target_count)
    cache: dict[int, np.ndarray] = {}
    stack = []
    for i in chosen:
        if i not in cache:
            cache[i] = resize_normalize(
                load_frame_image(frame_path(cfg.frame_cache, local_id, i)), spec
            )
        stack.append(cache[i])
    tensorio.save_tensor(
        _standard_base(cfg, local_id), np.stack(stack).astype(np.float32), local_id
    )


def cmd_prepare_frames(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    with _corpus_write_lock(cfg):
        manifest = _load_manifest(cfg)
        videos = sorted(manifest, key=lambda v: v.local_id)

        plan_lines = []
        decoded = standardized = skipped = 0
        for video in videos:
            local_id = video.local_id
            wanted = _wanted_interval(cfg, video)
            if wanted is None:
                reason = (
                    "relevant but no interval marked yet"
                    if video.label is Label.RELEVANT
                    else "unknown duration"
                )
                logger.warning("skipping %s: %s", local_id, reason)
                skipped += 1
                continue

            try:
                index = read_frame_index(cfg.frame_cache, local_id)
            except WhalesiftError:
                index = None
            fresh = index is not None and index.interval == wanted
            has_tensor = _standard_base(cfg, local_id).with_suffix(".f32").exists()

            if fresh and (video.label is None or has_tensor):
                continue

            if args.dry_run:
                what = "standardize" if fresh else f"decode [{wanted.start_s:g}, {wanted.end_s:g})s"
                plan_lines.append(f"{local_id}: {what}")
                continue

            if not fresh:
                source = _find_video_file(cfg.video_dir, local_id)
                if source is None:
                    logger.warning(
                        "skipping %s: no video file under %s", local_id, cfg.video_dir
                    )
                    skipped += 1
                    continue
                decode_args = {"decoder_template": cfg.decoder_template} if cfg.decoder_template else {}
                frames, timestamps = enumerate_frames(
                    source, wanted.start_s, wanted.end_s, **decode_args
                )
                target_dir = frames_dir(cfg.frame_cache, local_id)
                target_dir.mkdir(parents=True, exist_ok=True)
                for stale in target_dir.glob("*.jpg"):
                    stale.unlink()
                for n, frame in enumerate(frames):
                    Image.fromarray(frame).save(
                        frame_path(cfg.frame_cache, local_id, n), quality=90
                    )
                # Persist the interval only for labeled videos: for unlabeled
                # ones `wanted` is just the whole-video browsing strip, not an
                # excerpt choice, and it lives in the frame index alone.
                if video.label is not None and video.interval != wanted:
                    video = manifest.set_interval(local_id, wanted)
                video = manifest.set_frame_count(local_id, len(frames))
                decoded += 1
                native_count = len(frames)
                stamps = timestamps
            else:
                native_count = index.native_count
                stamps = list(index.timestamps_s)

            if video.label is not None:
                _build_standard_tensor(cfg, local_id, native_count)
                standardized += 1

            # The index is the completion marker, so it is written last: a
            # crash earlier in this block leaves a stale/missing index and the
            # next run redoes the whole video.
            write_frame_index(
                cfg.frame_cache,
                FrameIndex(
                    local_id=local_id,
                    interval=wanted,
                    native_count=native_count,
                    timestamps_s=tuple(stamps),
                    extracted_at=datetime.now(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ"),
                ),
            )

        if _plan(args, plan_lines or ["nothing to do"]):
            return 0
        manifest.save(cfg.manifest_path)

    print(
        f"frames: decoded {decoded}, standardized {standardized}, "
        f"skipped {skipped}, total {len(videos)}"
    )
    return 0


# -- extract-features -----------------------------------------------------------


def cmd_extract_features(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    backbone = backbone_mod.load_backbone(cfg.backbone_spec())
    with _corpus_write_lock(cfg):
        manifest = _load_manifest(cfg)
        labeled = sorted(
            (v for v in manifest if v.label is not None), key=lambda v: v.local_id
        )

        plan_lines = []
        wrote = skipped = missing = 0
        for video in labeled:
            local_id = video.local_id
            if backbone_mod.has_features(cfg.feature_cache, backbone.name, local_id):
                skipped += 1
                continue
            base = _standard_base(cfg, local_id)
            if not base.with_suffix(".f32").exists():
                logger.warning("skipping %s: no standardized tensor", local_id)
                missing += 1
                continue
            if args.dry_run:
                plan_lines.append(f"{local_id}: embed with {backbone.name}")
                continue
            frames, _meta = tensorio.load_tensor(base)
            sequence = FrameSequence(
                local_id=local_id,
                frames=frames.astype(np.float32),
                native_count=video.frame_count or frames.shape[0],
            )
            features = backbone_mod.extract(backbone, sequence)
            backbone_mod.save_features(cfg.feature_cache, features)
            wrote += 1

        if _plan(args, plan_lines or ["nothing to do"]):
            return 0

    print(
        f"features[{backbone.name}]: wrote {wrote} (D={backbone.output_dim}), "
        f"skipped {skipped} cached, {missing} without tensors"
    )
    return 0


# -- train / crossval -------------------------------------------------------------


def _ensure_synthetic(cfg: PipelineConfig) -> None:
    """Materialize the deterministic synthetic corpus into the corpus dir."""
    if cfg.manifest_path.exists():
        manifest = Manifest.load(cfg.manifest_path)
        first = next(iter(manifest), None)
        if first is not None and first.record.query != synthetic.SYNTHETIC_BACKBONE:
            raise PipelineError(
                f"{cfg.manifest_path} holds a real corpus; refusing to overwrite it "
                "with synthetic data (use a different corpus_dir)"
            )
    synthetic.write_corpus(cfg.synthetic_spec(), cfg.corpus_dir, cfg.feature_cache)


def _load_dataset(
    cfg: PipelineConfig, backbone_name: str
) -> tuple[dict[str, np.ndarray], dict[str, Label]]:
    manifest = _load_manifest(cfg)
    labels = manifest.labels()
    features: dict[str, np.ndarray] = {}
    missing = []
    for local_id in sorted(labels):
        if backbone_mod.has_features(cfg.feature_cache, backbone_name, local_id):
            features[local_id] = backbone_mod.load_features(
                cfg.feature_cache, backbone_name, local_id
            ).features
        else:
            missing.append(local_id)
    if missing:
        raise PipelineError(
            f"no cached features ({backbone_name}) for {len(missing)} video(s), "
            f"e.g. {', '.join(missing[:5])}; run `extract-features`"
        )
    if not labels:
        raise PipelineError("no labeled videos in the corpus")
    return features, labels


def _dataset_backbone_name(cfg: PipelineConfig, args: argparse.Namespace) -> str:
    return synthetic.SYNTHETIC_BACKBONE if args.synthetic else cfg.backbone_name()


def cmd_train(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    out_dir = Path(args.out) if args.out else cfg.checkpoint_dir
    checkpoint = out_dir / CHECKPOINT_NAME
    config = cfg.train_config()
    if _plan(
        args,
        [
            f"dataset: {'synthetic corpus' if args.synthetic else cfg.backbone_name() + ' features'}",
            f"{config.epochs} epochs, batch {config.batch_size}, seed {config.seed}",
            f"checkpoint -> {checkpoint}",
        ],
    ):
        return 0

    with _corpus_write_lock(cfg):
        if args.synthetic:
            _ensure_synthetic(cfg)
        features, labels = _load_dataset(cfg, _dataset_backbone_name(cfg, args))
        dataset = [(features[vid], labels[vid]) for vid in sorted(labels)]
        net, history = train(dataset, config, cfg.hidden_sizes)
        save_checkpoint(net, checkpoint, seed=config.seed)
        history_path = out_dir / "train_history.json"
        history_path.write_text(
            json.dumps({"epochs": config.epochs, "mean_loss": history}, indent=2)
            + "\n",
            encoding="utf-8",
        )

    loss_note = f"; final epoch loss {history[-1]:.6f}" if history else ""
    print(f"trained on {len(dataset)} sequence(s){loss_note}")
    print(f"checkpoint: {checkpoint}")
    return 0


def _summary_to_dict(summary: CVSummary, k: int, fold_seed: int, top_seed: int) -> dict:
    def report_row(r) -> dict:
        return {
            "fold": r.fold,
            "accuracy": r.accuracy,
            "precision_irr": r.precision[0],
            "precision_rel": r.precision[1],
            "recall_irr": r.recall[0],
            "recall_rel": r.recall[1],
            "f1_irr": r.f1[0],
            "f1_rel": r.f1[1],
        }

    return {
        "k": k,
        "fold_seed": fold_seed,
        "top_seed": top_seed,
        "folds": [report_row(r) for r in summary.folds],
        "average": report_row(
            FoldReport(
                fold=0,
                accuracy=summary.accuracy,
                precision=summary.precision,
                recall=summary.recall,
                f1=summary.f1,
            )
        ),
    }


def cmd_crossval(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    out_dir = Path(args.out) if args.out else cfg.report_dir
    fold_seed = stage_seed(cfg.seed, "folds")
    if _plan(
        args,
        [
            f"dataset: {'synthetic corpus' if args.synthetic else cfg.backbone_name() + ' features'}",
            f"{cfg.folds}-fold stratified cross-validation (fold seed {fold_seed})",
            f"reports -> {out_dir}/crossval.txt, .csv, crossval_folds.json",
        ],
    ):
        return 0

    with _corpus_write_lock(cfg):
        if args.synthetic:
            _ensure_synthetic(cfg)
        features, labels = _load_dataset(cfg, _dataset_backbone_name(cfg, args))
        summary, _spec = run_crossval(
            features, labels, cfg.folds, fold_seed, cfg.train_config(), cfg.hidden_sizes
        )

        out_dir.mkdir(parents=True, exist_ok=True)
        text = render_report(summary, "text")
        (out_dir / "crossval.txt").write_text(text, encoding="utf-8")
        (out_dir / "crossval.csv").write_text(
            render_report(summary, "csv"), encoding="utf-8"
        )
        (out_dir / "crossval_folds.json").write_text(
            json.dumps(_summary_to_dict(summary, cfg.folds, fold_seed, cfg.seed), indent=2)
            + "\n",
            encoding="utf-8",
        )

    print(text, end="")
    print(f"reports written to {out_dir}")
    return 0


# -- predict ----------------------------------------------------------------------


def _resolve_feature_input(cfg: PipelineConfig, token: str) -> tuple[str, np.ndarray]:
    """A predict input is a tensor file path or a corpus local id.

    Local ids are looked up under the configured backbone first, then under
    whichever single cached backbone holds them (so synthetic features are
    found without flipping the config).
    """
    path = Path(token)
    if path.suffix in (".f32", ".json") and path.exists():
        array, _ = tensorio.load_tensor(path.with_suffix(""))
        return token, array
    if path.with_suffix(".f32").exists():
        array, _ = tensorio.load_tensor(path)
        return token, array

    names = [cfg.backbone_name()]
    if cfg.feature_cache.is_dir():
        names += sorted(
            d.name for d in cfg.feature_cache.iterdir() if d.is_dir() and d.name != names[0]
        )
    hits = [n for n in names if backbone_mod.has_features(cfg.feature_cache, n, token)]
    if not hits:
        raise PipelineError(f"no feature file or cached features for {token!r}")
    if len(hits) > 1 and hits[0] != cfg.backbone_name():
        raise PipelineError(
            f"{token!r} has features under several backbones ({', '.join(hits)}); "
            "set the backbone in the config"
        )
    return token, backbone_mod.load_features(cfg.feature_cache, hits[0], token).features


def cmd_predict(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    checkpoint = Path(args.checkpoint) if args.checkpoint else cfg.checkpoint_dir / CHECKPOINT_NAME
    tokens = list(args.inputs)
    if not tokens:
        manifest = _load_manifest(cfg)
        tokens = sorted(v.local_id for v in manifest if v.label is not None)
        if not tokens:
            raise PipelineError("no inputs given and the corpus has no labeled videos")
    if _plan(args, [f"checkpoint {checkpoint}", f"{len(tokens)} input(s)"]):
        return 0

    net, _header = load_checkpoint(checkpoint)
    lines = []
    for token in tokens:
        name, array = _resolve_feature_input(cfg, token)
        result = predict(net, array.astype(np.float64))
        label = "relevant" if result.label is Label.RELEVANT else "irrelevant"
        lines.append(
            f"{name}\t{label}\t{result.confidence:.6f}"
            f"\t{result.probs[0]:.6f}\t{result.probs[1]:.6f}"
        )
    body = "\n".join(lines) + "\n"
    sys.stdout.write(body)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        (out_dir / "predictions.tsv").write_text(body, encoding="utf-8")
    return 0


# -- report -----------------------------------------------------------------------


def _reports_from_json(payload: dict) -> list[FoldReport]:
    try:
        rows = payload["folds"]
        return [
            FoldReport(
                fold=int(r["fold"]),
                accuracy=float(r["accuracy"]),
                precision=(float(r["precision_irr"]), float(r["precision_rel"])),
                recall=(float(r["recall_irr"]), float(r["recall_rel"])),
                f1=(float(r["f1_irr"]), float(r["f1_rel"])),
            )
            for r in rows
        ]
    except (KeyError, TypeError, ValueError) as err:
        raise PipelineError(f"fold report file is malformed: {err}") from err


def cmd_report(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    source = Path(args.folds_file) if args.folds_file else cfg.report_dir / "crossval_folds.json"
    if _plan(args, [f"render {source} as {args.format}"]):
        return 0
    if not source.exists():
        raise PipelineError(f"no fold reports at {source}; run `crossval` first")
    payload = json.loads(source.read_text(encoding="utf-8"))
    summary = average(_reports_from_json(payload))
    rendered = render_report(summary, args.format)
    sys.stdout.write(rendered)
    if args.out:
        out_dir = Path(args.out)
        out_dir.mkdir(parents=True, exist_ok=True)
        suffix = "csv" if args.format == "csv" else "txt"
        (out_dir / f"report.{suffix}").write_text(rendered, encoding="utf-8")
    return 0


# -- annotate ---------------------------------------------------------------------


def cmd_annotate(cfg: PipelineConfig, args: argparse.Namespace) -> int:
    host, port = cfg.bind
    if _plan(
        args,
        [
            f"serve corpus {cfg.corpus_dir} on http://{host}:{port}",
            f"static UI from {cfg.static_dir}" if cfg.static_dir else "no static UI dir",
        ],
    ):
        return 0
    service = serve(
        ServiceConfig(
            corpus_dir=cfg.corpus_dir,
            frame_cache=cfg.frame_cache,
            host=host,
            port=port,
            static_dir=cfg.static_dir,
            seed=cfg.seed,
        )
    )
    print(f"annotation service on {service.url} (Ctrl-C to stop)")
    try:
        service.serve_forever()
    except KeyboardInterrupt:
        service.close()
    return 0


# -- entry point -------------------------------------------------------------------

_COMMANDS = {
    "search": cmd_search,
    "prepare-frames": cmd_prepare_frames,
    "extract-features": cmd_extract_features,
    "train": cmd_train,
    "crossval": cmd_crossval,
    "predict": cmd_predict,
    "report": cmd_report,
    "annotate": cmd_annotate,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON config file")
    common.add_argument("--seed", type=int, metavar="N", help="top-level seed")
    common.add_argument(
        "--backbone", metavar="PATH|builtin", help="ONNX model path or 'builtin'"
    )
    common.add_argument("--frames", type=int, metavar="N", help="frames per video (T)")
    common.add_argument("--folds", type=int, metavar="N", help="cross-validation folds")
    common.add_argument("--out", metavar="DIR", help="override the output directory")
    common.add_argument(
        "--dry-run", action="store_true", help="validate config and print the plan"
    )

    parser = argparse.ArgumentParser(
        prog="whalesift",
        description="Query-to-corpus pipeline for whale encounter videos.",
    )
    sub = parser.add_subparsers(dest="command", required=True, metavar="SUBCOMMAND")

    sub.add_parser("search", parents=[common], help="query the platform and anonymize")
    sub.add_parser(
        "prepare-frames", parents=[common], help="decode and standardize interval frames"
    )
    sub.add_parser(
        "extract-features", parents=[common], help="embed frames with the backbone"
    )

    p_train = sub.add_parser("train", parents=[common], help="train the classifier")
    p_train.add_argument(
        "--synthetic", action="store_true", help="train on the generated synthetic corpus"
    )

    p_cv = sub.add_parser(
        "crossval", parents=[common], help="stratified k-fold cross-validation"
    )
    p_cv.add_argument(
        "--synthetic",
        action="store_true",
        help="evaluate on the generated synthetic corpus",
    )

    p_predict = sub.add_parser(
        "predict", parents=[common], help="classify feature files or corpus videos"
    )
    p_predict.add_argument("--checkpoint", metavar="PATH", help="checkpoint file")
    p_predict.add_argument(
        "inputs", nargs="*", help="feature tensor paths or corpus local ids"
    )

    p_report = sub.add_parser(
        "report", parents=[common], help="render saved fold reports"
    )
    p_report.add_argument(
        "--format", choices=("text", "csv"), default="text", help="output format"
    )
    p_report.add_argument(
        "folds_file", nargs="?", help="fold report JSON (default: report dir)"
    )

    sub.add_parser("annotate", parents=[common], help="start the annotation service")
    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=os.environ.get("WHALESIFT_LOG", "WARNING"))
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as err:
        return int(err.code or 0)

    try:
        cfg = build_config(load_config_file(args.config), args)
        return _COMMANDS[args.command](cfg, args)
    except UsageError as err:
        print(f"usage error: {err}", file=sys.stderr)
        return 2
    except WhalesiftError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except ValueError as err:
        print(f"error: {err}", file=sys.stderr)
        return 1
    except KeyboardInterrupt:
        return 130


if __name__ == "__main__":
    sys.exit(main())
