"""Cross-validation harness: stratified folds, confusion matrices, metrics.

Class order is [irrelevant, relevant] everywhere: rows of a confusion matrix
are true classes, columns predicted classes, and paired per-class metrics are
rendered "irr/rel".  All arithmetic is on unrounded values; rounding to one
decimal happens only at rendering.
"""

from __future__ import annotations

import io
from dataclasses import dataclass

import numpy as np

from .corpus import Label
from .errors import WhalesiftError

CLASS_NAMES = ("irrelevant", "relevant")


class FoldError(WhalesiftError):
    """Fold construction impossible (a class has fewer items than folds)."""


@dataclass(frozen=True)
class FoldSpec:
    """A k-way partition of video ids, stratified by class."""

    k: int
    seed: int
    assignment: dict[str, int]

    def fold_ids(self, fold: int) -> list[str]:
        return [vid for vid, f in self.assignment.items() if f == fold]

    def train_ids(self, fold: int) -> list[str]:
        return [vid for vid, f in self.assignment.items() if f != fold]


def stratified_folds(labels: dict[str, Label], k: int, seed: int) -> FoldSpec:
    """Shuffle each class by ``seed``, then deal round-robin across folds.

    The dealing start offset rotates by each class's remainder so total fold
    sizes also differ by at most one, not just per-class counts.
    """
    if k < 2:
        raise ValueError("k must be >= 2")
    rng = np.random.default_rng(seed)
    assignment: dict[str, int] = {}
    offset = 0
    for cls in sorted({int(label) for label in labels.values()}):
        ids = sorted(vid for vid, label in labels.items() if int(label) == cls)
        if len(ids) < k:
            raise FoldError(
                f"class {cls} has {len(ids)} items; need at least {k} for {k} folds"
            )
        perm = rng.permutation(len(ids))
        for j, idx in enumerate(perm):
            assignment[ids[int(idx)]] = (offset + j) % k
        offset = (offset + len(ids)) % k

    spec = FoldSpec(k=k, seed=seed, assignment=assignment)
    _check_balance(spec, labels)
    return spec


def _check_balance(spec: FoldSpec, labels: dict[str, Label]) -> None:
    sizes = np.zeros(spec.k, dtype=int)
    for fold in spec.assignment.values():
        sizes[fold] += 1
    assert sizes.max() - sizes.min() <= 1, "total fold sizes unbalanced"
    for cls in {int(label) for label in labels.values()}:
        counts = np.zeros(spec.k, dtype=int)
        for vid, label in labels.items():
            if int(label) == cls:
                counts[spec.assignment[vid]] += 1
        assert counts.max() - counts.min() <= 1, f"class {cls} unbalanced"


@dataclass(frozen=True)
class ConfusionMatrix:
    """2x2 counts; counts[true][pred], classes in [irrelevant, relevant] order."""

    counts: tuple[tuple[int, int], tuple[int, int]]

    def __post_init__(self) -> None:
        for row in self.counts:
            for c in row:
                if c < 0:
                    raise ValueError("counts must be non-negative")

    @property
    def total(self) -> int:
        return sum(sum(row) for row in self.counts)

    def as_array(self) -> np.ndarray:
        return np.array(self.counts, dtype=np.int64)


def confusion(preds: list[Label], truths: list[Label]) -> ConfusionMatrix:
    if len(preds) != len(truths):
        raise ValueError(f"length mismatch: {len(preds)} preds vs {len(truths)} truths")
    if not preds:
        raise ValueError("empty input")
    counts = np.zeros((2, 2), dtype=np.int64)
    for pred, truth in zip(preds, truths):
        counts[int(truth)][int(pred)] += 1
    return ConfusionMatrix(tuple(tuple(int(c) for c in row) for row in counts))


@dataclass(frozen=True)
class FoldReport:
    """Metrics for one fold, as unrounded percentages in [0, 100].

    Per-class tuples are in [irrelevant, relevant] order.
    """

    fold: int
    accuracy: float
    precision: tuple[float, float]
    recall: tuple[float, float]
    f1: tuple[float, float]


@dataclass(frozen=True)
class CVSummary:
    """All fold reports plus arithmetic means of every metric."""

    folds: tuple[FoldReport, ...]
    accuracy: float
    precision: tuple[float, float]
    recall: tuple[float, float]
    f1: tuple[float, float]


def _safe_div(num: float, den: float) -> float:
    # 0/0 metric denominators yield 0, never an error; keeps fold loops total.
    return num / den if den > 0 else 0.0


def metrics(matrix: ConfusionMatrix, fold: int = 0) -> FoldReport:
    """Accuracy plus per-class precision/recall/F1 from a confusion matrix."""
    m = matrix.as_array()
    total = int(m.sum())
    if total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = 100.0 * float(np.trace(m)) / total
    precision = []
    recall = []
    f1 = []
    for c in range(2):
        p = _safe_div(float(m[c][c]), float(m[:, c].sum()))
        r = _safe_div(float(m[c][c]), float(m[c, :].sum()))
        f = _safe_div(2.0 * p * r, p + r)
        precision.append(100.0 * p)
        recall.append(100.0 * r)
        f1.append(100.0 * f)
    return FoldReport(
        fold=fold,
        accuracy=accuracy,
        precision=(precision[0], precision[1]),
        recall=(recall[0], recall[1]),
        f1=(f1[0], f1[1]),
    )


def average(reports: list[FoldReport] | tuple[FoldReport, ...]) -> CVSummary:
    """Arithmetic mean of each metric across folds (on unrounded values)."""
    if not reports:
        raise ValueError("no fold reports to average")

    def mean(values: list[float]) -> float:
        return float(np.mean(values))

    def mean_pair(pick) -> tuple[float, float]:
        return (
            mean([pick(r)[0] for r in reports]),
            mean([pick(r)[1] for r in reports]),
        )

    return CVSummary(
        folds=tuple(reports),
        accuracy=mean([r.accuracy for r in reports]),
        precision=mean_pair(lambda r: r.precision),
        recall=mean_pair(lambda r: r.recall),
        f1=mean_pair(lambda r: r.f1),
    )


def _fmt(value: float) -> str:
    return f"{value:.1f}"


def _fmt_pair(pair: tuple[float, float]) -> str:
    return f"{_fmt(pair[0])}/{_fmt(pair[1])}"


def render_report(summary: CVSummary, fmt: str = "text") -> str:
    """Render the fold table plus its Average row as text or CSV."""
    if fmt in ("", "text"):
        return _render_text(summary)
    if fmt == "csv":
        return _render_csv(summary)
    raise ValueError(f"unknown report format {fmt!r}")


def _rows(summary: CVSummary) -> list[tuple[str, FoldReport | CVSummary]]:
    rows: list[tuple[str, FoldReport | CVSummary]] = [
        (str(r.fold), r) for r in summary.folds
    ]
    rows.append(("Average", summary))
    return rows


def _render_text(summary: CVSummary) -> str:
    header = ("Fold", "Accuracy", "Precision", "Recall", "F1")
    body = [
        (name, _fmt(row.accuracy), _fmt_pair(row.precision), _fmt_pair(row.recall), _fmt_pair(row.f1))
        for name, row in _rows(summary)
    ]
    widths = [
        max(len(header[i]), *(len(line[i]) for line in body)) for i in range(5)
    ]
    out = io.StringIO()

    def emit(cells) -> None:
        out.write("  ".join(cell.ljust(widths[i]) for i, cell in enumerate(cells)).rstrip())
        out.write("\n")

    emit(header)
    emit(tuple("-" * w for w in widths))
    for line in body:
        emit(line)
    return out.getvalue()


def _render_csv(summary: CVSummary) -> str:
    cols = [
        "fold",
        "accuracy",
        "precision_irr",
        "precision_rel",
        "recall_irr",
        "recall_rel",
        "f1_irr",
        "f1_rel",
    ]
    lines = [",".join(cols)]
    for name, row in _rows(summary):
        lines.append(
            ",".join(
                [
                    name.lower(),
                    _fmt(row.accuracy),
                    _fmt(row.precision[0]),
                    _fmt(row.precision[1]),
                    _fmt(row.recall[0]),
                    _fmt(row.recall[1]),
                    _fmt(row.f1[0]),
                    _fmt(row.f1[1]),
                ]
            )
        )
    return "\n".join(lines) + "\n"


def run_crossval(
    features: dict[str, "np.ndarray"],
    labels: dict[str, Label],
    k: int,
    seed: int,
    config=None,
    hidden_sizes: tuple[int, int, int] = (16, 8, 8),
) -> tuple[CVSummary, FoldSpec]:
    """Train-and-evaluate over stratified folds; folds run in ascending order.

    ``features`` values are (T, D) arrays or anything with a ``.features``
    attribute.  Every id in ``labels`` must have features.  The same train
    configuration (and therefore the same initialization seed) is used for
    every fold; folds differ only by their data.
    """
    # Imported here: seqclassifier is a heavier module and evaluation's
    # metric functions are useful without it.
    from . import seqclassifier

    if config is None:
        config = seqclassifier.TrainConfig()
    missing = sorted(set(labels) - set(features))
    if missing:
        raise FoldError(f"no features for labeled video(s): {', '.join(missing[:5])}")

    def feats(vid: str) -> np.ndarray:
        value = features[vid]
        return np.asarray(getattr(value, "features", value), dtype=np.float64)

    spec = stratified_folds(labels, k, seed)
    reports = []
    for fold in range(k):
        train_ids = sorted(spec.train_ids(fold))
        eval_ids = sorted(spec.fold_ids(fold))
        dataset = [(feats(vid), labels[vid]) for vid in train_ids]
        net, _ = seqclassifier.train(dataset, config, hidden_sizes)
        preds = [seqclassifier.predict(net, feats(vid)).label for vid in eval_ids]
        truths = [labels[vid] for vid in eval_ids]
        reports.append(metrics(confusion(preds, truths), fold=fold + 1))
    return average(reports), spec
