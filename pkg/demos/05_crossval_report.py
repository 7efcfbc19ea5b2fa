"""
Cross-validated evaluation with stratified folds
================================================

One train/test split is a noisy estimate.  The evaluation harness deals
every labeled video into k folds — stratified, so each fold keeps the
corpus's class balance — then trains k networks, each tested on the fold
it never saw.  The report shows accuracy, precision, recall, and F1 per
fold (irrelevant/relevant order) plus their arithmetic means.

Run:  python3 demos/05_crossval_report.py
"""

from collections import Counter

from whalesift.corpus import Label
from whalesift.evaluation import render_report, run_crossval, stratified_folds
from whalesift.seqclassifier import TrainConfig
from whalesift.synthetic import SyntheticSpec, generate

# ---------------------------------------------------------------------------
# The fold dealer, in isolation: 23 irrelevant + 20 relevant videos into
# k=4 folds. Every class spreads as evenly as arithmetic allows (sizes
# differ by at most one), and a fixed seed always deals the same hands.
labels = {f"i{n:03d}": Label.IRRELEVANT for n in range(23)}
labels.update({f"r{n:03d}": Label.RELEVANT for n in range(20)})
spec = stratified_folds(labels, k=4, seed=0)

per_fold = Counter(spec.assignment.values())
print("fold sizes for 23+20 videos at k=4:", [per_fold[f] for f in range(4)])
for fold in range(4):
    members = spec.fold_ids(fold)
    irr = sum(labels[v] is Label.IRRELEVANT for v in members)
    print(f"  fold {fold}: {irr} irrelevant + {len(members) - irr} relevant")

# ---------------------------------------------------------------------------
# Full harness on a synthetic feature corpus: 60 sequences, 3 folds.
# (The shipped defaults — 31 frames, k=5, 30 epochs — run in a couple of
# minutes; this demo shrinks everything to finish in seconds.)
data = generate(SyntheticSpec(count=60, frame_count=16, feature_dim=8, seed=1))
features = {seq.local_id: seq.features for seq, _ in data}
truth = {seq.local_id: label for seq, label in data}

summary, fold_spec = run_crossval(
    features,
    truth,
    k=3,
    seed=0,
    config=TrainConfig(epochs=40, batch_size=4, seed=0),
)

print("\n" + render_report(summary, "text"))
print("same table as CSV:\n")
print(render_report(summary, "csv"))
