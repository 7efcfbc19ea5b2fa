"""Two stacked GRU layers, dropout, and a two-layer dense head over
{irrelevant, relevant}, trained with sparse categorical cross-entropy.

Gate equations (fixed convention; the "reset-after" variant is deliberately
not used):

    z = sigmoid(x W_z + h_prev U_z + b_z)
    r = sigmoid(x W_r + h_prev U_r + b_r)
    c = tanh(x W_h + (r * h_prev) U_h + b_h)
    h = z * h_prev + (1 - z) * c

The first layer returns its full state sequence to feed the second; the
second returns only its final state.  Gradients are accumulated analytically
through the unrolled sequence (reverse mode, fixed reduction order), so
training is deterministic given the seed.  All math is float64; checkpoints
store float32.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .corpus import Label
from .errors import WhalesiftError

DROPOUT_RATE = 0.4
LOSS_EPS = 1e-12

CHECKPOINT_SCHEMA = 1


class CheckpointError(WhalesiftError):
    """Checkpoint file unreadable or inconsistent."""


def _sigmoid(a: np.ndarray) -> np.ndarray:
    out = np.empty_like(a)
    pos = a >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-a[pos]))
    ea = np.exp(a[~pos])
    out[~pos] = ea / (1.0 + ea)
    return out


@dataclass
class GruParams:
    """One GRU layer's weights: input (D_in x H), recurrent (H x H), bias (H)."""

    W_z: np.ndarray
    W_r: np.ndarray
    W_h: np.ndarray
    U_z: np.ndarray
    U_r: np.ndarray
    U_h: np.ndarray
    b_z: np.ndarray
    b_r: np.ndarray
    b_h: np.ndarray

    def __post_init__(self) -> None:
        d_in, h = self.W_z.shape
        for name in ("W_r", "W_h"):
            if getattr(self, name).shape != (d_in, h):
                raise ValueError(f"{name} shape mismatch")
        for name in ("U_z", "U_r", "U_h"):
            if getattr(self, name).shape != (h, h):
                raise ValueError(f"{name} shape mismatch")
        for name in ("b_z", "b_r", "b_h"):
            if getattr(self, name).shape != (h,):
                raise ValueError(f"{name} shape mismatch")

    @property
    def d_in(self) -> int:
        return self.W_z.shape[0]

    @property
    def hidden(self) -> int:
        return self.W_z.shape[1]

    def zeros_like(self) -> "GruParams":
        return GruParams(*(np.zeros_like(getattr(self, f)) for f in GRU_FIELDS))


GRU_FIELDS = ("W_z", "W_r", "W_h", "U_z", "U_r", "U_h", "b_z", "b_r", "b_h")


@dataclass
class NetworkParams:
    """All weights of the GRU-GRU-dropout-dense-dense classifier.

    Output dimension is exactly 2: index 0 irrelevant, 1 relevant.
    """

    gru1: GruParams
    gru2: GruParams
    dense1_w: np.ndarray
    dense1_b: np.ndarray
    dense2_w: np.ndarray
    dense2_b: np.ndarray
    dropout_rate: float = DROPOUT_RATE

    def __post_init__(self) -> None:
        if self.gru2.d_in != self.gru1.hidden:
            raise ValueError("gru2 input dim must equal gru1 hidden dim")
        if self.dense1_w.shape[0] != self.gru2.hidden:
            raise ValueError("dense1 input dim must equal gru2 hidden dim")
        if self.dense1_w.shape[1] != self.dense1_b.shape[0]:
            raise ValueError("dense1 bias shape mismatch")
        if self.dense2_w.shape != (self.dense1_w.shape[1], 2):
            raise ValueError("dense2 must map to exactly 2 classes")
        if self.dense2_b.shape != (2,):
            raise ValueError("dense2 bias must have 2 entries")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ValueError("dropout_rate must be in [0, 1)")

    @property
    def d_in(self) -> int:
        return self.gru1.d_in

    @property
    def hidden_sizes(self) -> tuple[int, int, int]:
        return (self.gru1.hidden, self.gru2.hidden, self.dense1_w.shape[1])


def param_items(net: NetworkParams) -> list[tuple[str, np.ndarray]]:
    """(name, array) pairs in the declared checkpoint order."""
    items = []
    for prefix, gru in (("gru1", net.gru1), ("gru2", net.gru2)):
        for name in GRU_FIELDS:
            items.append((f"{prefix}.{name}", getattr(gru, name)))
    items += [
        ("dense1_w", net.dense1_w),
        ("dense1_b", net.dense1_b),
        ("dense2_w", net.dense2_w),
        ("dense2_b", net.dense2_b),
    ]
    return items


def _glorot(rng: np.random.Generator, fan_in: int, fan_out: int) -> np.ndarray:
    limit = np.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-limit, limit, size=(fan_in, fan_out))


def _orthogonal(rng: np.random.Generator, n: int) -> np.ndarray:
    a = rng.standard_normal((n, n))
    q, r = np.linalg.qr(a)
    # Fix signs so the decomposition (and hence the init) is unique.
    return q * np.sign(np.diag(r))


def _init_gru(rng: np.random.Generator, d_in: int, hidden: int) -> GruParams:
    return GruParams(
        W_z=_glorot(rng, d_in, hidden),
        W_r=_glorot(rng, d_in, hidden),
        W_h=_glorot(rng, d_in, hidden),
        U_z=_orthogonal(rng, hidden),
        U_r=_orthogonal(rng, hidden),
        U_h=_orthogonal(rng, hidden),
        b_z=np.zeros(hidden),
        b_r=np.zeros(hidden),
        b_h=np.zeros(hidden),
    )


def init_params(
    d_in: int,
    hidden_sizes: tuple[int, int, int] = (16, 8, 8),
    seed: int = 0,
    rng: np.random.Generator | None = None,
    dropout_rate: float = DROPOUT_RATE,
) -> NetworkParams:
    """Deterministic initialization: Glorot-uniform inputs, orthogonal recurrences."""
    h1, h2, h3 = hidden_sizes
    if rng is None:
        rng = np.random.default_rng(seed)
    return NetworkParams(
        gru1=_init_gru(rng, d_in, h1),
        gru2=_init_gru(rng, h1, h2),
        dense1_w=_glorot(rng, h2, h3),
        dense1_b=np.zeros(h3),
        dense2_w=_glorot(rng, h3, 2),
        dense2_b=np.zeros(2),
        dropout_rate=dropout_rate,
    )


# -- forward ------------------------------------------------------------------


def gru_cell(p: GruParams, x: np.ndarray, h_prev: np.ndarray) -> np.ndarray:
    """One GRU step; accepts (D,) vectors or (B, D) batches."""
    if x.shape[-1] != p.d_in or h_prev.shape[-1] != p.hidden:
        raise ValueError(
            f"shape mismatch: x {x.shape}, h_prev {h_prev.shape}, "
            f"cell ({p.d_in} -> {p.hidden})"
        )
    z = _sigmoid(x @ p.W_z + h_prev @ p.U_z + p.b_z)
    r = _sigmoid(x @ p.W_r + h_prev @ p.U_r + p.b_r)
    c = np.tanh(x @ p.W_h + (r * h_prev) @ p.U_h + p.b_h)
    return z * h_prev + (1.0 - z) * c


def gru_layer(p: GruParams, sequence: np.ndarray, return_full: bool = True) -> np.ndarray:
    """Run a (T, D) sequence from h_0 = 0; full (T, H) states or the final one."""
    if sequence.ndim != 2:
        raise ValueError(f"expected (T, D) sequence, got shape {sequence.shape}")
    if sequence.shape[0] < 1:
        raise ValueError("empty sequence")
    h = np.zeros(p.hidden)
    states = np.empty((sequence.shape[0], p.hidden))
    for t in range(sequence.shape[0]):
        h = gru_cell(p, sequence[t], h)
        states[t] = h
    return states if return_full else h


def _gru_forward_batch(p: GruParams, x: np.ndarray) -> tuple[np.ndarray, dict]:
    """x: (B, T, D) -> states (B, T, H) plus the cache for backprop."""
    b, t_len, _ = x.shape
    h = np.zeros((b, p.hidden))
    hs = np.empty((b, t_len, p.hidden))
    zs = np.empty_like(hs)
    rs = np.empty_like(hs)
    cs = np.empty_like(hs)
    for t in range(t_len):
        xt = x[:, t]
        z = _sigmoid(xt @ p.W_z + h @ p.U_z + p.b_z)
        r = _sigmoid(xt @ p.W_r + h @ p.U_r + p.b_r)
        c = np.tanh(xt @ p.W_h + (r * h) @ p.U_h + p.b_h)
        h = z * h + (1.0 - z) * c
        zs[:, t], rs[:, t], cs[:, t], hs[:, t] = z, r, c, h
    return hs, {"x": x, "h": hs, "z": zs, "r": rs, "c": cs}


def _gru_backward_batch(
    p: GruParams, cache: dict, d_out: np.ndarray
) -> tuple[np.ndarray, GruParams]:
    """Reverse-mode through the unrolled layer.

    ``d_out``: (B, T, H) gradient on every emitted state (zeros where unused).
    Returns (dx, parameter gradients).
    """
    x, hs, zs, rs, cs = cache["x"], cache["h"], cache["z"], cache["r"], cache["c"]
    b, t_len, _ = x.shape
    grads = p.zeros_like()
    dx = np.zeros_like(x)
    dh_next = np.zeros((b, p.hidden))
    for t in range(t_len - 1, -1, -1):
        dh = d_out[:, t] + dh_next
        h_prev = hs[:, t - 1] if t > 0 else np.zeros((b, p.hidden))
        z, r, c, xt = zs[:, t], rs[:, t], cs[:, t], x[:, t]

        dz = dh * (h_prev - c)
        dc = dh * (1.0 - z)
        da_c = dc * (1.0 - c * c)
        da_z = dz * z * (1.0 - z)
        drh = da_c @ p.U_h.T  # gradient w.r.t. (r * h_prev)
        dr = drh * h_prev
        da_r = dr * r * (1.0 - r)

        dx[:, t] = da_z @ p.W_z.T + da_r @ p.W_r.T + da_c @ p.W_h.T
        dh_next = dh * z + da_z @ p.U_z.T + da_r @ p.U_r.T + drh * r

        grads.W_z += xt.T @ da_z
        grads.W_r += xt.T @ da_r
        grads.W_h += xt.T @ da_c
        grads.U_z += h_prev.T @ da_z
        grads.U_r += h_prev.T @ da_r
        grads.U_h += (r * h_prev).T @ da_c
        grads.b_z += da_z.sum(axis=0)
        grads.b_r += da_r.sum(axis=0)
        grads.b_h += da_c.sum(axis=0)
    return dx, grads


def softmax(logits: np.ndarray) -> np.ndarray:
    """Shift-invariant softmax over the last axis."""
    if not np.all(np.isfinite(logits)):
        raise ValueError("non-finite logits")
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=-1, keepdims=True)


def sparse_ce(probs: np.ndarray, label: Label | int) -> float:
    """-ln(probs[label]), clamped at 1e-12 so a zero probability stays finite."""
    idx = int(label)
    if idx not in (0, 1):
        raise ValueError(f"invalid label index {idx}")
    return float(-np.log(max(float(probs[idx]), LOSS_EPS)))


def _forward_batch(
    net: NetworkParams, x: np.ndarray, dropout_mask: np.ndarray | None
) -> tuple[np.ndarray, dict]:
    """x: (B, T, D) -> probs (B, 2) + cache.

    ``dropout_mask`` is the already-scaled multiplier on gru2's final state
    (None means eval: identity).
    """
    h1_seq, cache1 = _gru_forward_batch(net.gru1, x)
    h2_seq, cache2 = _gru_forward_batch(net.gru2, h1_seq)
    h2 = h2_seq[:, -1]
    y = h2 if dropout_mask is None else h2 * dropout_mask
    s1 = y @ net.dense1_w + net.dense1_b
    a1 = np.maximum(s1, 0.0)
    logits = a1 @ net.dense2_w + net.dense2_b
    probs = softmax(logits)
    cache = {
        "cache1": cache1,
        "cache2": cache2,
        "mask": dropout_mask,
        "y": y,
        "s1": s1,
        "a1": a1,
        "probs": probs,
    }
    return probs, cache


def _draw_dropout_mask(
    net: NetworkParams, shape: tuple[int, int], rng: np.random.Generator
) -> np.ndarray:
    """Inverted-dropout multiplier: keep/(1-rate), drop/0."""
    keep = rng.random(shape) >= net.dropout_rate
    return keep.astype(np.float64) / (1.0 - net.dropout_rate)


def forward(
    net: NetworkParams,
    features: np.ndarray,
    mode: str = "eval",
    rng: np.random.Generator | None = None,
    dropout_mask: np.ndarray | None = None,
) -> tuple[np.ndarray, dict | None]:
    """Classify one (T, D) feature sequence.

    Eval mode is deterministic (dropout is an identity).  Train mode applies
    the already-scaled ``dropout_mask`` if given, else draws one from ``rng``;
    it also returns the cached activations for backprop.
    """
    if features.ndim != 2:
        raise ValueError(f"expected (T, D) features, got shape {features.shape}")
    if features.shape[1] != net.d_in:
        raise ValueError(
            f"feature dim {features.shape[1]} does not match network input {net.d_in}"
        )
    x = features.astype(np.float64)[np.newaxis]
    if mode == "eval":
        mask = None
    elif mode == "train":
        if dropout_mask is not None:
            mask = np.asarray(dropout_mask, dtype=np.float64).reshape(1, net.gru2.hidden)
        else:
            if rng is None:
                raise ValueError("train mode needs an rng or an explicit dropout_mask")
            mask = _draw_dropout_mask(net, (1, net.gru2.hidden), rng)
    else:
        raise ValueError(f"unknown mode {mode!r}")
    probs, cache = _forward_batch(net, x, mask)
    return probs[0], (cache if mode == "train" else None)


@dataclass(frozen=True)
class Prediction:
    probs: tuple[float, float]
    label: Label
    confidence: float

    def __post_init__(self) -> None:
        if abs(self.probs[0] + self.probs[1] - 1.0) > 1e-6:
            raise ValueError("probs must sum to 1")
        if self.probs[0] < 0 or self.probs[1] < 0:
            raise ValueError("probs must be non-negative")


def predict(net: NetworkParams, features: np.ndarray) -> Prediction:
    """Eval-mode classification; an exact tie goes to relevant.

    A false relevant costs a reviewer seconds; a false irrelevant loses an
    encounter.
    """
    probs, _ = forward(net, features, mode="eval")
    label = Label.RELEVANT if probs[1] >= probs[0] else Label.IRRELEVANT
    return Prediction(
        probs=(float(probs[0]), float(probs[1])),
        label=label,
        confidence=float(probs[int(label)]),
    )


# -- gradients ------------------------------------------------------------------


@dataclass
class NetworkGrads:
    gru1: GruParams
    gru2: GruParams
    dense1_w: np.ndarray
    dense1_b: np.ndarray
    dense2_w: np.ndarray
    dense2_b: np.ndarray


def _zero_grads(net: NetworkParams) -> NetworkGrads:
    return NetworkGrads(
        gru1=net.gru1.zeros_like(),
        gru2=net.gru2.zeros_like(),
        dense1_w=np.zeros_like(net.dense1_w),
        dense1_b=np.zeros_like(net.dense1_b),
        dense2_w=np.zeros_like(net.dense2_w),
        dense2_b=np.zeros_like(net.dense2_b),
    )


def grad_items(grads: NetworkGrads) -> list[tuple[str, np.ndarray]]:
    items = []
    for prefix, gru in (("gru1", grads.gru1), ("gru2", grads.gru2)):
        for name in GRU_FIELDS:
            items.append((f"{prefix}.{name}", getattr(gru, name)))
    items += [
        ("dense1_w", grads.dense1_w),
        ("dense1_b", grads.dense1_b),
        ("dense2_w", grads.dense2_w),
        ("dense2_b", grads.dense2_b),
    ]
    return items


def gradients(
    net: NetworkParams,
    batch: list[tuple[np.ndarray, Label | int]],
    dropout_mask: np.ndarray | None = None,
) -> tuple[NetworkGrads, float]:
    """Gradient of the mean loss over a batch w.r.t. every parameter.

    Dropout is off unless an explicit (already-scaled) mask is supplied, so
    the result is checkable against finite differences.
    """
    if not batch:
        raise ValueError("empty batch")
    feats = [np.asarray(f, dtype=np.float64) for f, _ in batch]
    labels = np.array([int(label) for _, label in batch])
    dims = {f.shape for f in feats}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature shapes in batch: {sorted(dims)}")
    x = np.stack(feats)
    b = x.shape[0]

    if dropout_mask is not None:
        dropout_mask = np.broadcast_to(
            np.asarray(dropout_mask, dtype=np.float64), (b, net.gru2.hidden)
        )

    probs, cache = _forward_batch(net, x, dropout_mask)
    clamped = np.maximum(probs[np.arange(b), labels], LOSS_EPS)
    mean_loss = float(-np.log(clamped).mean())

    # Softmax + cross-entropy collapse to (probs - one_hot) / B.
    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b

    grads = _zero_grads(net)
    a1, s1, y, mask = cache["a1"], cache["s1"], cache["y"], cache["mask"]
    grads.dense2_w[:] = a1.T @ dlogits
    grads.dense2_b[:] = dlogits.sum(axis=0)
    da1 = dlogits @ net.dense2_w.T
    ds1 = da1 * (s1 > 0)
    grads.dense1_w[:] = y.T @ ds1
    grads.dense1_b[:] = ds1.sum(axis=0)
    dy = ds1 @ net.dense1_w.T
    dh2_final = dy if mask is None else dy * mask

    t_len = x.shape[1]
    d_out2 = np.zeros((b, t_len, net.gru2.hidden))
    d_out2[:, -1] = dh2_final
    dh1_seq, g2 = _gru_backward_batch(net.gru2, cache["cache2"], d_out2)
    _, g1 = _gru_backward_batch(net.gru1, cache["cache1"], dh1_seq)
    grads.gru1, grads.gru2 = g1, g2
    return grads, mean_loss


# -- training ------------------------------------------------------------------


@dataclass(frozen=True)
class TrainConfig:
    """Adaptive-moment optimizer settings plus the training loop knobs."""

    learning_rate: float = 1e-3
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-7
    epochs: int = 30
    batch_size: int = 16
    seed: int = 0
    dropout: bool = True
    shuffle: bool = True

    def __post_init__(self) -> None:
        if self.learning_rate < 0:
            raise ValueError("learning_rate must be >= 0")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.epochs < 0:
            raise ValueError("epochs must be >= 0")


class AdamOptimizer:
    """Adaptive moment estimation over the flat parameter list."""

    def __init__(self, net: NetworkParams, config: TrainConfig) -> None:
        self.config = config
        self.step_count = 0
        self._m = {name: np.zeros_like(p) for name, p in param_items(net)}
        self._v = {name: np.zeros_like(p) for name, p in param_items(net)}

    def step(self, net: NetworkParams, grads: NetworkGrads) -> None:
        cfg = self.config
        self.step_count += 1
        t = self.step_count
        params = dict(param_items(net))
        for name, g in grad_items(grads):
            m = self._m[name]
            v = self._v[name]
            m *= cfg.beta1
            m += (1.0 - cfg.beta1) * g
            v *= cfg.beta2
            v += (1.0 - cfg.beta2) * g * g
            m_hat = m / (1.0 - cfg.beta1**t)
            v_hat = v / (1.0 - cfg.beta2**t)
            params[name] -= cfg.learning_rate * m_hat / (np.sqrt(v_hat) + cfg.epsilon)


def _as_features(item) -> np.ndarray:
    feats = getattr(item, "features", item)
    return np.asarray(feats, dtype=np.float64)


def train(
    dataset: list[tuple], config: TrainConfig, hidden_sizes: tuple[int, int, int] = (16, 8, 8)
) -> tuple[NetworkParams, list[float]]:
    """Train from scratch; returns the parameters and per-epoch mean loss.

    ``dataset`` items are (features, label) where features is a (T, D) array
    or anything with a ``.features`` attribute.  Everything random
    (initialization, shuffling, dropout masks) flows from ``config.seed``.
    """
    if not dataset:
        raise ValueError("empty dataset")
    feats = [_as_features(f) for f, _ in dataset]
    labels = [Label(int(label)) for _, label in dataset]
    dims = {f.shape[1] for f in feats}
    if len(dims) != 1:
        raise ValueError(f"inconsistent feature dimensions: {sorted(dims)}")

    rng = np.random.default_rng(config.seed)
    net = init_params(dims.pop(), hidden_sizes, rng=rng)
    optimizer = AdamOptimizer(net, config)
    n = len(dataset)

    history: list[float] = []
    for _ in range(config.epochs):
        order = rng.permutation(n) if config.shuffle else np.arange(n)
        loss_sum = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            batch = [(feats[i], labels[i]) for i in idx]
            mask = None
            if config.dropout and net.dropout_rate > 0:
                mask = _draw_dropout_mask(net, (len(idx), net.gru2.hidden), rng)
            grads, loss = gradients(net, batch, dropout_mask=mask)
            optimizer.step(net, grads)
            loss_sum += loss * len(idx)
        history.append(loss_sum / n)
    return net, history


# -- checkpoints -----------------------------------------------------------------
#
# File layout: one line of JSON (shapes, hyperparameters, seed, schema
# version), then the raw little-endian float32 parameter blocks in the
# declared order.


def save_checkpoint(net: NetworkParams, path: str | Path, seed: int | None = None) -> None:
    items = param_items(net)
    header = {
        "schema_version": CHECKPOINT_SCHEMA,
        "kind": "whalesift-checkpoint",
        "d_in": net.d_in,
        "hidden_sizes": list(net.hidden_sizes),
        "dropout_rate": net.dropout_rate,
        "seed": seed,
        "dtype": "float32",
        "byte_order": "little",
        "params": [{"name": name, "shape": list(p.shape)} for name, p in items],
    }
    blob = b"".join(np.ascontiguousarray(p, dtype="<f4").tobytes() for _, p in items)
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(json.dumps(header).encode("utf-8"))
        fh.write(b"\n")
        fh.write(blob)
    tmp.replace(path)


def load_checkpoint(path: str | Path) -> tuple[NetworkParams, dict]:
    try:
        raw = Path(path).read_bytes()
    except OSError as err:
        raise CheckpointError(f"cannot read checkpoint {path}: {err}") from err
    newline = raw.find(b"\n")
    if newline < 0:
        raise CheckpointError(f"checkpoint {path} has no header line")
    try:
        header = json.loads(raw[:newline])
    except json.JSONDecodeError as err:
        raise CheckpointError(f"checkpoint {path} header is not JSON") from err
    if header.get("schema_version") != CHECKPOINT_SCHEMA:
        raise CheckpointError(
            f"checkpoint schema {header.get('schema_version')} unsupported"
        )

    blob = raw[newline + 1 :]
    arrays: dict[str, np.ndarray] = {}
    offset = 0
    for entry in header["params"]:
        shape = tuple(int(s) for s in entry["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + count * 4
        if end > len(blob):
            raise CheckpointError(f"checkpoint {path} is truncated")
        arrays[entry["name"]] = (
            np.frombuffer(blob[offset:end], dtype="<f4").reshape(shape).astype(np.float64)
        )
        offset = end
    if offset != len(blob):
        raise CheckpointError(f"checkpoint {path} has {len(blob) - offset} trailing bytes")

    def gru_from(prefix: str) -> GruParams:
        return GruParams(*(arrays[f"{prefix}.{name}"] for name in GRU_FIELDS))

    net = NetworkParams(
        gru1=gru_from("gru1"),
        gru2=gru_from("gru2"),
        dense1_w=arrays["dense1_w"],
        dense1_b=arrays["dense1_b"],
        dense2_w=arrays["dense2_w"],
        dense2_b=arrays["dense2_b"],
        dropout_rate=float(header.get("dropout_rate", DROPOUT_RATE)),
    )
    return net, header
