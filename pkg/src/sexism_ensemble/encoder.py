"""A small BERT-style encoder classifier in numpy with hand-written backward pass.

Layer structure (post-LN, as in BERT)::

    x = dropout(tok[ids] + pos)
    for each layer:
        h = LN1(x + dropout(MHA(x)))
        x = LN2(h + dropout(W2 gelu(W1 h)))
    logits = x[CLS] @ head_w + head_b

Everything is float64. Padding keys get ``-inf`` scores before the softmax,
so padded positions never influence a real one.
"""

from __future__ import annotations

import json
import math
import os
import struct
from dataclasses import asdict, dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import CheckpointError, ConfigError, InputError, NumericalError
from .io import atomic_write_bytes
from .tokenizer import TokenSequence, stack

CHECKPOINT_VERSION = 1
CHECKPOINT_MAGIC = b"SXEC"
LN_EPS = 1e-5
_GELU_C = math.sqrt(2.0 / math.pi)


@dataclass(frozen=True)
class ModelConfig:
    vocab_size: int
    max_len: int = 64
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    n_classes: int = 2
    dropout_rate: float = 0.1

    def validate(self) -> None:
        for name in ("vocab_size", "max_len", "d_model", "n_heads", "n_layers", "d_ff", "n_classes"):
            if getattr(self, name) < 1:
                raise ConfigError(f"{name} must be >= 1")
        if self.d_model % self.n_heads:
            raise ConfigError(f"d_model {self.d_model} not divisible by n_heads {self.n_heads}")
        if self.n_classes not in (2, 5):
            raise ConfigError(f"n_classes must be 2 or 5, got {self.n_classes}")
        if not 0.0 <= self.dropout_rate < 1.0:
            raise ConfigError(f"dropout_rate must be in [0, 1), got {self.dropout_rate}")


def parameter_shapes(config: ModelConfig) -> list[tuple[str, tuple[int, ...]]]:
    """Parameter names and shapes in checkpoint order."""
    d, f = config.d_model, config.d_ff
    shapes = [
        ("token_embeddings", (config.vocab_size, d)),
        ("position_embeddings", (config.max_len, d)),
    ]
    for i in range(config.n_layers):
        p = f"layers.{i}."
        shapes += [
            (p + "wq", (d, d)), (p + "bq", (d,)),
            (p + "wk", (d, d)), (p + "bk", (d,)),
            (p + "wv", (d, d)), (p + "bv", (d,)),
            (p + "wo", (d, d)), (p + "bo", (d,)),
            (p + "ln1_g", (d,)), (p + "ln1_b", (d,)),
            (p + "w1", (d, f)), (p + "b1", (f,)),
            (p + "w2", (f, d)), (p + "b2", (d,)),
            (p + "ln2_g", (d,)), (p + "ln2_b", (d,)),
        ]
    shapes += [("head_w", (d, config.n_classes)), ("head_b", (config.n_classes,))]
    return shapes


@dataclass
class ClassifierModel:
    config: ModelConfig
    params: dict[str, np.ndarray]
    seed: int

    def copy(self) -> "ClassifierModel":
        return ClassifierModel(self.config, {k: v.copy() for k, v in self.params.items()}, self.seed)

    def num_parameters(self) -> int:
        return sum(v.size for v in self.params.values())

    def to_bytes(self) -> bytes:
        return checkpoint_bytes(self)


@dataclass(frozen=True)
class Prediction:
    probabilities: np.ndarray
    label_index: int


EMBEDDING_STD = 0.02


def init_model(config: ModelConfig, seed: int) -> ClassifierModel:
    """Seeded initialisation: Glorot-uniform matrices, N(0, 0.02) embeddings,
    zero biases, unit layer-norm gains."""
    config.validate()
    rng = np.random.default_rng(seed)
    params = {}
    for name, shape in parameter_shapes(config):
        leaf = name.rsplit(".", 1)[-1]
        if name.endswith("embeddings"):
            params[name] = rng.normal(0.0, EMBEDDING_STD, size=shape)
        elif leaf.endswith("_g"):
            params[name] = np.ones(shape)
        elif len(shape) == 2:
            limit = math.sqrt(6.0 / (shape[0] + shape[1]))
            params[name] = rng.uniform(-limit, limit, size=shape)
        else:
            params[name] = np.zeros(shape)
    return ClassifierModel(config, params, seed)


# --- building blocks -------------------------------------------------------


def _softmax(x: np.ndarray, axis: int = -1) -> np.ndarray:
    shifted = x - np.max(x, axis=axis, keepdims=True)
    e = np.exp(shifted)
    return e / np.sum(e, axis=axis, keepdims=True)


def _gelu(x):
    inner = _GELU_C * (x + 0.044715 * (x * x * x))
    t = np.tanh(inner)
    return 0.5 * x * (1.0 + t), t


def _gelu_grad(x, t):
    dinner = _GELU_C * (1.0 + 3 * 0.044715 * (x * x))
    return 0.5 * (1.0 + t) + 0.5 * x * (1.0 - t * t) * dinner


def _layer_norm(x, g, b):
    mu = x.mean(axis=-1, keepdims=True)
    xc = x - mu
    inv = 1.0 / np.sqrt((xc**2).mean(axis=-1, keepdims=True) + LN_EPS)
    xhat = xc * inv
    return xhat * g + b, (xhat, inv)


def _layer_norm_backward(dy, g, cache):
    xhat, inv = cache
    dxhat = dy * g
    dx = inv * (dxhat - dxhat.mean(axis=-1, keepdims=True)
                - xhat * (dxhat * xhat).mean(axis=-1, keepdims=True))
    lead = tuple(range(dy.ndim - 1))
    return dx, (dy * xhat).sum(axis=lead), dy.sum(axis=lead)


def _dropout(x, rate, rng):
    if rng is None or rate == 0.0:
        return x, None
    keep = (rng.random(x.shape) >= rate) / (1.0 - rate)
    return x * keep, keep


def _outer_sum(a, b):
    """``sum_{batch, time} a^T b`` for ``(B, T, m)`` and ``(B, T, n)`` inputs."""
    return a.reshape(-1, a.shape[-1]).T @ b.reshape(-1, b.shape[-1])


def _split_heads(x, h):
    b, t, d = x.shape
    return x.reshape(b, t, h, d // h).transpose(0, 2, 1, 3)


def _merge_heads(x):
    b, h, t, dh = x.shape
    return x.transpose(0, 2, 1, 3).reshape(b, t, h * dh)


# --- forward / backward ----------------------------------------------------


def forward_batch(
    model: ClassifierModel,
    ids: np.ndarray,
    mask: np.ndarray,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[np.ndarray, dict]:
    """Class probabilities ``(B, n_classes)`` plus the activation tape.

    The batch is cropped to its longest real sequence; cropped columns are
    padding and cannot change the result. Dropout runs only when
    ``train_mode`` is set and draws from ``rng``.
    """
    cfg, P = model.config, model.params
    ids = np.asarray(ids)
    mask = np.asarray(mask, dtype=bool)
    if ids.ndim != 2 or ids.shape != mask.shape:
        raise InputError(f"ids/mask must be matching 2-D arrays, got {ids.shape} and {mask.shape}")
    if ids.shape[1] != cfg.max_len:
        raise InputError(f"sequence length {ids.shape[1]} != model max_len {cfg.max_len}")
    if ids.size and (ids.min() < 0 or ids.max() >= cfg.vocab_size):
        raise InputError(f"token id out of range [0, {cfg.vocab_size})")
    if not mask[:, 0].all():
        raise InputError("position 0 (CLS) must be unmasked")
    if train_mode and rng is None:
        rng = np.random.default_rng(model.seed)
    drop_rng = rng if train_mode else None

    t_used = int(mask.sum(axis=1).max())
    ids, mask = ids[:, :t_used], mask[:, :t_used]
    rate = cfg.dropout_rate
    h = cfg.n_heads
    scale = 1.0 / math.sqrt(cfg.d_model // h)
    key_bias = np.where(mask, 0.0, -np.inf)[:, None, None, :]

    x = P["token_embeddings"][ids] + P["position_embeddings"][:t_used]
    x, keep0 = _dropout(x, rate, drop_rng)
    tape = {"ids": ids, "t_used": t_used, "keep0": keep0, "layers": []}
    for i in range(cfg.n_layers):
        p = f"layers.{i}."
        q = _split_heads(x @ P[p + "wq"] + P[p + "bq"], h)
        k = _split_heads(x @ P[p + "wk"] + P[p + "bk"], h)
        v = _split_heads(x @ P[p + "wv"] + P[p + "bv"], h)
        att = _softmax(q @ k.transpose(0, 1, 3, 2) * scale + key_bias)
        ctx = _merge_heads(att @ v)
        o, keep1 = _dropout(ctx @ P[p + "wo"] + P[p + "bo"], rate, drop_rng)
        hid, ln1 = _layer_norm(x + o, P[p + "ln1_g"], P[p + "ln1_b"])
        f1 = hid @ P[p + "w1"] + P[p + "b1"]
        g, tanh_f1 = _gelu(f1)
        f2, keep2 = _dropout(g @ P[p + "w2"] + P[p + "b2"], rate, drop_rng)
        out, ln2 = _layer_norm(hid + f2, P[p + "ln2_g"], P[p + "ln2_b"])
        tape["layers"].append(
            dict(x=x, q=q, k=k, v=v, att=att, ctx=ctx, keep1=keep1, ln1=ln1, hid=hid,
                 f1=f1, g=g, tanh_f1=tanh_f1, keep2=keep2, ln2=ln2)
        )
        x = out
    cls = x[:, 0, :]
    logits = cls @ P["head_w"] + P["head_b"]
    probs = _softmax(logits)
    tape["cls"] = cls
    tape["probs"] = probs
    return probs, tape


def backward(model: ClassifierModel, tape: dict, labels: np.ndarray) -> dict[str, np.ndarray]:
    """Gradients of the mean cross-entropy w.r.t. every parameter."""
    cfg, P = model.config, model.params
    probs = tape["probs"]
    b = probs.shape[0]
    h = cfg.n_heads
    scale = 1.0 / math.sqrt(cfg.d_model // h)
    grads = {name: np.zeros_like(val) for name, val in P.items()}

    dlogits = probs.copy()
    dlogits[np.arange(b), labels] -= 1.0
    dlogits /= b
    grads["head_w"] = tape["cls"].T @ dlogits
    grads["head_b"] = dlogits.sum(axis=0)
    dx = np.zeros((b, tape["t_used"], cfg.d_model))
    dx[:, 0, :] = dlogits @ P["head_w"].T

    for i in reversed(range(cfg.n_layers)):
        p = f"layers.{i}."
        c = tape["layers"][i]
        dr2, grads[p + "ln2_g"], grads[p + "ln2_b"] = _layer_norm_backward(dx, P[p + "ln2_g"], c["ln2"])
        df2 = dr2 if c["keep2"] is None else dr2 * c["keep2"]
        grads[p + "w2"] = _outer_sum(c["g"], df2)
        grads[p + "b2"] = df2.sum(axis=(0, 1))
        df1 = (df2 @ P[p + "w2"].T) * _gelu_grad(c["f1"], c["tanh_f1"])
        grads[p + "w1"] = _outer_sum(c["hid"], df1)
        grads[p + "b1"] = df1.sum(axis=(0, 1))
        dhid = dr2 + df1 @ P[p + "w1"].T

        dr1, grads[p + "ln1_g"], grads[p + "ln1_b"] = _layer_norm_backward(dhid, P[p + "ln1_g"], c["ln1"])
        do = dr1 if c["keep1"] is None else dr1 * c["keep1"]
        grads[p + "wo"] = _outer_sum(c["ctx"], do)
        grads[p + "bo"] = do.sum(axis=(0, 1))
        dctx = _split_heads(do @ P[p + "wo"].T, h)
        att = c["att"]
        datt = dctx @ c["v"].transpose(0, 1, 3, 2)
        dv = att.transpose(0, 1, 3, 2) @ dctx
        dscores = att * (datt - (datt * att).sum(axis=-1, keepdims=True)) * scale
        dq = dscores @ c["k"]
        dk = dscores.transpose(0, 1, 3, 2) @ c["q"]
        x_in = c["x"]
        dx = dr1
        for name, dproj in (("q", dq), ("k", dk), ("v", dv)):
            dproj = _merge_heads(dproj)
            grads[p + "w" + name] = _outer_sum(x_in, dproj)
            grads[p + "b" + name] = dproj.sum(axis=(0, 1))
            dx = dx + dproj @ P[p + "w" + name].T

    if tape["keep0"] is not None:
        dx = dx * tape["keep0"]
    np.add.at(grads["token_embeddings"], tape["ids"], dx)
    grads["position_embeddings"][: tape["t_used"]] = dx.sum(axis=0)
    return grads


def loss_and_grad(
    model: ClassifierModel,
    batch: Sequence[tuple[TokenSequence, int]],
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[float, dict[str, np.ndarray]]:
    """Mean cross-entropy over ``batch`` and its exact gradient."""
    if not batch:
        raise InputError("empty batch")
    ids, mask = stack([s for s, _ in batch])
    labels = np.array([lab for _, lab in batch], dtype=np.int64)
    return loss_and_grad_arrays(model, ids, mask, labels, train_mode, rng)


def loss_and_grad_arrays(model, ids, mask, labels, train_mode=False, rng=None):
    labels = np.asarray(labels, dtype=np.int64)
    if labels.min() < 0 or labels.max() >= model.config.n_classes:
        raise InputError(f"labels must be in [0, {model.config.n_classes})")
    probs, tape = forward_batch(model, ids, mask, train_mode, rng)
    with np.errstate(divide="ignore"):
        loss = float(-np.mean(np.log(probs[np.arange(len(labels)), labels])))
    if not math.isfinite(loss):
        raise NumericalError(
            f"non-finite loss {loss}; min gold probability "
            f"{probs[np.arange(len(labels)), labels].min():.3e}"
        )
    return loss, backward(model, tape, labels)


def forward(
    model: ClassifierModel,
    seq: TokenSequence,
    train_mode: bool = False,
    rng: Optional[np.random.Generator] = None,
) -> tuple[Prediction, dict]:
    probs, tape = forward_batch(model, seq.ids[None, :], seq.mask[None, :], train_mode, rng)
    p = probs[0]
    return Prediction(p, int(np.argmax(p))), tape


def predict_proba(model: ClassifierModel, seqs: Sequence[TokenSequence], batch_size: int = 64) -> np.ndarray:
    """Inference-mode probabilities, ``(len(seqs), n_classes)``."""
    if not seqs:
        return np.zeros((0, model.config.n_classes))
    out = []
    for start in range(0, len(seqs), batch_size):
        ids, mask = stack(seqs[start : start + batch_size])
        out.append(forward_batch(model, ids, mask)[0])
    return np.concatenate(out)


def predict(model: ClassifierModel, seqs: Sequence[TokenSequence]) -> list[Prediction]:
    return [Prediction(p, int(np.argmax(p))) for p in predict_proba(model, seqs)]


# --- checkpoints -----------------------------------------------------------
#
# Layout: version byte, magic "SXEC", u32 little-endian header length, UTF-8 JSON
# header {config, seed, tensors: [[name, shape], ...]}, then each tensor as raw
# little-endian float64 in header order.


def checkpoint_bytes(model: ClassifierModel) -> bytes:
    shapes = parameter_shapes(model.config)
    header = json.dumps(
        {"config": asdict(model.config), "seed": model.seed,
         "tensors": [[name, list(shape)] for name, shape in shapes]},
        sort_keys=True, separators=(",", ":"),
    ).encode("utf-8")
    chunks = [bytes([CHECKPOINT_VERSION]), CHECKPOINT_MAGIC, struct.pack("<I", len(header)), header]
    for name, shape in shapes:
        arr = model.params[name]
        if arr.shape != shape:
            raise CheckpointError(f"parameter {name} has shape {arr.shape}, expected {shape}")
        chunks.append(np.ascontiguousarray(arr, dtype="<f8").tobytes())
    return b"".join(chunks)


def save_checkpoint(model: ClassifierModel, path: str | os.PathLike) -> None:
    atomic_write_bytes(path, checkpoint_bytes(model))


def model_from_bytes(data: bytes, origin: str = "<bytes>") -> ClassifierModel:
    try:
        if len(data) < 9 or data[0] != CHECKPOINT_VERSION or data[1:5] != CHECKPOINT_MAGIC:
            raise CheckpointError(f"{origin}: not a version-{CHECKPOINT_VERSION} checkpoint")
        (hlen,) = struct.unpack("<I", data[5:9])
        header = json.loads(data[9 : 9 + hlen].decode("utf-8"))
        config = ModelConfig(**header["config"])
        config.validate()
        expected = [[n, list(s)] for n, s in parameter_shapes(config)]
        if header["tensors"] != expected:
            raise CheckpointError(f"{origin}: tensor table does not match config")
        offset = 9 + hlen
        params = {}
        for name, shape in parameter_shapes(config):
            n = int(np.prod(shape)) * 8
            chunk = data[offset : offset + n]
            if len(chunk) != n:
                raise CheckpointError(f"{origin}: truncated at tensor {name}")
            params[name] = np.frombuffer(chunk, dtype="<f8").astype(np.float64).reshape(shape)
            offset += n
        if offset != len(data):
            raise CheckpointError(f"{origin}: {len(data) - offset} trailing bytes")
        return ClassifierModel(config, params, int(header["seed"]))
    except CheckpointError:
        raise
    except (ValueError, KeyError, TypeError, UnicodeDecodeError, struct.error, ConfigError) as exc:
        raise CheckpointError(f"{origin}: unreadable checkpoint ({exc})") from None


def load_checkpoint(path: str | os.PathLike) -> ClassifierModel:
    try:
        with open(path, "rb") as fh:
            data = fh.read()
    except OSError as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from None
    return model_from_bytes(data, str(path))
