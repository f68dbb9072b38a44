"""Adam fine-tuning loop with per-epoch dev evaluation and best-epoch selection."""

from __future__ import annotations

import math
import sys
from dataclasses import dataclass, field
from typing import Optional, Sequence, TextIO

import numpy as np

from . import encoder
from .corpus import SEXIST_CATEGORIES, TASK1_LABELS, TextRecord, require_labels, stratified_split
from .encoder import ClassifierModel, ModelConfig
from .errors import ConfigError, NumericalError, TrainingError
from .textprep import mask_mentions_urls
from .tokenizer import TokenSequence, Vocabulary, encode, stack


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 10
    train_fraction: float = 0.8
    batch_size: int = 16
    learning_rate: float = 1e-3
    adam_beta1: float = 0.9
    adam_beta2: float = 0.999
    adam_epsilon: float = 1e-8
    seeds: tuple[int, ...] = (1, 2, 3)
    max_len: int = 64
    split_seed: int = 0
    d_model: int = 64
    n_heads: int = 4
    n_layers: int = 2
    d_ff: int = 128
    dropout_rate: float = 0.1

    def validate(self) -> None:
        if self.epochs < 1:
            raise ConfigError("epochs must be >= 1")
        if not 0 < self.train_fraction < 1:
            raise ConfigError("train_fraction must be in (0, 1)")
        if self.batch_size < 1:
            raise ConfigError("batch_size must be >= 1")
        if not self.seeds:
            raise ConfigError("at least one seed is required")
        if len(set(self.seeds)) != len(self.seeds):
            raise ConfigError(f"seeds must be pairwise distinct, got {list(self.seeds)}")
        if self.learning_rate <= 0:
            raise ConfigError("learning_rate must be positive")
        if not (0 <= self.adam_beta1 < 1 and 0 <= self.adam_beta2 < 1):
            raise ConfigError("Adam betas must be in [0, 1)")

    def model_config(self, vocab_size: int, n_classes: int) -> ModelConfig:
        return ModelConfig(
            vocab_size=vocab_size, max_len=self.max_len, d_model=self.d_model,
            n_heads=self.n_heads, n_layers=self.n_layers, d_ff=self.d_ff,
            n_classes=n_classes, dropout_rate=self.dropout_rate,
        )


@dataclass
class AdamState:
    first_moment: dict[str, np.ndarray]
    second_moment: dict[str, np.ndarray]
    step_count: int = 0

    @classmethod
    def zeros_like(cls, model: ClassifierModel) -> "AdamState":
        return cls(
            {k: np.zeros_like(v) for k, v in model.params.items()},
            {k: np.zeros_like(v) for k, v in model.params.items()},
        )


def adam_step(model, grads, state, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
    """One bias-corrected Adam update, applied to ``model.params`` in place."""
    for name, g in grads.items():
        if not np.all(np.isfinite(g)):
            raise NumericalError(f"non-finite gradient in {name}")
    state.step_count += 1
    t = state.step_count
    c1 = 1.0 - beta1**t
    c2 = 1.0 - beta2**t
    for name, g in grads.items():
        m = state.first_moment[name]
        v = state.second_moment[name]
        m *= beta1
        m += (1.0 - beta1) * g
        v *= beta2
        v += (1.0 - beta2) * g * g
        model.params[name] -= lr * (m / c1) / (np.sqrt(v / c2) + eps)
    return model, state


def task_classes(task: str) -> tuple[str, ...]:
    """Output classes of a classifier for ``task`` (task2 excludes non-sexist)."""
    if task == "task1":
        return TASK1_LABELS
    if task == "task2":
        return SEXIST_CATEGORIES
    raise ConfigError(f"unknown task {task!r}")


def encode_texts(vocab: Vocabulary, texts: Sequence[str], max_len: int) -> list[TokenSequence]:
    return [encode(vocab, mask_mentions_urls(t), max_len) for t in texts]


@dataclass(frozen=True)
class EpochStats:
    epoch: int
    train_loss: float
    dev_accuracy: float


@dataclass
class TrainResult:
    model: ClassifierModel
    best_dev_accuracy: float
    best_epoch: int
    history: list[EpochStats] = field(default_factory=list)


def accuracy(model: ClassifierModel, seqs: Sequence[TokenSequence], labels: Sequence[int]) -> float:
    if not seqs:
        return float("nan")
    probs = encoder.predict_proba(model, seqs)
    return float(np.mean(np.argmax(probs, axis=1) == np.asarray(labels)))


def fit(
    model: ClassifierModel,
    train: tuple[Sequence[TokenSequence], Sequence[int]],
    dev: tuple[Sequence[TokenSequence], Sequence[int]],
    config: TrainConfig,
    rng: np.random.Generator,
    epochs: Optional[int] = None,
    progress: Optional[TextIO] = None,
    stop_at_train_accuracy: Optional[float] = None,
) -> TrainResult:
    """Run the epoch loop and keep the best-dev-accuracy checkpoint (earliest on ties).

    ``rng`` drives both mini-batch shuffling and dropout. With an empty dev
    set every epoch scores ``nan`` and the last epoch is kept.
    ``stop_at_train_accuracy`` ends training once inference-mode train
    accuracy reaches that value.
    """
    epochs = config.epochs if epochs is None else epochs
    train_ids, train_mask = stack(train[0])
    train_labels = np.asarray(train[1], dtype=np.int64)
    state = AdamState.zeros_like(model)
    history: list[EpochStats] = []
    best = (-math.inf, 0, model.copy())
    n = len(train_labels)
    for epoch in range(1, epochs + 1):
        order = rng.permutation(n)
        total = 0.0
        for start in range(0, n, config.batch_size):
            idx = order[start : start + config.batch_size]
            loss, grads = encoder.loss_and_grad_arrays(
                model, train_ids[idx], train_mask[idx], train_labels[idx], True, rng
            )
            adam_step(model, grads, state, config.learning_rate,
                      config.adam_beta1, config.adam_beta2, config.adam_epsilon)
            total += loss * len(idx)
        dev_acc = accuracy(model, dev[0], dev[1])
        history.append(EpochStats(epoch, total / n, dev_acc))
        if progress is not None:
            print(f"epoch={epoch} train_loss={total / n:.6f} dev_acc={dev_acc:.6f}", file=progress)
        score = -math.inf if math.isnan(dev_acc) else dev_acc
        if score > best[0] or (math.isnan(dev_acc) and epoch == epochs):
            best = (score, epoch, model.copy())
        if stop_at_train_accuracy is not None:
            if accuracy(model, train[0], train[1]) >= stop_at_train_accuracy:
                best = (score, epoch, model.copy())
                break
    best_acc = max((h.dev_accuracy for h in history), default=float("nan"))
    return TrainResult(best[2], best_acc, best[1], history)


def labelled_data(records: Sequence[TextRecord], task: str, vocab: Vocabulary, max_len: int):
    classes = task_classes(task)
    index = {lab: i for i, lab in enumerate(classes)}
    labels = []
    for r in records:
        lab = r.label(task)
        if lab not in index:
            raise TrainingError(f"record {r.id!r}: label {lab!r} is not a {task} training class")
        labels.append(index[lab])
    return encode_texts(vocab, [r.text for r in records], max_len), labels


def split_for_training(records, task, config):
    require_labels(records, task)
    train, dev = stratified_split(records, config.train_fraction, task, config.split_seed)
    present = {r.label(task) for r in train}
    missing = [c for c in task_classes(task) if c not in present]
    if missing:
        raise TrainingError(f"{task}: no training examples for class(es) {missing} after split")
    return train, dev


def train_one(
    records: Sequence[TextRecord],
    task: str,
    language: str,
    vocab: Vocabulary,
    config: TrainConfig,
    seed: int,
    progress: Optional[TextIO] = None,
) -> TrainResult:
    """Train one classifier for a (language, task) slot from weight seed ``seed``.

    The split uses ``config.split_seed`` so every ensemble member sees the
    same train/dev partition.
    """
    config.validate()
    if any(r.language != language for r in records):
        raise TrainingError(f"train_one({language}) received records of another language")
    train, dev = split_for_training(records, task, config)
    train_data = labelled_data(train, task, vocab, config.max_len)
    dev_data = labelled_data(dev, task, vocab, config.max_len)
    model = encoder.init_model(config.model_config(vocab.size, len(task_classes(task))), seed)
    rng = np.random.default_rng([seed, 1])
    if progress is not None:
        print(f"# {language} {task} seed={seed} train={len(train)} dev={len(dev)}", file=progress)
    return fit(model, train_data, dev_data, config, rng, progress=progress)


def default_progress() -> TextIO:
    return sys.stdout
