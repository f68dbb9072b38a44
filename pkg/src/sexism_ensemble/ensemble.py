"""Seed-varied ensembles, majority voting and a Monte-Carlo voting simulator."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence, TextIO

import numpy as np

from . import encoder, kernels
from .encoder import ClassifierModel
from .errors import CheckpointError, ConfigError, InputError
from .io import atomic_write_text, format_key_values, parse_key_values
from .tokenizer import Vocabulary
from .trainer import TrainConfig, TrainResult, encode_texts, task_classes, train_one


@dataclass
class EnsembleModel:
    members: list[ClassifierModel]
    task: str
    language: str
    vocab: Vocabulary

    def __post_init__(self):
        if not self.members:
            raise ConfigError("an ensemble needs at least one member")
        n_classes = {m.config.n_classes for m in self.members}
        if n_classes != {len(task_classes(self.task))}:
            raise ConfigError(f"members disagree with {self.task} class count: {n_classes}")
        if any(m.config.vocab_size != self.vocab.size for m in self.members):
            raise ConfigError("member vocab_size differs from the ensemble vocabulary")
        seeds = [m.seed for m in self.members]
        if len(set(seeds)) != len(seeds):
            raise ConfigError(f"member seeds must be distinct, got {seeds}")

    @property
    def k(self) -> int:
        return len(self.members)

    @property
    def classes(self) -> tuple[str, ...]:
        return task_classes(self.task)


def majority_vote(votes: Sequence[int], member_confidences: Sequence[Sequence[float]]) -> int:
    """Most-voted label; ties go to the largest summed probability, then the lowest index.

    ``member_confidences[m][c]`` is member ``m``'s probability for class ``c``.
    """
    if len(votes) == 0:
        raise InputError("majority_vote needs at least one vote")
    if len(votes) != len(member_confidences):
        raise InputError(f"{len(votes)} votes but {len(member_confidences)} confidence vectors")
    conf = np.asarray(member_confidences, dtype=np.float64)
    counts = np.bincount(np.asarray(votes, dtype=np.intp), minlength=conf.shape[1])
    tied = np.flatnonzero(counts == counts.max())
    if len(tied) == 1:
        return int(tied[0])
    mass = conf[:, tied].sum(axis=0)
    return int(tied[np.argmax(mass)])


def vote_margin(votes: Sequence[int]) -> int:
    counts = sorted(np.bincount(np.asarray(votes, dtype=np.intp)).tolist(), reverse=True)
    return counts[0] - (counts[1] if len(counts) > 1 else 0)


def train_ensemble(
    records,
    task: str,
    language: str,
    vocab: Vocabulary,
    config: TrainConfig,
    workers: int = 1,
    progress: Optional[TextIO] = None,
) -> tuple[EnsembleModel, list[TrainResult]]:
    """One ``train_one`` run per seed in ``config.seeds``, all on the same split.

    Members are independent, so ``workers > 1`` trains them on threads
    without changing any result.
    """
    config.validate()

    def run(seed):
        return train_one(records, task, language, vocab, config, seed, progress)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(run, config.seeds))
    else:
        results = [run(s) for s in config.seeds]
    return EnsembleModel([r.model for r in results], task, language, vocab), results


@dataclass(frozen=True)
class EnsemblePrediction:
    label_index: int
    votes: list[int]
    margin: int
    probabilities: np.ndarray  # (K, n_classes)


def predict_ensemble_batch(ensemble: EnsembleModel, texts: Sequence[str]) -> list[EnsemblePrediction]:
    seqs = encode_texts(ensemble.vocab, texts, ensemble.members[0].config.max_len)
    per_member = np.stack([encoder.predict_proba(m, seqs) for m in ensemble.members], axis=1)
    out = []
    for probs in per_member:
        votes = [int(i) for i in np.argmax(probs, axis=1)]
        out.append(EnsemblePrediction(majority_vote(votes, probs), votes, vote_margin(votes), probs))
    return out


def predict_ensemble(ensemble: EnsembleModel, text: str) -> tuple[int, list[int], int]:
    """Mask, encode and vote: returns ``(label_index, member_votes, margin)``."""
    p = predict_ensemble_batch(ensemble, [text])[0]
    return p.label_index, p.votes, p.margin


def simulate_vote_accuracy(
    k: int,
    member_accuracy: float,
    pairwise_error_correlation: float = 0.0,
    trials: int = 100_000,
    seed: int = 0,
) -> float:
    """Monte-Carlo accuracy of a ``k``-member strict-majority vote.

    With probability ``pairwise_error_correlation`` a trial uses one shared
    Bernoulli(``member_accuracy``) outcome for every member; otherwise the
    members are independent. The pairwise correlation of member errors is
    then exactly ``pairwise_error_correlation``.
    """
    if k < 1 or k % 2 == 0:
        raise ConfigError(f"k must be a positive odd integer, got {k}")
    if not 0.0 <= member_accuracy <= 1.0:
        raise ConfigError(f"member_accuracy must be in [0, 1], got {member_accuracy}")
    if not 0.0 <= pairwise_error_correlation <= 1.0:
        raise ConfigError(f"correlation must be in [0, 1], got {pairwise_error_correlation}")
    if trials < 1:
        raise ConfigError("trials must be >= 1")
    rng = np.random.default_rng(seed)
    shared_flag = (rng.random(trials) < pairwise_error_correlation).astype(np.uint8)
    shared_u = rng.random(trials)
    member_u = rng.random((trials, k))
    hits = kernels.majority_correct_count(shared_flag, shared_u, member_u, float(member_accuracy))
    return hits / trials


# --- manifests -------------------------------------------------------------
#
#   task = task1
#   language = en
#   vocab = vocab.en.txt
#   member = task1.en.seed1.ckpt
#   ...
# Relative paths resolve against the manifest's directory.


def save_ensemble(ensemble: EnsembleModel, directory: str | os.PathLike, vocab_file: str) -> Path:
    """Write member checkpoints and a manifest; returns the manifest path."""
    directory = Path(directory)
    prefix = f"{ensemble.task}.{ensemble.language}"
    pairs = [("task", ensemble.task), ("language", ensemble.language), ("vocab", vocab_file)]
    for m in ensemble.members:
        name = f"{prefix}.seed{m.seed}.ckpt"
        encoder.save_checkpoint(m, directory / name)
        pairs.append(("member", name))
    manifest = directory / f"{prefix}.manifest"
    atomic_write_text(manifest, format_key_values(pairs))
    return manifest


def load_ensemble(manifest: str | os.PathLike) -> EnsembleModel:
    manifest = Path(manifest)
    try:
        text = manifest.read_text(encoding="utf-8")
    except (OSError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"cannot read manifest {manifest}: {exc}") from None
    pairs = parse_key_values(text, str(manifest))
    fields: dict[str, str] = {}
    members = []
    for key, value in pairs:
        if key == "member":
            members.append(value)
        else:
            fields[key] = value
    for key in ("task", "language", "vocab"):
        if key not in fields:
            raise CheckpointError(f"{manifest}: missing '{key}' entry")
    if not members:
        raise CheckpointError(f"{manifest}: no member checkpoints listed")
    base = manifest.parent
    try:
        vocab = Vocabulary.load(base / fields["vocab"])
    except (OSError, UnicodeDecodeError) as exc:
        raise CheckpointError(f"{manifest}: cannot read vocabulary: {exc}") from None
    models = [encoder.load_checkpoint(base / m) for m in members]
    try:
        return EnsembleModel(models, fields["task"], fields["language"], vocab)
    except ConfigError as exc:
        raise CheckpointError(f"{manifest}: {exc}") from None
