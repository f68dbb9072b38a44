"""Language routing plus the task1 -> task2 cascade."""

from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .corpus import NON_SEXIST, SEXIST, SEXIST_CATEGORIES, TASK1_LABELS, TextRecord
from .ensemble import EnsembleModel, load_ensemble, predict_ensemble_batch
from .errors import ConfigError, InputError, SchemaError
from .io import atomic_write_text

AuditHook = Callable[[str, str], None]


@dataclass
class PipelineModel:
    """Per-language task1 ensembles and task2 classifiers.

    Task2 slots are stored as ensembles as well; the trainer gives them a
    single member, in which case the vote is plain argmax.
    """

    task1: dict[str, EnsembleModel]
    task2: dict[str, EnsembleModel]
    audit: Optional[AuditHook] = field(default=None, repr=False)

    def __post_init__(self):
        for lang, ens in self.task1.items():
            if ens.task != "task1" or ens.language != lang:
                raise ConfigError(f"task1 slot {lang!r} holds a {ens.task}/{ens.language} model")
        for lang, ens in self.task2.items():
            if ens.task != "task2" or ens.language != lang:
                raise ConfigError(f"task2 slot {lang!r} holds a {ens.task}/{ens.language} model")

    @property
    def languages(self) -> list[str]:
        return sorted(self.task1)

    def _slot(self, table: dict[str, EnsembleModel], task: str, language: str) -> EnsembleModel:
        try:
            model = table[language]
        except KeyError:
            raise ConfigError(f"no {task} model for language {language!r}") from None
        if self.audit is not None:
            self.audit(task, language)
        return model


def _predict_language(pipeline: PipelineModel, language: str, texts: Sequence[str]) -> list[tuple[str, str]]:
    t1 = predict_ensemble_batch(pipeline._slot(pipeline.task1, "task1", language), texts)
    labels1 = [TASK1_LABELS[p.label_index] for p in t1]
    flagged = [i for i, lab in enumerate(labels1) if lab == SEXIST]
    labels2 = [NON_SEXIST] * len(texts)
    if flagged:
        t2 = predict_ensemble_batch(
            pipeline._slot(pipeline.task2, "task2", language), [texts[i] for i in flagged]
        )
        for i, p in zip(flagged, t2):
            labels2[i] = SEXIST_CATEGORIES[p.label_index]
    return list(zip(labels1, labels2))


def predict_record(pipeline: PipelineModel, record: TextRecord) -> tuple[str, str]:
    """``(task1, task2)`` labels; the task2 model only runs on texts voted sexist."""
    return _predict_language(pipeline, record.language, [record.text])[0]


def predict_batch(pipeline: PipelineModel, records: Sequence[TextRecord]) -> list[tuple[str, str, str]]:
    """``(id, task1, task2)`` per record, in input order.

    Records are grouped by language for batched inference; any record whose
    language has no model is reported together with its id.
    """
    by_lang: dict[str, list[int]] = {}
    for i, r in enumerate(records):
        by_lang.setdefault(r.language, []).append(i)
    missing = [
        records[i].id for lang, idx in by_lang.items()
        if lang not in pipeline.task1 or lang not in pipeline.task2 for i in idx
    ]
    if missing:
        shown = ", ".join(missing[:10]) + (" ..." if len(missing) > 10 else "")
        raise ConfigError(f"{len(missing)} record(s) in languages without models: {shown}")
    out: list[Optional[tuple[str, str, str]]] = [None] * len(records)
    for lang in sorted(by_lang):
        idx = by_lang[lang]
        for i, (l1, l2) in zip(idx, _predict_language(pipeline, lang, [records[i].text for i in idx])):
            out[i] = (records[i].id, l1, l2)
    return out  # type: ignore[return-value]


def load_pipeline(model_dir: str | os.PathLike, audit: Optional[AuditHook] = None) -> PipelineModel:
    """Load every ``task{1,2}.<lang>.manifest`` found in ``model_dir``."""
    model_dir = Path(model_dir)
    task1, task2 = {}, {}
    for manifest in sorted(model_dir.glob("task[12].*.manifest")):
        ens = load_ensemble(manifest)
        (task1 if ens.task == "task1" else task2)[ens.language] = ens
    if not task1:
        raise ConfigError(f"no task1 manifests in {model_dir}")
    return PipelineModel(task1, task2, audit)


# --- prediction TSV: "id<TAB>task1<TAB>task2", header row first --------------

PREDICTION_HEADER = ("id", "task1", "task2")


def format_predictions(rows: Sequence[tuple[str, str, str]]) -> str:
    lines = ["\t".join(PREDICTION_HEADER)]
    lines += ["\t".join(row) for row in rows]
    return "\n".join(lines) + "\n"


def write_predictions(rows: Sequence[tuple[str, str, str]], path: str | os.PathLike) -> None:
    atomic_write_text(path, format_predictions(rows))


def read_predictions(path: str | os.PathLike) -> list[tuple[str, str, str]]:
    from .corpus import canonical_label

    with open(path, "rb") as fh:
        try:
            lines = fh.read().decode("utf-8").splitlines()
        except UnicodeDecodeError as exc:
            raise InputError(f"{path}: malformed UTF-8 ({exc.reason})") from None
    if not lines or tuple(lines[0].split("\t")) != PREDICTION_HEADER:
        raise SchemaError(f"{path}: expected header {'<TAB>'.join(PREDICTION_HEADER)}")
    rows = []
    for lineno, line in enumerate(lines[1:], start=2):
        fields = line.split("\t")
        if len(fields) != 3:
            raise SchemaError(f"{path}:{lineno}: expected 3 fields, got {len(fields)}")
        try:
            rows.append((fields[0], canonical_label(fields[1], "task1"), canonical_label(fields[2], "task2")))
        except KeyError as exc:
            raise SchemaError(f"{path}:{lineno}: unknown label {exc}") from None
    return rows
