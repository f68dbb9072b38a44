"""EXIST-schema TSV ingestion, label canonicalisation and dataset splits."""

from __future__ import annotations

import math
import os
import warnings
from collections import defaultdict
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Optional, Sequence

import numpy as np

from .errors import EncodingError, LabelParseError, MissingLabelError, SchemaError

LANGUAGES = ("en", "es")
SOURCES = ("twitter", "gab")

NON_SEXIST = "non-sexist"
SEXIST = "sexist"
TASK1_LABELS = (NON_SEXIST, SEXIST)
SEXIST_CATEGORIES = (
    "ideological-inequality",
    "stereotyping-dominance",
    "objectification",
    "sexual-violence",
    "misogyny-non-sexual-violence",
)
TASK2_LABELS = (NON_SEXIST,) + SEXIST_CATEGORIES
TASKS = ("task1", "task2")

BASE_COLUMNS = ("test_case", "id", "source", "language", "text")
LABEL_COLUMNS = ("task1", "task2")


@dataclass(frozen=True)
class TextRecord:
    id: str
    source: str
    language: str
    text: str
    task1: Optional[str] = None
    task2: Optional[str] = None
    test_case: str = "EXIST2021"

    def label(self, task: str) -> Optional[str]:
        return self.task1 if task == "task1" else self.task2


def label_set(task: str) -> tuple[str, ...]:
    if task == "task1":
        return TASK1_LABELS
    if task == "task2":
        return TASK2_LABELS
    raise ValueError(f"unknown task {task!r}")


def _normalise(raw: str) -> str:
    key = raw.strip().lower()
    for ch in ("_", " "):
        key = key.replace(ch, "-")
    return key


_TASK1_BY_KEY = {_normalise(x): x for x in TASK1_LABELS}
_TASK2_BY_KEY = {_normalise(x): x for x in TASK2_LABELS}
# Spelled-out forms like "IDEOLOGICAL AND INEQUALITY".
for _canon in SEXIST_CATEGORIES:
    _TASK2_BY_KEY[_canon.replace("-", "-and-", 1)] = _canon
_TASK2_BY_KEY["misogyny-and-non-sexual-violence"] = "misogyny-non-sexual-violence"


def canonical_label(raw: str, task: str) -> str:
    """Map a label string to its lowercase hyphenated form.

    Matching ignores case and treats ``-``, ``_`` and space alike.

    Raises:
        KeyError: if ``raw`` is not a label of ``task``.
    """
    table = _TASK1_BY_KEY if task == "task1" else _TASK2_BY_KEY
    return table[_normalise(raw)]


def validate_record(rec: TextRecord) -> None:
    if not rec.text.strip():
        raise SchemaError(f"record {rec.id!r}: empty text")
    if rec.language not in LANGUAGES:
        raise SchemaError(f"record {rec.id!r}: unknown language {rec.language!r}")
    if rec.source not in SOURCES:
        raise SchemaError(f"record {rec.id!r}: unknown source {rec.source!r}")
    if rec.task1 is not None and rec.task2 is not None:
        if (rec.task1 == NON_SEXIST) != (rec.task2 == NON_SEXIST):
            raise LabelParseError(
                f"record {rec.id!r}: task1={rec.task1} inconsistent with task2={rec.task2}"
            )


def load_tsv(path: str | os.PathLike, expect_labels: bool = True) -> list[TextRecord]:
    """Read an EXIST-format TSV file.

    Empty label cells are read as missing labels (``None``); a label
    column absent from the header is a schema error when
    ``expect_labels`` is set.
    """
    with open(path, "rb") as fh:
        raw = fh.read()
    lines = raw.split(b"\n")
    if lines and lines[-1] == b"":
        lines.pop()
    if not lines:
        raise SchemaError(f"{path}: empty file, expected a header row")

    decoded = []
    for lineno, line in enumerate(lines, start=1):
        if line.endswith(b"\r"):
            line = line[:-1]
        try:
            decoded.append(line.decode("utf-8"))
        except UnicodeDecodeError as exc:
            raise EncodingError(f"{path}:{lineno}: malformed UTF-8 ({exc.reason})") from None

    header = decoded[0].split("\t")
    required = BASE_COLUMNS + (LABEL_COLUMNS if expect_labels else ())
    for col in required:
        if col not in header:
            raise SchemaError(f"{path}: missing column {col!r}")
    index = {name: i for i, name in enumerate(header)}

    records = []
    for lineno, line in enumerate(decoded[1:], start=2):
        fields = line.split("\t")
        if len(fields) != len(header):
            raise SchemaError(
                f"{path}:{lineno}: expected {len(header)} tab-separated fields, got {len(fields)}"
            )
        labels: dict[str, Optional[str]] = {"task1": None, "task2": None}
        if expect_labels:
            for task in LABEL_COLUMNS:
                value = fields[index[task]]
                if value.strip() == "":
                    continue
                try:
                    labels[task] = canonical_label(value, task)
                except KeyError:
                    raise LabelParseError(
                        f"{path}:{lineno}: unknown {task} label {value!r}"
                    ) from None
        rec = TextRecord(
            id=fields[index["id"]],
            source=fields[index["source"]].strip().lower(),
            language=fields[index["language"]].strip().lower(),
            text=fields[index["text"]],
            task1=labels["task1"],
            task2=labels["task2"],
            test_case=fields[index["test_case"]],
        )
        try:
            validate_record(rec)
        except (SchemaError, LabelParseError) as exc:
            raise type(exc)(f"{path}:{lineno}: {exc}") from None
        records.append(rec)
    return records


def write_tsv(records: Iterable[TextRecord], path: str | os.PathLike, with_labels: bool = True) -> None:
    """Serialise records in the same layout ``load_tsv`` reads."""
    cols = BASE_COLUMNS + (LABEL_COLUMNS if with_labels else ())
    rows = ["\t".join(cols)]
    for r in records:
        if "\t" in r.text or "\n" in r.text:
            raise SchemaError(f"record {r.id!r}: tabs and newlines are not allowed in text")
        fields = [r.test_case, r.id, r.source, r.language, r.text]
        if with_labels:
            fields += [r.task1 or "", r.task2 or ""]
        rows.append("\t".join(fields))
    from .io import atomic_write_bytes

    atomic_write_bytes(path, ("\n".join(rows) + "\n").encode("utf-8"))


def filter_language(records: Sequence[TextRecord], lang: str) -> list[TextRecord]:
    return [r for r in records if r.language == lang]


def filter_sexist(records: Sequence[TextRecord]) -> list[TextRecord]:
    for r in records:
        if r.task1 is None:
            raise MissingLabelError(f"record {r.id!r} has no task1 label")
    return [r for r in records if r.task1 == SEXIST]


def require_labels(records: Sequence[TextRecord], task: str) -> None:
    for r in records:
        if r.label(task) is None:
            raise MissingLabelError(f"record {r.id!r} has no {task} label")


def class_counts(records: Sequence[TextRecord], task: str) -> dict[str, int]:
    counts = {lab: 0 for lab in label_set(task)}
    for r in records:
        lab = r.label(task)
        if lab is None:
            raise MissingLabelError(f"record {r.id!r} has no {task} label")
        counts[lab] += 1
    return counts


def stratified_split(
    records: Sequence[TextRecord], train_fraction: float, task: str, seed: int
) -> tuple[list[TextRecord], list[TextRecord]]:
    """Per-class proportional train/dev split.

    Each class contributes ``floor(count * fraction)`` records to train;
    the remaining ``round(total * fraction) - sum(floors)`` train slots go
    to the classes with the largest fractional remainder (ties: label
    order). Classes with fewer than two members go entirely to train.
    Both outputs keep the input order.
    """
    if not 0 < train_fraction < 1:
        raise ValueError(f"train_fraction must be in (0, 1), got {train_fraction}")
    require_labels(records, task)
    frac = Fraction(str(train_fraction))

    by_class: dict[str, list[int]] = defaultdict(list)
    for i, r in enumerate(records):
        by_class[r.label(task)].append(i)

    rng = np.random.default_rng(seed)
    train_idx: list[int] = []
    quota: dict[str, int] = {}
    remainders: dict[str, Fraction] = {}
    eligible_total = 0
    for lab in sorted(by_class):
        members = by_class[lab]
        if len(members) < 2:
            warnings.warn(
                f"class {lab!r} has {len(members)} member(s); placed entirely in train",
                stacklevel=2,
            )
            train_idx.extend(members)
            continue
        exact = len(members) * frac
        quota[lab] = math.floor(exact)
        remainders[lab] = exact - quota[lab]
        eligible_total += len(members)

    leftover = math.floor(eligible_total * frac + Fraction(1, 2)) - sum(quota.values())
    for lab in sorted(remainders, key=lambda k: (-remainders[k], k))[:leftover]:
        quota[lab] += 1

    for lab in sorted(quota):
        members = by_class[lab]
        order = rng.permutation(len(members))
        train_idx.extend(members[j] for j in order[: quota[lab]])

    chosen = set(train_idx)
    train = [r for i, r in enumerate(records) if i in chosen]
    dev = [r for i, r in enumerate(records) if i not in chosen]
    return train, dev
