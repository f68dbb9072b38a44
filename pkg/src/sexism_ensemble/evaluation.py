"""Accuracy, macro-F1, per-class scores, confusion matrices and report rendering."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import kernels
from .corpus import LANGUAGES, TextRecord
from .errors import InputError


@dataclass(frozen=True)
class ConfusionMatrix:
    labels: tuple[str, ...]
    counts: np.ndarray  # rows: gold, columns: predicted

    @property
    def total(self) -> int:
        return int(self.counts.sum())


@dataclass(frozen=True)
class ClassScores:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass
class EvaluationReport:
    accuracy: float
    macro_f1: float
    per_class: dict[str, ClassScores]
    confusion: ConfusionMatrix
    slices: dict[str, "EvaluationReport"] = field(default_factory=dict)


def _ratio(num: int, den: int) -> float:
    return num / den if den else 0.0


def report_from_confusion(confusion: ConfusionMatrix) -> EvaluationReport:
    c = confusion.counts
    tp = np.diag(c)
    per_class = {}
    for i, lab in enumerate(confusion.labels):
        p = _ratio(int(tp[i]), int(c[:, i].sum()))
        r = _ratio(int(tp[i]), int(c[i, :].sum()))
        f1 = _ratio(2 * p * r, p + r) if p + r else 0.0
        per_class[lab] = ClassScores(p, r, f1, int(c[i, :].sum()))
    return EvaluationReport(
        accuracy=_ratio(int(tp.sum()), confusion.total),
        macro_f1=float(np.mean([s.f1 for s in per_class.values()])),
        per_class=per_class,
        confusion=confusion,
    )


def score(gold: Sequence[str], pred: Sequence[str], label_set: Sequence[str]) -> EvaluationReport:
    """Score predictions over an ordered label set.

    Undefined ratios (0/0) count as 0, and every label in ``label_set``
    enters the macro average, including labels with no support.
    """
    if len(gold) != len(pred):
        raise InputError(f"gold has {len(gold)} labels, pred has {len(pred)}")
    index = {lab: i for i, lab in enumerate(label_set)}
    try:
        g = [index[x] for x in gold]
        p = [index[x] for x in pred]
    except KeyError as exc:
        raise InputError(f"label {exc} not in label set {list(label_set)}") from None
    counts = kernels.confusion_counts(g, p, len(label_set))
    return report_from_confusion(ConfusionMatrix(tuple(label_set), counts))


def slice_by_language(
    gold_records: Sequence[TextRecord], preds: Sequence[str], task: str, label_set: Sequence[str]
) -> dict[str, EvaluationReport]:
    """Per-language reports; languages without records are left out."""
    if len(gold_records) != len(preds):
        raise InputError("gold records and predictions are not aligned")
    out = {}
    for lang in LANGUAGES:
        idx = [i for i, r in enumerate(gold_records) if r.language == lang]
        if idx:
            out[lang] = score([gold_records[i].label(task) for i in idx], [preds[i] for i in idx], label_set)
    return out


def evaluate_task(
    gold_records: Sequence[TextRecord], preds: Sequence[str], task: str, label_set: Sequence[str]
) -> EvaluationReport:
    report = score([r.label(task) for r in gold_records], list(preds), label_set)
    report.slices = slice_by_language(gold_records, preds, task, label_set)
    return report


# --- rendering ---------------------------------------------------------------


def render_text(report: EvaluationReport, title: str = "") -> str:
    labels = report.confusion.labels
    lines = [f"== {title} ==" if title else "== report =="]
    lines.append(f"accuracy={report.accuracy:.6f}")
    lines.append(f"macro_f1={report.macro_f1:.6f}")
    name_w = max(len("label"), *(len(lab) for lab in labels))
    lines.append(f"{'label':<{name_w}}  precision  recall     f1         support")
    for lab in labels:
        s = report.per_class[lab]
        lines.append(f"{lab:<{name_w}}  {s.precision:.6f}   {s.recall:.6f}   {s.f1:.6f}   {s.support}")
    lines.append("confusion (rows=gold, cols=pred):")
    cell_w = max(len(str(report.confusion.counts.max())), 3)
    header = " " * (name_w + 1) + " ".join(f"[{j}]".rjust(cell_w) for j in range(len(labels)))
    lines.append(header)
    for i, lab in enumerate(labels):
        row = " ".join(str(int(v)).rjust(cell_w) for v in report.confusion.counts[i])
        lines.append(f"{lab:<{name_w}} {row}")
    lines.append("  " + "  ".join(f"[{j}]={lab}" for j, lab in enumerate(labels)))
    for lang, sub in report.slices.items():
        lines.append("")
        lines.append(render_text(sub, f"{title} [{lang}]" if title else lang))
    return "\n".join(lines)


class _Fixed(float):
    """Float that serialises with exactly six decimals."""


def _json_value(obj, indent: int, level: int) -> str:
    pad = " " * (indent * (level + 1))
    end = " " * (indent * level)
    if isinstance(obj, _Fixed):
        return f"{float(obj):.6f}"
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(k)}: {_json_value(v, indent, level + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, list):
        if all(not isinstance(x, (dict, list)) for x in obj):
            return "[" + ", ".join(_json_value(x, indent, level) for x in obj) + "]"
        return "[\n" + ",\n".join(pad + _json_value(x, indent, level + 1) for x in obj) + "\n" + end + "]"
    return json.dumps(obj)


def report_to_dict(report: EvaluationReport) -> dict:
    return {
        "accuracy": _Fixed(report.accuracy),
        "macro_f1": _Fixed(report.macro_f1),
        "labels": list(report.confusion.labels),
        "per_class": {
            lab: {"precision": _Fixed(s.precision), "recall": _Fixed(s.recall),
                  "f1": _Fixed(s.f1), "support": s.support}
            for lab, s in report.per_class.items()
        },
        "confusion": [[int(v) for v in row] for row in report.confusion.counts],
        "slices": {lang: report_to_dict(sub) for lang, sub in report.slices.items()},
    }


def render_json(report: EvaluationReport) -> str:
    return _json_value(report_to_dict(report), 2, 0) + "\n"


def render_json_map(reports: dict[str, EvaluationReport]) -> str:
    """Several reports as one JSON object, e.g. keyed by task."""
    return _json_value({k: report_to_dict(r) for k, r in reports.items()}, 2, 0) + "\n"


def render_report(report: EvaluationReport, format: str = "text", title: str = "") -> str:
    if format == "text":
        return render_text(report, title) + "\n"
    if format == "json":
        return render_json(report)
    raise InputError(f"unknown report format {format!r}")


def report_from_json(text: str) -> EvaluationReport:
    """Inverse of ``render_json`` (values rounded to six decimals)."""
    return _report_from_dict(json.loads(text))


def _report_from_dict(d: dict) -> EvaluationReport:
    labels = tuple(d["labels"])
    return EvaluationReport(
        accuracy=d["accuracy"],
        macro_f1=d["macro_f1"],
        per_class={lab: ClassScores(**v) for lab, v in d["per_class"].items()},
        confusion=ConfusionMatrix(labels, np.array(d["confusion"], dtype=np.int64).reshape(len(labels), len(labels))),
        slices={k: _report_from_dict(v) for k, v in d["slices"].items()},
    )
