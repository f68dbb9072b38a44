import itertools
import json

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from sexism_ensemble.corpus import TASK2_LABELS, TextRecord
from sexism_ensemble.errors import InputError
from sexism_ensemble.evaluation import (
    evaluate_task, render_report, report_from_json, score, slice_by_language,
)


def brute_force(gold, pred, labels):
    """Direct TP/FP/FN counting with the 0/0 -> 0 convention."""
    per = {}
    for lab in labels:
        tp = sum(1 for g, p in zip(gold, pred) if g == lab and p == lab)
        fp = sum(1 for g, p in zip(gold, pred) if g != lab and p == lab)
        fn = sum(1 for g, p in zip(gold, pred) if g == lab and p != lab)
        prec = tp / (tp + fp) if tp + fp else 0.0
        rec = tp / (tp + fn) if tp + fn else 0.0
        f1 = 2 * prec * rec / (prec + rec) if prec + rec else 0.0
        per[lab] = (prec, rec, f1, tp + fn)
    acc = sum(g == p for g, p in zip(gold, pred)) / len(gold) if gold else 0.0
    return acc, sum(v[2] for v in per.values()) / len(labels), per


def assert_matches_oracle(gold, pred, labels):
    rep = score(gold, pred, labels)
    acc, macro, per = brute_force(gold, pred, labels)
    assert rep.accuracy == acc and rep.macro_f1 == macro
    for lab in labels:
        s = rep.per_class[lab]
        assert (s.precision, s.recall, s.f1, s.support) == per[lab]


def test_exhaustive_binary_four_records():
    labels = ("+", "-")
    for gold in itertools.product(labels, repeat=4):
        for pred in itertools.product(labels, repeat=4):
            assert_matches_oracle(list(gold), list(pred), labels)


def test_exhaustive_three_labels_five_records():
    labels = ("a", "b", "c")
    for gold in itertools.product(labels, repeat=5):
        for pred in itertools.product(labels, repeat=5):
            assert_matches_oracle(list(gold), list(pred), labels)


def test_worked_binary_example():
    rep = score(["+", "+", "-", "-"], ["+", "-", "-", "-"], ("+", "-"))
    assert rep.accuracy == 0.75
    assert rep.per_class["+"].f1 == pytest.approx(2 / 3)
    assert rep.per_class["-"].f1 == pytest.approx(0.8)
    assert rep.macro_f1 == pytest.approx(0.733333, abs=1e-6)


def test_identity():
    gold = ["a", "b", "c", "a"]
    rep = score(gold, gold, ("a", "b", "c"))
    assert rep.accuracy == 1.0 and rep.macro_f1 == 1.0


def test_six_label_average_includes_zero_support():
    rep = score(["non-sexist", "objectification"], ["non-sexist", "objectification"], TASK2_LABELS)
    assert len(rep.per_class) == 6
    assert rep.macro_f1 == pytest.approx(2 / 6)


def test_input_errors():
    with pytest.raises(InputError):
        score(["a"], ["a", "b"], ("a", "b"))
    with pytest.raises(InputError):
        score(["a"], ["z"], ("a", "b"))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.tuples(st.integers(0, 3), st.integers(0, 3)), min_size=1, max_size=30))
def test_report_invariants(pairs):
    labels = ("w", "x", "y", "z")
    gold = [labels[g] for g, _ in pairs]
    pred = [labels[p] for _, p in pairs]
    rep = score(gold, pred, labels)
    c = rep.confusion.counts
    assert rep.accuracy == np.trace(c) / c.sum()
    assert c.sum() == len(pairs) and np.all(c >= 0)
    assert 0.0 <= rep.macro_f1 <= 1.0
    diagonal_full = np.count_nonzero(c - np.diag(np.diag(c))) == 0 and np.all(np.diag(c) > 0)
    assert (rep.macro_f1 == 1.0) == diagonal_full


def recs(langs, labels):
    return [TextRecord(str(i), "twitter", lang, "t", "sexist" if lab != "non-sexist" else "non-sexist", lab)
            for i, (lang, lab) in enumerate(zip(langs, labels))]


def test_slices():
    gold = recs(["en", "es", "en", "es"], ["non-sexist", "objectification", "sexual-violence", "non-sexist"])
    preds = ["non-sexist", "objectification", "non-sexist", "non-sexist"]
    slices = slice_by_language(gold, preds, "task2", TASK2_LABELS)
    assert set(slices) == {"en", "es"}
    assert sum(s.confusion.total for s in slices.values()) == 4
    single = recs(["en", "en"], ["non-sexist", "objectification"])
    only = slice_by_language(single, ["non-sexist", "non-sexist"], "task2", TASK2_LABELS)
    assert list(only) == ["en"]
    glob = score([r.task2 for r in single], ["non-sexist", "non-sexist"], TASK2_LABELS)
    assert only["en"].accuracy == glob.accuracy and only["en"].macro_f1 == glob.macro_f1


def test_text_rendering_golden():
    rep = score(["+", "+", "-", "-"], ["+", "-", "-", "-"], ("+", "-"))
    assert render_report(rep, "text") == (
        "== report ==\n"
        "accuracy=0.750000\n"
        "macro_f1=0.733333\n"
        "label  precision  recall     f1         support\n"
        "+      1.000000   0.500000   0.666667   2\n"
        "-      0.666667   1.000000   0.800000   2\n"
        "confusion (rows=gold, cols=pred):\n"
        "      [0] [1]\n"
        "+       1   1\n"
        "-       0   2\n"
        "  [0]=+  [1]=-\n"
    )


def test_identity_accuracy_line():
    rep = score(["a", "b"], ["a", "b"], ("a", "b"))
    assert "accuracy=1.000000" in render_report(rep, "text").splitlines()


def test_grid_follows_label_order():
    rep = score(["b", "a"], ["b", "b"], ("b", "a"))
    lines = render_report(rep, "text").splitlines()
    i = lines.index("confusion (rows=gold, cols=pred):")
    assert lines[i + 2].split() == ["b", "1", "0"] and lines[i + 3].split() == ["a", "1", "0"]


def test_json_round_trip():
    gold = recs(["en", "es", "en"], ["non-sexist", "objectification", "objectification"])
    rep = evaluate_task(gold, ["non-sexist", "objectification", "non-sexist"], "task2", TASK2_LABELS)
    text = render_report(rep, "json")
    data = json.loads(text)
    assert data["accuracy"] == round(rep.accuracy, 6)
    assert '"accuracy": 0.666667' in text and '"recall": 0.000000' in text
    back = report_from_json(text)
    assert back.macro_f1 == round(rep.macro_f1, 6)
    assert np.array_equal(back.confusion.counts, rep.confusion.counts)
    assert set(back.slices) == {"en", "es"}
    assert render_report(back, "json") == text
