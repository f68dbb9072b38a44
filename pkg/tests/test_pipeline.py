import numpy as np
import pytest

from sexism_ensemble import synthetic, tokenizer
from sexism_ensemble.corpus import NON_SEXIST, SEXIST, SEXIST_CATEGORIES, TextRecord
from sexism_ensemble.encoder import ModelConfig, init_model
from sexism_ensemble.ensemble import EnsembleModel
from sexism_ensemble.errors import ConfigError
from sexism_ensemble.pipeline import (
    PipelineModel, format_predictions, predict_batch, predict_record, read_predictions, write_predictions,
)


def make_ensemble(task, lang, vocab, seeds, bias=None):
    n = 2 if task == "task1" else 5
    cfg = ModelConfig(vocab_size=vocab.size, max_len=12, d_model=8, n_heads=2, n_layers=1, d_ff=8, n_classes=n)
    members = []
    for s in seeds:
        m = init_model(cfg, s)
        m.params["head_w"] *= 40  # spread random-init outputs so both labels occur
        if bias is not None:
            m.params["head_b"][:] = bias
        members.append(m)
    return EnsembleModel(members, task, lang, vocab)


def make_pipeline(seed=0, t1_bias=None, t2_bias=None, audit=None):
    vocabs = {lang: tokenizer.build_vocab([r.text for r in synthetic.make_corpus(30, seed=1, languages=(lang,))], 120)
              for lang in ("en", "es")}
    t1 = {lang: make_ensemble("task1", lang, vocabs[lang], (seed + 1, seed + 2, seed + 3), t1_bias) for lang in vocabs}
    t2 = {lang: make_ensemble("task2", lang, vocabs[lang], (seed + 1,), t2_bias) for lang in vocabs}
    return PipelineModel(t1, t2, audit)


def record(i, lang="en", text="bakelo mimira"):
    return TextRecord(str(i), "twitter", lang, text)


def test_non_sexist_short_circuits():
    calls = []
    pipe = make_pipeline(t1_bias=[100.0, -100.0], audit=lambda task, lang: calls.append((task, lang)))
    assert predict_record(pipe, record(1)) == (NON_SEXIST, NON_SEXIST)
    assert calls == [("task1", "en")]


def test_sexist_goes_to_task2():
    bias = np.full(5, -100.0)
    bias[SEXIST_CATEGORIES.index("objectification")] = 100.0
    pipe = make_pipeline(t1_bias=[-100.0, 100.0], t2_bias=bias)
    assert predict_record(pipe, record(1)) == (SEXIST, "objectification")


def test_routing_uses_only_language_slot():
    calls = []
    pipe = make_pipeline(t1_bias=[-100.0, 100.0], audit=lambda task, lang: calls.append((task, lang)))
    predict_record(pipe, record(1, "es", "cadefi gojula"))
    assert calls == [("task1", "es"), ("task2", "es")]


def test_language_isolation():
    recs = [TextRecord(str(i), "twitter", r.language, r.text) for i, r in enumerate(synthetic.make_corpus(40, seed=9))]
    base = make_pipeline(seed=0)
    altered = make_pipeline(seed=0)
    other = make_pipeline(seed=50)
    altered.task1["es"], altered.task2["es"] = other.task1["es"], other.task2["es"]
    en = [r for r in recs if r.language == "en"]
    assert predict_batch(base, en) == predict_batch(altered, en)


def test_missing_language_model():
    pipe = make_pipeline()
    del pipe.task1["es"]
    with pytest.raises(ConfigError, match="es"):
        predict_record(pipe, record(1, "es"))
    with pytest.raises(ConfigError, match="7"):
        predict_batch(pipe, [record(6), record(7, "es")])


def test_batch_properties():
    pipe = make_pipeline(seed=4)
    assert predict_batch(pipe, []) == []
    recs = [record(10, "en", "bakelo"), record(11, "es", "cadefi"), record(12, "en", "mimira nuto"), record(13, "es", "la")]
    out = predict_batch(pipe, recs)
    assert [o[0] for o in out] == ["10", "11", "12", "13"]
    assert out == [(r.id,) + predict_record(pipe, r) for r in recs]


def test_cascade_consistency_random():
    recs = synthetic.make_corpus(50, seed=2)
    seen = set()
    for seed in range(4):
        for rid, t1, t2 in predict_batch(make_pipeline(seed=seed * 10), recs):
            assert (t1 == NON_SEXIST) == (t2 == NON_SEXIST)
            seen.add(t1)
    assert seen == {SEXIST, NON_SEXIST}


def test_prediction_file_round_trip(tmp_path):
    rows = [("a", "sexist", "objectification"), ("b", "non-sexist", "non-sexist")]
    path = tmp_path / "p.tsv"
    write_predictions(rows, path)
    assert path.read_text() == "id\ttask1\ttask2\na\tsexist\tobjectification\nb\tnon-sexist\tnon-sexist\n"
    assert read_predictions(path) == rows
    assert format_predictions([]) == "id\ttask1\ttask2\n"
