import numpy as np
import pytest

from sexism_ensemble import encoder, synthetic, tokenizer, trainer
from sexism_ensemble.corpus import filter_language
from sexism_ensemble.encoder import ClassifierModel, ModelConfig
from sexism_ensemble.errors import ConfigError, NumericalError, TrainingError
from sexism_ensemble.trainer import AdamState, TrainConfig, adam_step, train_one


def scalar_model(x):
    cfg = ModelConfig(vocab_size=1, max_len=1, d_model=1, n_heads=1, n_layers=0, d_ff=1)
    return ClassifierModel(cfg, {"x": np.array([x], dtype=float)}, 0)


def scalar_adam(x, grad_fn, steps, lr, b1=0.9, b2=0.999, eps=1e-8):
    """Textbook scalar Adam, used as the reference."""
    m = v = 0.0
    for t in range(1, steps + 1):
        g = grad_fn(x)
        m = b1 * m + (1 - b1) * g
        v = b2 * v + (1 - b2) * g * g
        x -= lr * (m / (1 - b1**t)) / ((v / (1 - b2**t)) ** 0.5 + eps)
    return x


@pytest.mark.parametrize("g", [0.5, -3.0, 1e-2, 250.0])
def test_first_step_is_lr_times_sign(g):
    model = scalar_model(1.0)
    state = AdamState.zeros_like(model)
    adam_step(model, {"x": np.array([g])}, state, lr=0.01)
    assert model.params["x"][0] - 1.0 == pytest.approx(-0.01 * np.sign(g), abs=0.01 * 1e-6)
    assert state.step_count == 1 and np.all(state.second_moment["x"] >= 0)


def test_zero_gradient_leaves_model_unchanged():
    model = scalar_model(0.3)
    adam_step(model, {"x": np.zeros(1)}, AdamState.zeros_like(model))
    assert model.params["x"][0] == 0.3


def test_fifty_steps_on_quadratic():
    model = scalar_model(1.0)
    state = AdamState.zeros_like(model)
    for _ in range(50):
        adam_step(model, {"x": 2 * model.params["x"]}, state, lr=0.1)
    x = model.params["x"][0]
    assert abs(x) < 0.1
    assert x == pytest.approx(scalar_adam(1.0, lambda v: 2 * v, 50, 0.1), abs=1e-12)


def test_non_finite_gradient_rejected():
    model = scalar_model(1.0)
    with pytest.raises(NumericalError):
        adam_step(model, {"x": np.array([np.nan])}, AdamState.zeros_like(model))


def test_train_config_validation():
    with pytest.raises(ConfigError):
        TrainConfig(seeds=(1, 1)).validate()
    with pytest.raises(ConfigError):
        TrainConfig(epochs=0).validate()
    with pytest.raises(ConfigError):
        TrainConfig(train_fraction=1.0).validate()


@pytest.fixture(scope="module")
def en_data():
    recs = filter_language(synthetic.make_corpus(60, seed=3), "en")
    vocab = tokenizer.build_vocab([r.text for r in recs], 200)
    return recs, vocab


def test_train_one_history_and_selection(en_data, fast_config):
    recs, vocab = en_data
    res = train_one(recs, "task1", "en", vocab, fast_config, seed=1)
    assert len(res.history) == fast_config.epochs
    assert res.best_dev_accuracy == max(h.dev_accuracy for h in res.history)
    first_best = next(h.epoch for h in res.history if h.dev_accuracy == res.best_dev_accuracy)
    assert res.best_epoch == first_best
    _, dev = trainer.split_for_training(recs, "task1", fast_config)
    seqs, labels = trainer.labelled_data(dev, "task1", vocab, fast_config.max_len)
    assert trainer.accuracy(res.model, seqs, labels) == res.best_dev_accuracy


def test_train_one_deterministic(en_data, fast_config):
    recs, vocab = en_data
    a = train_one(recs, "task1", "en", vocab, fast_config, seed=1)
    b = train_one(recs, "task1", "en", vocab, fast_config, seed=1)
    assert a.best_dev_accuracy == b.best_dev_accuracy
    assert a.model.to_bytes() == b.model.to_bytes()


def test_seeds_give_different_histories(en_data, fast_config):
    recs, vocab = en_data
    a = train_one(recs, "task1", "en", vocab, fast_config, seed=1)
    b = train_one(recs, "task1", "en", vocab, fast_config, seed=2)
    assert [h.train_loss for h in a.history] != [h.train_loss for h in b.history]


def test_dev_evaluation_does_not_mutate(en_data, fast_config):
    recs, vocab = en_data
    model = encoder.init_model(fast_config.model_config(vocab.size, 2), 1)
    before = model.to_bytes()
    seqs, labels = trainer.labelled_data(recs, "task1", vocab, fast_config.max_len)
    trainer.accuracy(model, seqs, labels)
    assert model.to_bytes() == before


def test_progress_lines(en_data, fast_config, capsys):
    import sys
    recs, vocab = en_data
    train_one(recs, "task1", "en", vocab, fast_config, seed=1, progress=sys.stdout)
    lines = [l for l in capsys.readouterr().out.splitlines() if l.startswith("epoch=")]
    assert len(lines) == fast_config.epochs
    assert all(l.split()[1].startswith("train_loss=") and l.split()[2].startswith("dev_acc=") for l in lines)


def test_task2_needs_every_category(en_data, fast_config):
    recs, vocab = en_data
    only_two = [r for r in recs if r.task2 in ("objectification", "sexual-violence")]
    with pytest.raises(TrainingError, match="no training examples"):
        train_one(only_two, "task2", "en", vocab, fast_config, seed=1)


def test_wrong_language_rejected(en_data, fast_config):
    recs, vocab = en_data
    with pytest.raises(TrainingError):
        train_one(recs, "task1", "es", vocab, fast_config, seed=1)


def test_overfit_loss_decreases():
    recs = synthetic.keyword_corpus(32)
    cfg = TrainConfig()
    vocab = tokenizer.build_vocab([r.text for r in recs], 200)
    seqs, labels = trainer.labelled_data(recs, "task1", vocab, cfg.max_len)
    model = encoder.init_model(cfg.model_config(vocab.size, 2), 1)
    res = trainer.fit(model, (seqs, labels), ([], []), cfg, np.random.default_rng(1), epochs=5)
    assert res.history[-1].train_loss < res.history[0].train_loss
