import numpy as np
import pytest

from sexism_ensemble import synthetic, tokenizer
from sexism_ensemble.encoder import ModelConfig, init_model
from sexism_ensemble.trainer import TrainConfig

TINY = ModelConfig(vocab_size=20, max_len=8, d_model=8, n_heads=2, n_layers=1, d_ff=16,
                   n_classes=2, dropout_rate=0.0)


@pytest.fixture
def tiny_model():
    return init_model(TINY, seed=3)


@pytest.fixture
def tiny_batch():
    rng = np.random.default_rng(0)
    ids = rng.integers(4, TINY.vocab_size, size=(4, TINY.max_len))
    mask = np.zeros_like(ids, dtype=bool)
    for i, n in enumerate([8, 5, 3, 6]):
        mask[i, :n] = True
        ids[i, n:] = tokenizer.PAD_ID
    ids[:, 0] = tokenizer.CLS_ID
    return ids, mask, np.array([0, 1, 1, 0])


@pytest.fixture(scope="session")
def synthetic_records():
    return synthetic.make_corpus(60, seed=7)


@pytest.fixture
def fast_config():
    return TrainConfig(epochs=2, max_len=16, d_model=16, n_heads=2, n_layers=1, d_ff=32,
                       seeds=(1, 2, 3), batch_size=16)
