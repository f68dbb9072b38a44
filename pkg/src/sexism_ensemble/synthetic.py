"""Synthetic EXIST-schema corpora built from pseudo-words.

Every class owns a small set of cue words. A text mixes filler words with a
few cues; each cue comes from the text's own class with probability
``cue_purity`` and from a random other class otherwise. Optional label
noise flips the binary label after the text is drawn. Both bound the
attainable accuracy. Mentions and URLs are sprinkled in so masking is
exercised.
"""

from __future__ import annotations

import itertools

import numpy as np

from .corpus import LANGUAGES, NON_SEXIST, SEXIST, SEXIST_CATEGORIES, TextRecord

_SYLLABLES = {
    "en": ["ba", "ke", "lo", "mi", "nu", "ra", "si", "to", "ve", "wu"],
    "es": ["ca", "de", "fi", "go", "ju", "la", "ño", "pe", "ri", "sá"],
}
_ALL_CLASSES = (NON_SEXIST,) + SEXIST_CATEGORIES


def _pseudo_words(language: str, n: int, offset: int) -> list[str]:
    syl = _SYLLABLES[language]
    combos = itertools.islice(itertools.product(syl, repeat=3), offset, offset + n)
    return ["".join(c) for c in combos]


def lexicon(language: str, cues_per_class: int = 6, n_filler: int = 60) -> dict[str, list[str]]:
    """Cue words per class plus ``"filler"``; disjoint by construction."""
    out = {"filler": _pseudo_words(language, n_filler, 0)}
    for j, cls in enumerate(_ALL_CLASSES):
        out[cls] = _pseudo_words(language, cues_per_class, n_filler + j * cues_per_class)
    return out


def make_corpus(
    n_per_language: int = 200,
    seed: int = 0,
    cue_purity: float = 0.85,
    cues_per_text: int = 3,
    sexist_fraction: float = 0.5,
    label_noise: float = 0.0,
    languages: tuple[str, ...] = LANGUAGES,
    id_prefix: str = "syn",
) -> list[TextRecord]:
    rng = np.random.default_rng(seed)
    records = []
    for lang in languages:
        lex = lexicon(lang)
        for i in range(n_per_language):
            if rng.random() < sexist_fraction:
                cls = SEXIST_CATEGORIES[int(rng.integers(len(SEXIST_CATEGORIES)))]
            else:
                cls = NON_SEXIST
            words = list(rng.choice(lex["filler"], size=int(rng.integers(3, 9))))
            for _ in range(cues_per_text):
                src = cls
                if rng.random() >= cue_purity:
                    others = [c for c in _ALL_CLASSES if c != cls]
                    src = others[int(rng.integers(len(others)))]
                words.insert(int(rng.integers(len(words) + 1)), str(rng.choice(lex[src])))
            if rng.random() < 0.3:
                words.insert(0, f"@user{int(rng.integers(1000))}")
            if rng.random() < 0.2:
                words.append(f"https://t.co/{int(rng.integers(10**6)):06d}")
            if rng.random() < label_noise:
                if cls == NON_SEXIST:
                    cls = SEXIST_CATEGORIES[int(rng.integers(len(SEXIST_CATEGORIES)))]
                else:
                    cls = NON_SEXIST
            records.append(
                TextRecord(
                    id=f"{id_prefix}-{lang}-{i:05d}",
                    source="twitter" if rng.random() < 0.8 else "gab",
                    language=lang,
                    text=" ".join(words),
                    task1=NON_SEXIST if cls == NON_SEXIST else SEXIST,
                    task2=cls,
                )
            )
    return records


def keyword_corpus(n: int = 32, seed: int = 0, language: str = "en") -> list[TextRecord]:
    """Perfectly separable two-class corpus: each text carries one class keyword."""
    rng = np.random.default_rng(seed)
    lex = lexicon(language)
    records = []
    for i in range(n):
        cls = NON_SEXIST if i % 2 == 0 else SEXIST
        cue = lex[NON_SEXIST][0] if cls == NON_SEXIST else lex[SEXIST_CATEGORIES[0]][0]
        words = list(rng.choice(lex["filler"], size=int(rng.integers(3, 7))))
        words.insert(int(rng.integers(len(words) + 1)), cue)
        records.append(TextRecord(f"kw-{i:03d}", "twitter", language, " ".join(words), cls,
                                  NON_SEXIST if cls == NON_SEXIST else SEXIST_CATEGORIES[0]))
    return records


# Settings of the ensemble-gain benchmark: members land around 0.7-0.8 accuracy.
BENCHMARK_CORPUS = dict(cue_purity=0.65, cues_per_text=3, label_noise=0.1, languages=("en",))
BENCHMARK_TRAIN_SIZE = 400
BENCHMARK_HELDOUT_SIZE = 1000


def ensemble_gain_trial(benchmark_seed: int, seeds=(1, 2, 3), epochs: int = 10):
    """Train a 3-member task1 ensemble on one benchmark draw.

    Returns ``(member_accuracies, vote_accuracy)`` on a separately drawn
    held-out set.
    """
    from . import ensemble, tokenizer, trainer

    recs = make_corpus(BENCHMARK_TRAIN_SIZE, seed=100 + benchmark_seed, **BENCHMARK_CORPUS)
    held = make_corpus(BENCHMARK_HELDOUT_SIZE, seed=900 + benchmark_seed, **BENCHMARK_CORPUS)
    cfg = trainer.TrainConfig(max_len=24, seeds=tuple(seeds), split_seed=benchmark_seed, epochs=epochs)
    vocab = tokenizer.build_vocab([r.text for r in recs], 300, 1)
    ens, _ = ensemble.train_ensemble(recs, "task1", "en", vocab, cfg)
    seqs, labels = trainer.labelled_data(held, "task1", vocab, cfg.max_len)
    member_acc = [trainer.accuracy(m, seqs, labels) for m in ens.members]
    preds = ensemble.predict_ensemble_batch(ens, [r.text for r in held])
    vote_acc = float(np.mean([p.label_index == y for p, y in zip(preds, labels)]))
    return member_acc, vote_acc
