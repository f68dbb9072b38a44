"""Frequency-selected WordPiece vocabularies and fixed-length encoding."""

from __future__ import annotations

import os
import unicodedata
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import kernels
from .errors import ConfigError, SchemaError
from .io import atomic_write_text
from .textprep import MASK_TOKENS

PAD, UNK, CLS, SEP = "[PAD]", "[UNK]", "[CLS]", "[SEP]"
SPECIALS = (PAD, UNK, CLS, SEP)
PAD_ID, UNK_ID, CLS_ID, SEP_ID = 0, 1, 2, 3
CONTINUATION = "##"
MAX_WORD_CHARS = 100


@dataclass(frozen=True)
class Vocabulary:
    tokens: tuple[str, ...]
    token_to_id: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.tokens[: len(SPECIALS)] != SPECIALS:
            raise SchemaError("vocabulary must start with [PAD], [UNK], [CLS], [SEP]")
        mapping = {}
        for i, tok in enumerate(self.tokens):
            if not tok or tok in mapping:
                raise SchemaError(f"vocabulary token {i} is empty or duplicated: {tok!r}")
            mapping[tok] = i
        object.__setattr__(self, "token_to_id", mapping)

    @property
    def size(self) -> int:
        return len(self.tokens)

    def __len__(self) -> int:
        return len(self.tokens)

    def __contains__(self, token: str) -> bool:
        return token in self.token_to_id

    def save(self, path: str | os.PathLike) -> None:
        atomic_write_text(path, "".join(t + "\n" for t in self.tokens))

    @classmethod
    def load(cls, path: str | os.PathLike) -> "Vocabulary":
        with open(path, "rb") as fh:
            data = fh.read().decode("utf-8")
        if not data.endswith("\n"):
            raise SchemaError(f"{path}: vocabulary file must end with a newline")
        return cls(tuple(data[:-1].split("\n")))


@dataclass(frozen=True)
class TokenSequence:
    ids: np.ndarray
    mask: np.ndarray
    true_length: int

    @property
    def max_len(self) -> int:
        return len(self.ids)


def normalise_words(text: str) -> list[str]:
    """NFC-normalise, lowercase and whitespace-split, keeping mask tokens intact.

    A word that starts with a mask token (``__mention__,``) is split after it.
    """
    words = []
    for raw in text.split():
        for tok in MASK_TOKENS:
            if raw.startswith(tok):
                words.append(tok)
                raw = raw[len(tok):]
                break
        if raw:
            words.append(unicodedata.normalize("NFC", raw).lower())
    return words


def build_vocab(texts: Iterable[str], target_size: int, min_frequency: int = 1) -> Vocabulary:
    """Build a deterministic WordPiece vocabulary.

    Layout: the four specials, the two mask tokens, the character alphabet
    (word-initial characters bare, inner characters ``##``-prefixed), then
    multi-character pieces ranked by frequency with lexicographic tie-break.
    Candidate pieces are every word prefix of length >= 2 (whole words
    included) and every ``##``-suffix of length >= 2, each counted once per
    word occurrence.
    """
    word_freq: Counter[str] = Counter()
    n_texts = 0
    for text in texts:
        n_texts += 1
        word_freq.update(w for w in normalise_words(text) if w not in MASK_TOKENS)
    if n_texts == 0:
        raise ConfigError("cannot build a vocabulary from no texts")

    alphabet = set()
    candidates: Counter[str] = Counter()
    for word, freq in word_freq.items():
        if len(word) > MAX_WORD_CHARS:
            continue
        alphabet.add(word[0])
        alphabet.update(CONTINUATION + ch for ch in word[1:])
        for end in range(2, len(word) + 1):
            candidates[word[:end]] += freq
        for start in range(1, len(word) - 1):
            candidates[CONTINUATION + word[start:]] += freq

    base = list(SPECIALS) + list(MASK_TOKENS) + sorted(alphabet)
    if target_size < len(base):
        raise ConfigError(
            f"target_size {target_size} is smaller than specials + alphabet ({len(base)})"
        )
    ranked = sorted(
        (tok for tok, f in candidates.items() if f >= min_frequency and tok not in alphabet),
        key=lambda tok: (-candidates[tok], tok),
    )
    return Vocabulary(tuple(base + ranked[: target_size - len(base)]))


def encode_words(vocab: Vocabulary, words: Sequence[str]) -> list[int]:
    return kernels.wordpiece_ids(list(words), vocab.token_to_id, UNK_ID, MAX_WORD_CHARS)


def encode(vocab: Vocabulary, text: str, max_len: int) -> TokenSequence:
    """Encode masked text to ``[CLS] pieces... [SEP] [PAD]...`` of length ``max_len``."""
    if max_len < 3:
        raise ConfigError(f"max_len must be >= 3, got {max_len}")
    pieces = encode_words(vocab, normalise_words(text))[: max_len - 2]
    ids = np.full(max_len, PAD_ID, dtype=np.int64)
    ids[0] = CLS_ID
    ids[1 : 1 + len(pieces)] = pieces
    true_length = len(pieces) + 2
    ids[true_length - 1] = SEP_ID
    mask = np.zeros(max_len, dtype=np.int8)
    mask[:true_length] = 1
    return TokenSequence(ids=ids, mask=mask, true_length=true_length)


def stack(seqs: Sequence[TokenSequence]) -> tuple[np.ndarray, np.ndarray]:
    """Batch arrays ``(ids, mask)`` of shape ``(len(seqs), max_len)``."""
    ids = np.stack([s.ids for s in seqs])
    mask = np.stack([s.mask for s in seqs]).astype(bool)
    return ids, mask
