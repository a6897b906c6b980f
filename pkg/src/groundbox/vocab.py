"""Token vocabulary with reserved padding/out-of-vocabulary slots."""

from __future__ import annotations

from collections import Counter
from pathlib import Path

PAD_TOKEN = "<pad>"
OOV_TOKEN = "<oov>"
PAD_INDEX = 0
OOV_INDEX = 1


class Vocabulary:
    """Dense token -> index map; indices 0 and 1 are PAD and OOV."""

    def __init__(self, tokens: list[str]):
        for reserved in (PAD_TOKEN, OOV_TOKEN):
            if reserved in tokens:
                raise ValueError(f"vocabulary: reserved token {reserved!r} in word list")
        self._tokens = [PAD_TOKEN, OOV_TOKEN] + list(tokens)
        self._index = {tok: i for i, tok in enumerate(self._tokens)}
        if len(self._index) != len(self._tokens):
            raise ValueError("vocabulary: duplicate tokens")

    @property
    def size(self) -> int:
        return len(self._tokens)

    @property
    def tokens(self) -> list[str]:
        return list(self._tokens)

    def index_of(self, token: str) -> int:
        return self._index.get(token, OOV_INDEX)

    def __contains__(self, token: str) -> bool:
        return token in self._index

    def save(self, path) -> None:
        Path(path).write_text("\n".join(self._tokens) + "\n", encoding="utf-8")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        lines = Path(path).read_text(encoding="utf-8").splitlines()
        if len(lines) < 2 or lines[0] != PAD_TOKEN or lines[1] != OOV_TOKEN:
            raise ValueError(f"vocabulary file {path}: missing reserved header")
        return cls(lines[2:])


def build_vocab(corpus, min_freq: int = 1) -> Vocabulary:
    """Vocabulary over all tokens with frequency >= min_freq.

    Ordering is deterministic: frequency descending, then lexicographic.
    """
    corpus = list(corpus)
    if not corpus:
        raise ValueError("build_vocab: empty corpus")
    counts = Counter()
    for tokens in corpus:
        counts.update(tokens)
    kept = sorted((tok for tok, n in counts.items() if n >= min_freq),
                  key=lambda tok: (-counts[tok], tok))
    return Vocabulary(kept)


def normalize(phrase: str) -> list[str]:
    return phrase.lower().split()


def tokenize(phrase: str, vocab: Vocabulary) -> list[int]:
    """Lowercase, whitespace-split, and map to vocabulary indices."""
    words = normalize(phrase)
    if not words:
        raise ValueError("tokenize: empty phrase")
    return [vocab.index_of(w) for w in words]
