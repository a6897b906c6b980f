import pytest

from groundbox.vocab import (OOV_INDEX, PAD_INDEX, Vocabulary, build_vocab,
                             tokenize)


def test_build_vocab_enumeration():
    corpus = [["red", "ball"], ["red", "cube"]]
    v = build_vocab(corpus, min_freq=1)
    assert "red" in v and "ball" in v and "cube" in v
    assert v.size == 5  # 3 words + PAD + OOV


def test_build_vocab_min_freq_threshold():
    corpus = [["red", "ball"], ["red", "cube"]]
    v = build_vocab(corpus, min_freq=2)
    assert "red" in v
    assert "ball" not in v and "cube" not in v
    assert v.index_of("ball") == OOV_INDEX


def test_build_vocab_deterministic_ordering():
    corpus = [["b", "a", "a", "c"], ["c", "a"]]
    v1 = build_vocab(corpus)
    v2 = build_vocab(list(corpus))
    assert v1.tokens == v2.tokens
    # frequency desc then lexicographic: a(3), c(2), b(1)
    assert v1.tokens[2:] == ["a", "c", "b"]


def test_build_vocab_rejects_empty():
    with pytest.raises(ValueError):
        build_vocab([])


def test_tokenize_normalization_and_oov():
    v = build_vocab([["red", "ball"]])
    assert tokenize("Red  Ball", v) == [v.index_of("red"), v.index_of("ball")]
    assert tokenize("zebra", v) == [OOV_INDEX]


def test_tokenize_rejects_empty_phrase():
    v = build_vocab([["x"]])
    with pytest.raises(ValueError):
        tokenize("   ", v)


def test_tokenize_length_preserving():
    v = build_vocab([["a", "b"]])
    phrase = "a b unseen a"
    assert len(tokenize(phrase, v)) == len(phrase.split())


def test_reserved_indices_stable_across_save_load(tmp_path):
    v = build_vocab([["red", "ball", "cube"]])
    path = tmp_path / "vocab.txt"
    v.save(path)
    loaded = Vocabulary.load(path)
    assert loaded.tokens == v.tokens
    assert loaded.index_of("red") == v.index_of("red")
    assert loaded.tokens[PAD_INDEX] == "<pad>"
    assert loaded.tokens[OOV_INDEX] == "<oov>"


def test_load_rejects_missing_header(tmp_path):
    path = tmp_path / "vocab.txt"
    path.write_text("red\nball\n", encoding="utf-8")
    with pytest.raises(ValueError, match="reserved header"):
        Vocabulary.load(path)
