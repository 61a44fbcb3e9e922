from detectorbench.tokenizer import Vocabulary, detokenize, tokenize, word_spans, word_tokenize


def test_empty_text():
    assert tokenize("", Vocabulary(["a"])) == []


def test_lowercase_lookup():
    assert tokenize("A b a", Vocabulary(["a", "b"])) == [0, 1, 0]


def test_oov_maps_to_unknown():
    vocab = Vocabulary(["a"])
    assert tokenize("a qzx", vocab) == [0, vocab.unk_id]


def test_special_ids_are_dense():
    vocab = Vocabulary(["a", "b"])
    assert vocab.tokens == ["a", "b", "<unk>", "<bos>"]
    assert (vocab.unk_id, vocab.bos_id) == (2, 3)
    assert len(vocab) == 4


def test_punctuation_is_tokenized():
    assert word_tokenize("Hello, world! x=f(y)") == [
        "hello", ",", "world", "!", "x", "=", "f", "(", "y", ")"]


def test_round_trip_in_vocabulary():
    vocab = Vocabulary.from_texts(["the cat sat , on the mat ."])
    ids = tokenize("The cat sat, on the mat.", vocab)
    assert tokenize(detokenize(ids, vocab), vocab) == ids


def test_unknown_marker_round_trips():
    vocab = Vocabulary(["a"])
    ids = tokenize("a zzz a", vocab)
    assert tokenize(detokenize(ids, vocab), vocab) == ids


def test_spans_index_the_original_text():
    text = "Über   Naïve, CAFÉ"
    assert [text[s:e] for s, e in word_spans(text)] == ["Über", "Naïve", ",", "CAFÉ"]
