"""Lowercased word-level tokenization and the vocabulary it maps into."""

import re

UNK = "<unk>"
BOS = "<bos>"

# special markers stay atomic so detokenize -> tokenize round-trips
_TOKEN_RE = re.compile(r"<unk>|<bos>|\w+|[^\w\s]", re.UNICODE | re.IGNORECASE)


def word_spans(text):
    """``(start, end)`` character offsets of each token in ``text``."""
    return [m.span() for m in _TOKEN_RE.finditer(text)]


def word_tokenize(text):
    """Split on whitespace; punctuation marks become single tokens."""
    return [tok.lower() for tok in _TOKEN_RE.findall(text)]


class Vocabulary:
    """Dense token <-> id mapping with reserved unknown and BOS entries.

    Special tokens missing from ``tokens`` are appended, so
    ``Vocabulary(["a", "b"])`` has ids ``a=0, b=1, <unk>=2, <bos>=3``.
    """

    def __init__(self, tokens, unk=UNK, bos=BOS):
        tokens = list(tokens)
        for special in (unk, bos):
            if special not in tokens:
                tokens.append(special)
        if len(set(tokens)) != len(tokens):
            raise ValueError("vocabulary tokens must be unique")
        self.tokens = tokens
        self.index = {tok: i for i, tok in enumerate(tokens)}
        self.unk = unk
        self.bos = bos
        self.unk_id = self.index[unk]
        self.bos_id = self.index[bos]

    @classmethod
    def from_texts(cls, texts):
        """Sorted vocabulary over every token seen in ``texts``."""
        seen = set()
        for text in texts:
            seen.update(word_tokenize(text) if isinstance(text, str) else text)
        seen.discard(UNK)
        seen.discard(BOS)
        return cls(sorted(seen))

    def __len__(self):
        return len(self.tokens)

    def __contains__(self, token):
        return token in self.index

    def __eq__(self, other):
        return (isinstance(other, Vocabulary) and self.tokens == other.tokens
                and self.unk == other.unk and self.bos == other.bos)

    def encode(self, words):
        return [self.index.get(w, self.unk_id) for w in words]

    def decode(self, ids):
        return [self.tokens[i] for i in ids]


def tokenize(text, vocab):
    """Text -> token ids; out-of-vocabulary words map to the unknown id."""
    return vocab.encode(word_tokenize(text))


def detokenize(ids, vocab):
    return " ".join(vocab.decode(ids))
