"""Caption tokenization and the text vocabulary."""

import json
from collections import Counter

# Reserved indices are fixed so checkpoints stay stable across rebuilds.
PAD, BOS, EOS, UNK = 0, 1, 2, 3
RESERVED_TOKENS = ["<pad>", "<bos>", "<eos>", "<unk>"]

_PUNCTUATION = set("!\"#$%&'()*+,-./:;<=>?@[\\]^_`{|}~")


def tokenize(sentence: str) -> list[str]:
    """Lowercase and split on whitespace, separating punctuation into
    standalone tokens. No stemming."""
    out = []
    buf = []
    for ch in sentence.lower():
        if ch.isspace():
            if buf:
                out.append("".join(buf))
                buf = []
        elif ch in _PUNCTUATION:
            if buf:
                out.append("".join(buf))
                buf = []
            out.append(ch)
        else:
            buf.append(ch)
    if buf:
        out.append("".join(buf))
    return out


def detokenize(tokens: list[str]) -> str:
    return " ".join(tokens)


class TextVocabulary:
    """Token <-> index map with fixed reserved indices 0..3."""

    def __init__(self, content_tokens: list[str]):
        self.tokens = RESERVED_TOKENS + list(content_tokens)
        self.index = {tok: i for i, tok in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise ValueError("duplicate tokens in vocabulary")

    def __len__(self) -> int:
        return len(self.tokens)

    def encode(self, tokens: list[str]) -> list[int]:
        return [self.index.get(tok, UNK) for tok in tokens]

    def decode(self, indices: list[int]) -> list[str]:
        return [self.tokens[i] for i in indices]

    def save(self, path) -> None:
        with open(path, "w") as f:
            json.dump(self.tokens, f, indent=0)

    @classmethod
    def load(cls, path) -> "TextVocabulary":
        with open(path) as f:
            tokens = json.load(f)
        if tokens[:4] != RESERVED_TOKENS:
            raise ValueError(f"{path}: reserved tokens missing or reordered")
        return cls(tokens[4:])


def build_text_vocabulary(records, min_freq: int = 1) -> TextVocabulary:
    """Vocabulary of caption tokens with corpus frequency >= min_freq.

    Content tokens are ordered by frequency descending, ties broken
    lexicographically, so the mapping is deterministic.
    """
    if min_freq < 1:
        raise ValueError(f"min_freq must be >= 1, got {min_freq}")
    counts = Counter()
    for record in records:
        for event in record.events:
            counts.update(event.caption)
    if not counts:
        raise ValueError("empty caption corpus")
    ordered = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    content = [tok for tok, c in ordered if c >= min_freq]
    return TextVocabulary(content)
