"""Word-level tokenizer over the project vocabulary.

The vocabulary covers every surface form of every registered language plus
special tokens. Out-of-vocabulary words map to <unk>. The vocabulary file
format is one token per line: `<id>\t<token>`.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from llmdiff.errors import InvalidArgumentError
from llmdiff.corpus.language import LanguageRegistry

PAD, UNK, BOS = "<pad>", "<unk>", "<bos>"
SPECIALS = (PAD, UNK, BOS)

_TOKEN_RE = re.compile(r"[a-z0-9<>-]+|[^\sa-z0-9<>-]")


@dataclass(frozen=True)
class TokenSequence:
    ids: tuple
    language: str

    @property
    def count(self) -> int:
        return len(self.ids)


class Vocabulary:
    def __init__(self, tokens):
        self.tokens = tuple(tokens)
        self.index = {t: i for i, t in enumerate(self.tokens)}
        if len(self.index) != len(self.tokens):
            raise InvalidArgumentError("vocabulary contains duplicate tokens")
        for s in SPECIALS:
            if s not in self.index:
                raise InvalidArgumentError(f"vocabulary is missing {s}")
        self.pad_id = self.index[PAD]
        self.unk_id = self.index[UNK]
        self.bos_id = self.index[BOS]

    def __len__(self) -> int:
        return len(self.tokens)

    @classmethod
    def from_registry(cls, registry: LanguageRegistry) -> "Vocabulary":
        return cls(list(SPECIALS) + sorted(set(registry.full_vocabulary())))

    def save(self, path) -> None:
        with Path(path).open("w") as fh:
            for i, tok in enumerate(self.tokens):
                fh.write(f"{i}\t{tok}\n")

    @classmethod
    def load(cls, path) -> "Vocabulary":
        tokens = []
        with Path(path).open() as fh:
            for line in fh:
                idx, tok = line.rstrip("\n").split("\t")
                if int(idx) != len(tokens):
                    raise InvalidArgumentError("vocabulary file ids are not dense")
                tokens.append(tok)
        return cls(tokens)


def split_words(text: str) -> list:
    return _TOKEN_RE.findall(text.lower())


def tokenize(text: str, language: str, vocab: Vocabulary) -> TokenSequence:
    """Whitespace/punctuation word tokenization; OOV becomes <unk>."""
    if not text or not text.strip():
        raise InvalidArgumentError("cannot tokenize empty text")
    words = split_words(text)
    ids = tuple(vocab.index.get(w, vocab.unk_id) for w in words)
    return TokenSequence(ids=ids, language=language)
