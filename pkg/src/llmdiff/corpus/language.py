"""Languages: English plus deterministic pseudo-languages.

A pseudo-language (tag "pl-1", "pl-2", ...) is a word-level bijection of
English over the closed caption vocabulary. Syntax and word order are
shared with English; punctuation maps to itself. This provides genuine
parallel bilingual data without any real translation resources.
"""

from __future__ import annotations

import hashlib

from llmdiff.errors import InvalidArgumentError
from llmdiff.corpus.scenes import COLOR_TABLE, SHAPES

PUNCTUATION = (",", ".")

# Closed English vocabulary of the caption grammar. Captions are emitted
# token-by-token, so this list is exhaustive by construction.
_FUNCTION_WORDS = (
    "a", "the", "on", "in", "of", "with", "and", "is", "its",
    "scene", "background", "canvas", "backdrop", "shows", "sits", "stays",
    "filled", "appears", "holds", "drawn", "paint", "plain", "shape",
    "form", "every", "behind", "region", "tone", "area", "near",
    "outline", "solid", "quiet",
)
_SIZE_WORDS = ("small", "medium", "large")
_POSITION_WORDS = ("upper", "middle", "lower", "left", "center", "right")

ENGLISH_WORDS = tuple(
    sorted(
        set(_FUNCTION_WORDS)
        | set(_SIZE_WORDS)
        | set(_POSITION_WORDS)
        | set(SHAPES)
        | set(COLOR_TABLE)
    )
)

_CONSONANTS = "bdfgklmnprstvz"
_VOWELS = "aeiou"


def _pseudo_word(language: str, word: str, taken: set) -> str:
    """Deterministic pronounceable surface form for (language, word)."""
    salt = 0
    while True:
        digest = hashlib.sha256(f"{language}|{word}|{salt}".encode()).digest()
        n_syllables = 2 + digest[0] % 2
        chars = []
        for i in range(n_syllables):
            chars.append(_CONSONANTS[digest[1 + 2 * i] % len(_CONSONANTS)])
            chars.append(_VOWELS[digest[2 + 2 * i] % len(_VOWELS)])
        candidate = "".join(chars)
        if candidate not in taken:
            return candidate
        salt += 1


class LanguageRegistry:
    """Registered language tags and their word bijections."""

    def __init__(self, languages=("en", "pl-1")):
        if "en" not in languages:
            raise InvalidArgumentError("the registry must include 'en'")
        self.languages = tuple(languages)
        self._encode = {}  # language -> {english word -> surface form}
        self._decode = {}  # language -> inverse map
        taken = set(ENGLISH_WORDS) | set(PUNCTUATION)
        for lang in self.languages:
            if lang == "en":
                continue
            fwd = {}
            for word in ENGLISH_WORDS:
                surface = _pseudo_word(lang, word, taken)
                taken.add(surface)
                fwd[word] = surface
            for p in PUNCTUATION:
                fwd[p] = p
            self._encode[lang] = fwd
            self._decode[lang] = {v: k for k, v in fwd.items()}

    def check(self, language: str) -> None:
        if language not in self.languages:
            raise InvalidArgumentError(f"unregistered language {language!r}")

    def encode_word(self, word: str, language: str) -> str:
        """English word -> surface form in `language`."""
        self.check(language)
        if language == "en":
            return word
        try:
            return self._encode[language][word]
        except KeyError:
            raise InvalidArgumentError(
                f"word {word!r} is outside the caption vocabulary"
            ) from None

    def decode_word(self, surface: str, language: str) -> str:
        """Surface form in `language` -> English word."""
        self.check(language)
        if language == "en":
            return surface
        try:
            return self._decode[language][surface]
        except KeyError:
            raise InvalidArgumentError(
                f"{surface!r} is not a {language} word"
            ) from None

    def translate_tokens(self, tokens, language: str):
        return [self.encode_word(t, language) for t in tokens]

    def words_for(self, language: str):
        """All surface forms of `language`, excluding shared punctuation."""
        self.check(language)
        if language == "en":
            return list(ENGLISH_WORDS)
        return sorted(w for w in self._decode[language] if w not in PUNCTUATION)

    def full_vocabulary(self):
        """Every surface form over all registered languages, plus punctuation."""
        words = list(ENGLISH_WORDS) + list(PUNCTUATION)
        for lang in self.languages:
            if lang != "en":
                words.extend(self.words_for(lang))
        return words
