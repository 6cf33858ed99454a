"""Caption grammar: deterministic short and long descriptions of a scene."""

from __future__ import annotations

from dataclasses import dataclass

from llmdiff.errors import InvalidArgumentError
from llmdiff.corpus.scenes import SceneSpec, ObjectSpec
from llmdiff.corpus.language import LanguageRegistry

LONG_TOKEN_THRESHOLD = 77  # long captions must tokenize to strictly more


@dataclass(frozen=True)
class Prompt:
    text: str
    language: str
    length_mode: str  # "short" | "long"


@dataclass(frozen=True)
class TextPair:
    english: Prompt
    other: Prompt


def size_word(size: float) -> str:
    if size < 0.45:
        return "small"
    if size < 0.70:
        return "medium"
    return "large"


def position_words(position) -> list:
    x, y = position
    row = "upper" if y < 1 / 3 else ("middle" if y < 2 / 3 else "lower")
    col = "left" if x < 1 / 3 else ("center" if x < 2 / 3 else "right")
    if row == "middle" and col == "center":
        return ["center"]
    return [row, col]


def _object_phrase(obj: ObjectSpec) -> list:
    return ["a", size_word(obj.size), obj.color, obj.shape, "in", "the"] + \
        position_words(obj.position)


def short_caption_tokens(scene: SceneSpec) -> list:
    tokens = ["a", "scene", "on", "a", scene.background, "background", "shows"]
    for i, obj in enumerate(scene.objects):
        if i > 0:
            tokens.append(",")
            if i == len(scene.objects) - 1:
                tokens.append("and")
        tokens.extend(_object_phrase(obj))
    tokens.append(".")
    return tokens


def _detail_clause(scene: SceneSpec, obj: ObjectSpec, template_index: int) -> list:
    t = template_index % 5
    if t == 0:
        return ["the", obj.color, obj.shape, "sits", "in", "the"] + \
            position_words(obj.position) + ["region", "of", "the", "canvas", "."]
    if t == 1:
        return ["its", "form", "is", "a", "plain", obj.shape, "filled",
                "with", obj.color, "paint", "."]
    if t == 2:
        return ["the", size_word(obj.size), "outline", "of", "the", obj.shape,
                "appears", obj.color, "and", "solid", "."]
    if t == 3:
        return ["the", "backdrop", "stays", scene.background, "behind",
                "every", "shape", "."]
    return ["a", "quiet", scene.background, "tone", "holds", "the", "area",
            "near", "the", obj.shape, "."]


def long_caption_tokens(scene: SceneSpec) -> list:
    tokens = short_caption_tokens(scene)
    k = 0
    while len(tokens) <= LONG_TOKEN_THRESHOLD:
        obj = scene.objects[k % len(scene.objects)]
        tokens.extend(_detail_clause(scene, obj, k))
        k += 1
    return tokens


def compose_caption(
    scene: SceneSpec,
    language: str = "en",
    length_mode: str = "short",
    registry: LanguageRegistry | None = None,
) -> Prompt:
    """Deterministic caption for a scene in a registered language."""
    registry = registry or LanguageRegistry()
    registry.check(language)
    if length_mode == "short":
        tokens = short_caption_tokens(scene)
    elif length_mode == "long":
        tokens = long_caption_tokens(scene)
    else:
        raise InvalidArgumentError(f"unknown length_mode {length_mode!r}")
    if language != "en":
        tokens = registry.translate_tokens(tokens, language)
    return Prompt(text=" ".join(tokens), language=language, length_mode=length_mode)
