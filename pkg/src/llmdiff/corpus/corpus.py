"""Corpus assembly and the line-oriented dump format.

Dump format: one JSON record per line with keys
{scene_seed, language, length_mode, caption, aesthetic}; images are stored
as lossless PNGs named `<scene_seed>.png` next to the dump file.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from llmdiff.errors import InvalidArgumentError
from llmdiff.seeding import derive_seed, numpy_rng
from llmdiff.corpus.scenes import SceneSpec, generate_scene, render_image
from llmdiff.corpus.aesthetics import aesthetic_proxy
from llmdiff.corpus.captions import Prompt, TextPair, compose_caption
from llmdiff.corpus.language import LanguageRegistry


@dataclass(frozen=True)
class CorpusEntry:
    scene_seed: int
    prompt: Prompt
    aesthetic: float

    @property
    def scene(self) -> SceneSpec:
        return generate_scene(self.scene_seed, complexity=_complexity_for(self.scene_seed))


# Scene complexity is itself derived from the scene seed so an entry is
# reconstructible from its seed alone.
def _complexity_for(scene_seed: int) -> int:
    return 1 + derive_seed("complexity", scene_seed) % 3


def _make_scene(scene_seed: int) -> SceneSpec:
    return generate_scene(scene_seed, complexity=_complexity_for(scene_seed))


@dataclass(frozen=True)
class Stage1Corpus:
    """English prompts plus aligned bilingual pairs over the same scenes."""

    english: tuple          # n Prompt, one per scene
    pairs: dict             # language -> tuple of n TextPair
    scene_seeds: tuple      # n ints, aligned with `english`

    def entries(self) -> list:
        """Flatten to CorpusEntry records (English first, then each language)."""
        out = []
        for seed, prompt in zip(self.scene_seeds, self.english):
            out.append(CorpusEntry(seed, prompt, aesthetic_proxy(_make_scene(seed))))
        for lang in sorted(self.pairs):
            for seed, pair in zip(self.scene_seeds, self.pairs[lang]):
                out.append(
                    CorpusEntry(seed, pair.other, aesthetic_proxy(_make_scene(seed)))
                )
        return out


def build_stage1_corpus(
    n: int,
    languages=("pl-1",),
    long_fraction: float = 0.25,
    seed: int = 0,
    registry: LanguageRegistry | None = None,
) -> Stage1Corpus:
    """n English prompts and n aligned TextPairs per non-English language.

    Pairs reuse the English scenes, so pair texts are exact translations of
    the corresponding English prompts. A `long_fraction` share of prompts
    uses long mode (>77 tokens).
    """
    if n < 1:
        raise InvalidArgumentError("corpus size must be >= 1")
    if not 0.0 <= long_fraction <= 1.0:
        raise InvalidArgumentError("long_fraction must lie in [0, 1]")
    registry = registry or LanguageRegistry(("en",) + tuple(languages))
    for lang in languages:
        registry.check(lang)
    rng = numpy_rng("stage1-corpus", seed)
    scene_seeds = []
    english = []
    modes = []
    n_long = int(round(n * long_fraction))
    for i in range(n):
        scene_seed = derive_seed("stage1-scene", seed, i)
        mode = "long" if i < n_long else "short"
        scene_seeds.append(scene_seed)
        modes.append(mode)
        english.append(compose_caption(_make_scene(scene_seed), "en", mode, registry))
    # Shuffle so long prompts are spread across the corpus order.
    order = rng.permutation(n)
    scene_seeds = [scene_seeds[i] for i in order]
    english = [english[i] for i in order]
    modes = [modes[i] for i in order]
    pairs = {}
    for lang in languages:
        if lang == "en":
            continue
        lang_pairs = []
        for scene_seed, eng, mode in zip(scene_seeds, english, modes):
            other = compose_caption(_make_scene(scene_seed), lang, mode, registry)
            lang_pairs.append(TextPair(english=eng, other=other))
        pairs[lang] = tuple(lang_pairs)
    return Stage1Corpus(
        english=tuple(english), pairs=pairs, scene_seeds=tuple(scene_seeds)
    )


def build_paired_corpus(
    n: int,
    languages=("en",),
    seed: int = 0,
    long_fraction: float = 0.0,
    registry: LanguageRegistry | None = None,
) -> list:
    """(image, caption) corpus entries for text-image training and eval.

    One entry per (scene, language); languages beyond "en" produce aligned
    captions of the same scenes.
    """
    if n < 1:
        raise InvalidArgumentError("corpus size must be >= 1")
    registry = registry or LanguageRegistry(
        ("en",) + tuple(l for l in languages if l != "en")
    )
    entries = []
    n_long = int(round(n * long_fraction))
    for i in range(n):
        scene_seed = derive_seed("paired-scene", seed, i)
        scene = _make_scene(scene_seed)
        score = aesthetic_proxy(scene)
        mode = "long" if i < n_long else "short"
        for lang in languages:
            prompt = compose_caption(scene, lang, mode, registry)
            entries.append(CorpusEntry(scene_seed, prompt, score))
    return entries


def render_entry(entry: CorpusEntry, resolution: int = 64) -> np.ndarray:
    return render_image(_make_scene(entry.scene_seed), resolution)


def dump_corpus(entries, path, image_dir=None, resolution: int = 64) -> None:
    """Write JSONL records; optionally render PNGs named by scene seed."""
    path = Path(path)
    with path.open("w") as fh:
        for e in entries:
            fh.write(
                json.dumps(
                    {
                        "scene_seed": e.scene_seed,
                        "language": e.prompt.language,
                        "length_mode": e.prompt.length_mode,
                        "caption": e.prompt.text,
                        "aesthetic": e.aesthetic,
                    }
                )
                + "\n"
            )
    if image_dir is not None:
        image_dir = Path(image_dir)
        image_dir.mkdir(parents=True, exist_ok=True)
        for seed in sorted({e.scene_seed for e in entries}):
            arr = render_image(_make_scene(seed), resolution)
            img = PILImage.fromarray((arr * 255.0 + 0.5).astype(np.uint8))
            img.save(image_dir / f"{seed}.png")


def load_corpus(path) -> list:
    entries = []
    with Path(path).open() as fh:
        for line in fh:
            rec = json.loads(line)
            entries.append(
                CorpusEntry(
                    scene_seed=rec["scene_seed"],
                    prompt=Prompt(
                        text=rec["caption"],
                        language=rec["language"],
                        length_mode=rec["length_mode"],
                    ),
                    aesthetic=rec["aesthetic"],
                )
            )
    return entries
