from llmdiff.corpus.scenes import (
    COLOR_TABLE,
    SHAPES,
    ObjectSpec,
    SceneSpec,
    generate_scene,
    render_image,
)
from llmdiff.corpus.aesthetics import aesthetic_proxy, aesthetic_terms
from llmdiff.corpus.language import LanguageRegistry
from llmdiff.corpus.captions import compose_caption, Prompt, TextPair
from llmdiff.corpus.corpus import (
    CorpusEntry,
    Stage1Corpus,
    build_stage1_corpus,
    build_paired_corpus,
    dump_corpus,
    load_corpus,
)

__all__ = [
    "COLOR_TABLE",
    "SHAPES",
    "ObjectSpec",
    "SceneSpec",
    "generate_scene",
    "render_image",
    "aesthetic_proxy",
    "aesthetic_terms",
    "LanguageRegistry",
    "compose_caption",
    "Prompt",
    "TextPair",
    "CorpusEntry",
    "Stage1Corpus",
    "build_stage1_corpus",
    "build_paired_corpus",
    "dump_corpus",
    "load_corpus",
]
