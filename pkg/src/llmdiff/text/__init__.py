from llmdiff.text.tokenizer import Vocabulary, TokenSequence, tokenize
from llmdiff.text.clip import ClipEncoder, pretrain_clip
from llmdiff.text.lm import CausalLm, pretrain_lm

__all__ = [
    "Vocabulary",
    "TokenSequence",
    "tokenize",
    "ClipEncoder",
    "pretrain_clip",
    "CausalLm",
    "pretrain_lm",
]
