"""Shared model/corpus configuration dataclasses.

Defaults are sized for CPU training: the CLIP-style encoder and the causal
LM are deliberately tiny, with distinct widths (64 vs 128) so the adapter's
input projection is a real dimension change.
"""

from __future__ import annotations

from dataclasses import dataclass, field, asdict


CONTEXT_LENGTH = 77  # fixed token window of the CLIP-style text tower


@dataclass(frozen=True)
class ClipConfig:
    vocab_size: int
    width: int = 64          # d: joint embedding dimension and token feature width
    layers: int = 2
    heads: int = 4
    mlp_ratio: int = 4
    context: int = CONTEXT_LENGTH
    image_size: int = 64


@dataclass(frozen=True)
class LmConfig:
    vocab_size: int
    width: int = 128         # d_LLM
    layers: int = 4
    heads: int = 4
    mlp_ratio: int = 4


@dataclass(frozen=True)
class AdapterConfig:
    llm_width: int = 128
    width: int = 64           # d_q: must equal ClipConfig.width
    queries: int = 77         # Q; multiples of 77 for long-text alignment
    layers: int = 4           # encoder and decoder depth
    heads: int = 4
    mlp_hidden: int = 256     # hidden width of the input projection MLP
    ffn_ratio: int = 4


@dataclass(frozen=True)
class DenoiserConfig:
    latent_channels: int = 4
    width: int = 64
    cond_width: int = 64      # must equal AdapterConfig.width
    cond_tokens: int = 77     # rows of the learned null condition
    heads: int = 4
    time_dim: int = 128
    groups: int = 8


@dataclass(frozen=True)
class AutoencoderConfig:
    image_size: int = 64
    latent_channels: int = 4
    latent_size: int = 8
    width: int = 32
    passthrough: bool = False


@dataclass(frozen=True)
class CorpusConfig:
    languages: tuple = ("en", "pl-1")
    resolution: int = 64
    max_complexity: int = 8
    long_fraction: float = 0.25


# Aesthetic proxy: score = 10 * (w_harmony*harmony + w_center*centering
# + w_overlap*non_overlap); each term lies in [0, 1].
AESTHETIC_WEIGHTS = {"harmony": 0.3, "centering": 0.4, "non_overlap": 0.3}


def config_dict(cfg) -> dict:
    return asdict(cfg)
