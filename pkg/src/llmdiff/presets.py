"""Canonical desk-scale configuration.

One place for the budgets used by the experiment scripts and the
acceptance suite: big enough for the qualitative trends to show, small
enough for a single CPU core.
"""

from __future__ import annotations

from llmdiff.pipeline.stages import StageConfig, WorkspaceConfig
from llmdiff.text.clip import ClipTrainConfig
from llmdiff.text.lm import LmTrainConfig
from llmdiff.diffusion.autoencoder import AutoencoderTrainConfig


def desk_workspace_config(seed: int = 0) -> WorkspaceConfig:
    return WorkspaceConfig(
        languages=("en", "pl-1"),
        stage1_size=512,
        stage1_long_fraction=0.25,
        paired_size=640,
        eval_size=48,
        seed=seed,
        clip_train=ClipTrainConfig(steps=1000, batch_size=64, lr=3e-4, seed=seed),
        lm_train=LmTrainConfig(steps=1000, batch_size=32, lr=3e-4, seed=seed),
        autoencoder_train=AutoencoderTrainConfig(steps=1500, batch_size=32, lr=2e-3, seed=seed),
        base_denoiser_steps=400,
        clip_corpus_size=2048,
    )


def desk_stage_configs(seed: int = 0, loss_variant: str = "cos-mag",
                       lam: float = 0.1) -> dict:
    return {
        1: StageConfig(stage=1, steps=1000, batch_size=16, lr=1e-3, seed=seed,
                       loss_variant=loss_variant, lam=lam),
        2: StageConfig(stage=2, steps=3000, batch_size=16, lr=1e-3, seed=seed,
                       drop_prob=0.1),
        3: StageConfig(stage=3, steps=300, batch_size=16, lr=3e-4, seed=seed,
                       drop_prob=0.1, aesthetic_top_fraction=0.05),
    }


EVAL_STEPS = 30
EVAL_GUIDANCE = 3.0
