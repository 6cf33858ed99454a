"""Workspace layout and the three-stage training orchestrator.

Stage 1 trains the adapter only against frozen CLIP targets; stage 2
trains adapter + denoiser end-to-end with the LM frozen; stage 3 repeats
stage 2 on the aesthetic-filtered slice of the corpus. Every stage is
resumable: model/optimizer/step state checkpoints mid-run and continuing
reproduces the uninterrupted run bitwise.
"""

from __future__ import annotations

import copy
import json
import math
import time
from dataclasses import asdict, dataclass, field, replace
from pathlib import Path

import numpy as np
import torch

from llmdiff.config import (
    AdapterConfig,
    AutoencoderConfig,
    ClipConfig,
    DenoiserConfig,
    LmConfig,
)
from llmdiff.errors import (
    EmptyDatasetError,
    InvalidArgumentError,
    NotInitializedError,
)
from llmdiff.seeding import derive_seed
from llmdiff.bundle import ModelBundle
from llmdiff.corpus.corpus import build_paired_corpus, build_stage1_corpus, render_entry
from llmdiff.corpus.language import LanguageRegistry
from llmdiff.text.tokenizer import Vocabulary, tokenize
from llmdiff.text.clip import ClipTrainConfig, build_clip, image_to_tensor, pretrain_clip
from llmdiff.text.lm import LmTrainConfig, build_lm, pretrain_lm
from llmdiff.adapter import build_adapter
from llmdiff.alignment import AlignmentDataset, Stage1Config, Stage1Trainer
from llmdiff.diffusion.autoencoder import (
    AutoencoderTrainConfig,
    build_autoencoder,
    train_autoencoder,
)
from llmdiff.diffusion.denoiser import build_denoiser
from llmdiff.diffusion.training import DiffusionTrainConfig, DiffusionTrainer
from llmdiff.pipeline.checkpoint import (
    arrays_checksum,
    load_checkpoint,
    load_optimizer_arrays,
    module_arrays,
    optimizer_arrays,
    save_checkpoint,
)
from llmdiff.pipeline.models_io import load_model, save_model


# ---------------------------------------------------------------------------
# Stage configuration and run records
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class StageConfig:
    stage: int
    steps: int
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    loss_variant: str = "cos-mag"   # stage 1
    lam: float = 0.1                # stage 1
    drop_prob: float = 0.1          # stages 2-3
    adapter_lr_scale: float = 1.0   # stages 2-3
    aesthetic_top_fraction: float = 0.05  # stage 3
    aesthetic_floor: float = 0.0          # stage 3

    def validate(self) -> None:
        if self.stage not in (1, 2, 3):
            raise InvalidArgumentError(f"stage must be 1, 2, or 3, got {self.stage}")
        if self.steps < 0:
            raise InvalidArgumentError("steps must be >= 0")
        if self.batch_size < 1:
            raise InvalidArgumentError("batch_size must be >= 1")
        if not 0.0 <= self.drop_prob <= 1.0:
            raise InvalidArgumentError("drop_prob must lie in [0, 1]")
        if not 0.0 < self.aesthetic_top_fraction <= 1.0:
            raise InvalidArgumentError("aesthetic_top_fraction must lie in (0, 1]")


@dataclass
class RunRecord:
    stages: dict
    wall_clock: float
    checkpoints: dict
    metrics: dict | None = None
    history: dict | None = None

    def to_dict(self) -> dict:
        return {
            "stages": self.stages,
            "wall_clock": self.wall_clock,
            "checkpoints": self.checkpoints,
            "metrics": self.metrics,
            "history": self.history,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "RunRecord":
        return cls(
            stages=d["stages"],
            wall_clock=d["wall_clock"],
            checkpoints=d["checkpoints"],
            metrics=d.get("metrics"),
            history=d.get("history"),
        )


# ---------------------------------------------------------------------------
# Workspace: backbones, corpora, and feature caches
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class WorkspaceConfig:
    languages: tuple = ("en", "pl-1")
    resolution: int = 64
    seed: int = 0
    # corpus sizes
    stage1_size: int = 512
    stage1_long_fraction: float = 0.25
    paired_size: int = 640
    eval_size: int = 48
    # model shapes
    clip: ClipConfig | None = None          # vocab_size filled in lazily
    lm: LmConfig | None = None
    adapter_heads: int = 4
    denoiser: DenoiserConfig = field(default_factory=DenoiserConfig)
    autoencoder: AutoencoderConfig = field(default_factory=AutoencoderConfig)
    # backbone training budgets
    clip_train: ClipTrainConfig = field(default_factory=ClipTrainConfig)
    lm_train: LmTrainConfig = field(default_factory=LmTrainConfig)
    autoencoder_train: AutoencoderTrainConfig = field(default_factory=AutoencoderTrainConfig)
    base_denoiser_steps: int = 400
    clip_corpus_size: int = 2048


class Workspace:
    """Directory of backbone checkpoints plus cached corpora and features."""

    def __init__(self, root, config: WorkspaceConfig = WorkspaceConfig()):
        self.root = Path(root)
        self.models_dir = self.root / "models"
        self.runs_dir = self.root / "runs"
        self.config = config
        self.registry = LanguageRegistry(config.languages)
        self.vocab = Vocabulary.from_registry(self.registry)
        self._cache = {}

    # -- paths ------------------------------------------------------------
    def model_path(self, name: str) -> Path:
        return self.models_dir / f"{name}.ckpt"

    # -- derived model configs ---------------------------------------------
    def clip_config(self) -> ClipConfig:
        base = self.config.clip or ClipConfig(vocab_size=0)
        return replace(base, vocab_size=len(self.vocab))

    def lm_config(self) -> LmConfig:
        base = self.config.lm or LmConfig(vocab_size=0)
        return replace(base, vocab_size=len(self.vocab))

    def adapter_config(self) -> AdapterConfig:
        chunks = max(
            math.ceil(len(tokenize(p.text, "en", self.vocab).ids) / 77)
            for p in self.stage1_corpus().english
        )
        return AdapterConfig(
            llm_width=self.lm_config().width,
            width=self.clip_config().width,
            queries=77 * chunks,
            heads=self.config.adapter_heads,
        )

    # -- corpora -----------------------------------------------------------
    def stage1_corpus(self):
        if "stage1_corpus" not in self._cache:
            self._cache["stage1_corpus"] = build_stage1_corpus(
                self.config.stage1_size,
                tuple(l for l in self.config.languages if l != "en"),
                long_fraction=self.config.stage1_long_fraction,
                seed=derive_seed("ws-stage1", self.config.seed),
                registry=self.registry,
            )
        return self._cache["stage1_corpus"]

    def paired_corpus(self) -> list:
        """Text-image training corpus; English captions only by default.

        Cross-lingual generation ability must come from stage-1 alignment,
        so the diffusion stages never see pseudo-language captions.
        """
        if "paired_corpus" not in self._cache:
            self._cache["paired_corpus"] = build_paired_corpus(
                self.config.paired_size,
                languages=("en",),
                seed=derive_seed("ws-paired", self.config.seed),
                registry=self.registry,
            )
        return self._cache["paired_corpus"]

    def eval_corpus(self) -> list:
        if "eval_corpus" not in self._cache:
            self._cache["eval_corpus"] = build_paired_corpus(
                self.config.eval_size,
                languages=self.config.languages,
                seed=derive_seed("ws-eval", self.config.seed),
                registry=self.registry,
            )
        return self._cache["eval_corpus"]

    # -- backbone preparation ------------------------------------------------
    def prepare_backbones(self, force: bool = False) -> dict:
        return prepare_backbones(self, force=force)

    def _load(self, name: str):
        key = f"model:{name}"
        if key not in self._cache:
            self._cache[key] = load_model(self.model_path(name), name.split("-")[0])
        return self._cache[key]

    def clip(self):
        return self._load("clip")

    def lm(self):
        return self._load("lm")

    def autoencoder(self):
        return self._load("autoencoder")

    def base_denoiser_path(self) -> Path:
        return self.model_path("denoiser-base")

    # -- cached derived features ----------------------------------------------
    def lm_feature(self, text: str, language: str) -> torch.Tensor:
        key = ("lmfeat", language, text)
        if key not in self._cache:
            self._cache[key] = self.lm().encode(tokenize(text, language, self.vocab))
        return self._cache[key]

    def latent_for(self, scene_seed: int, entry) -> torch.Tensor:
        key = ("latent", scene_seed)
        if key not in self._cache:
            image = render_entry(entry, self.config.resolution)
            self._cache[key] = self.autoencoder().encode_image(image)
        return self._cache[key]

    def alignment_dataset(self) -> AlignmentDataset:
        if "alignment_dataset" not in self._cache:
            self._cache["alignment_dataset"] = AlignmentDataset.from_corpus(
                self.stage1_corpus(), self.lm(), self.clip(), self.vocab
            )
        return self._cache["alignment_dataset"]

    def diffusion_data(self, entries) -> tuple:
        latents = torch.stack([self.latent_for(e.scene_seed, e) for e in entries])
        sources = [self.lm_feature(e.prompt.text, e.prompt.language) for e in entries]
        cond_rows = [
            77 * math.ceil(len(tokenize(e.prompt.text, e.prompt.language, self.vocab).ids) / 77)
            for e in entries
        ]
        return latents, sources, cond_rows

    def bundle(self, adapter, denoiser) -> ModelBundle:
        return ModelBundle(
            vocab=self.vocab,
            registry=self.registry,
            clip=self.clip(),
            lm=self.lm(),
            adapter=adapter,
            denoiser=denoiser,
            autoencoder=self.autoencoder(),
        )

    def bundle_from_dir(self, run_dir) -> ModelBundle:
        run_dir = Path(run_dir)
        adapter = load_model(run_dir / "adapter.ckpt", "adapter")
        denoiser_path = run_dir / "denoiser.ckpt"
        if denoiser_path.exists():
            denoiser = load_model(denoiser_path, "denoiser")
        else:
            denoiser = load_model(self.base_denoiser_path(), "denoiser")
        return self.bundle(adapter, denoiser)


def prepare_backbones(ws: Workspace, force: bool = False) -> dict:
    """Train and save CLIP, LM, autoencoder, and the text-free base denoiser."""
    ws.models_dir.mkdir(parents=True, exist_ok=True)
    reports = {}
    cfg = ws.config
    vocab_path = ws.models_dir / "vocab.txt"
    if force or not vocab_path.exists():
        ws.vocab.save(vocab_path)

    # CLIP: contrastive pretraining on (render, short English caption) pairs.
    if force or not ws.model_path("clip").exists():
        entries = build_paired_corpus(
            cfg.clip_corpus_size, languages=("en",),
            seed=derive_seed("clip-corpus", cfg.seed), registry=ws.registry,
        )
        images = torch.stack(
            [image_to_tensor(render_entry(e, cfg.resolution)) for e in entries]
        )
        clip_model = build_clip(ws.clip_config(), seed=cfg.seed)
        ids = torch.stack([clip_model._window(
            tokenize(e.prompt.text, "en", ws.vocab).ids) for e in entries])
        n_val = 64
        reports["clip"] = pretrain_clip(
            images[:-n_val], ids[:-n_val], cfg.clip_train, clip_model,
            val_images=images[-n_val:], val_ids=ids[-n_val:],
        )
        save_model(ws.model_path("clip"), "clip", clip_model)
        ws._cache.pop("model:clip", None)

    # LM: next-token training over the multilingual stage-1 text corpus.
    if force or not ws.model_path("lm").exists():
        corpus = ws.stage1_corpus()
        texts = [(p.text, "en") for p in corpus.english]
        for lang in sorted(corpus.pairs):
            texts.extend((pair.other.text, lang) for pair in corpus.pairs[lang])
        sequences = [tokenize(t, l, ws.vocab).ids for t, l in texts]
        n_val = max(8, len(sequences) // 20)
        lm_model = build_lm(ws.lm_config(), seed=cfg.seed)
        reports["lm"] = pretrain_lm(
            sequences[:-n_val], cfg.lm_train, lm_model,
            val_sequences=sequences[-n_val:], pad_id=ws.vocab.pad_id,
        )
        save_model(ws.model_path("lm"), "lm", lm_model)
        ws._cache.pop("model:lm", None)

    # Autoencoder for the diffusion latent space.
    if force or not ws.model_path("autoencoder").exists():
        entries = build_paired_corpus(
            512, languages=("en",),
            seed=derive_seed("ae-corpus", cfg.seed), registry=ws.registry,
        )
        images = torch.stack(
            [image_to_tensor(render_entry(e, cfg.resolution)) for e in entries]
        )
        ae = build_autoencoder(cfg.autoencoder, seed=cfg.seed)
        reports["autoencoder"] = train_autoencoder(
            images[:-64], cfg.autoencoder_train, ae, val_images=images[-64:]
        )
        save_model(ws.model_path("autoencoder"), "autoencoder", ae)
        ws._cache.pop("model:autoencoder", None)

    # Base denoiser: brief text-free pretraining (all conditions dropped),
    # the starting point stage 2 finetunes from.
    if force or not ws.base_denoiser_path().exists():
        entries = ws.paired_corpus()
        latents = torch.stack([ws.latent_for(e.scene_seed, e) for e in entries])
        denoiser = build_denoiser(cfg.denoiser, seed=cfg.seed)
        trainer = DiffusionTrainer(
            latents, None,
            DiffusionTrainConfig(
                steps=cfg.base_denoiser_steps, drop_prob=1.0,
                seed=derive_seed("base-denoiser", cfg.seed),
            ),
            denoiser,
        )
        reports["base_denoiser"] = trainer.run(0, cfg.base_denoiser_steps)
        save_model(ws.base_denoiser_path(), "denoiser", denoiser)

    report_path = ws.models_dir / "reports.json"
    if reports:
        merged = {}
        if report_path.exists():
            merged = json.loads(report_path.read_text())
        merged.update(reports)
        report_path.write_text(json.dumps(merged, indent=1))
    return reports


# ---------------------------------------------------------------------------
# Stage filtering and execution
# ---------------------------------------------------------------------------

def filter_aesthetic(entries, top_fraction: float, floor: float) -> list:
    """Keep the top `top_fraction` of entries at or above the floor."""
    candidates = [e for e in entries if e.aesthetic >= floor]
    if not candidates:
        raise EmptyDatasetError(
            f"aesthetic floor {floor} leaves no training data "
            f"(corpus max {max(e.aesthetic for e in entries):.3f})"
        )
    k = max(1, int(round(len(entries) * top_fraction)))
    ranked = sorted(
        candidates, key=lambda e: (-e.aesthetic, e.scene_seed, e.prompt.language)
    )
    return ranked[:k]


def _resume_key(config: StageConfig) -> dict:
    # Everything except the step budget must match to resume; raising
    # `steps` and continuing is the intended use.
    key = asdict(config)
    key.pop("steps")
    return key


def _save_trainer_state(path, stage: int, config: StageConfig, step: int, optimizer):
    arrays = optimizer_arrays(optimizer)
    arrays["trainer.step"] = np.array(step, dtype=np.int64)
    save_checkpoint(
        path, "trainer-state",
        {"stage": stage, "config": _resume_key(config)}, arrays,
    )


def _load_trainer_state(path, stage: int, config: StageConfig, optimizer) -> int:
    _, _, arrays = load_checkpoint(
        path, expected_kind="trainer-state",
        expected_config={"stage": stage, "config": _resume_key(config)},
    )
    step = int(arrays.pop("trainer.step"))
    load_optimizer_arrays(optimizer, arrays)
    return step


def run_stage(ws: Workspace, config: StageConfig, in_dir=None, out_dir=None
              ) -> RunRecord:
    """Execute one training stage from `in_dir` checkpoints into `out_dir`.

    Missing adapter checkpoints fall back to random initialization (the
    no-stage-1 ablation rows); missing denoiser checkpoints fall back to
    the workspace's base denoiser. If `out_dir` already holds a partial
    trainer state for the same config, training resumes from its step.
    """
    config.validate()
    in_dir = Path(in_dir) if in_dir is not None else None
    out_dir = Path(out_dir) if out_dir is not None else ws.runs_dir / f"stage{config.stage}"
    out_dir.mkdir(parents=True, exist_ok=True)
    start = time.perf_counter()

    def input_path(name: str):
        if in_dir is not None and (in_dir / name).exists():
            return in_dir / name
        return None

    resume_path = out_dir / "trainer.ckpt"
    resuming = resume_path.exists()

    # Adapter: resume > incoming checkpoint > fresh init.
    if resuming:
        adapter = load_model(out_dir / "adapter.ckpt", "adapter")
    elif input_path("adapter.ckpt"):
        adapter = load_model(input_path("adapter.ckpt"), "adapter")
    else:
        adapter = build_adapter(ws.adapter_config(), seed=derive_seed("adapter", config.seed))
    adapter.train()

    if config.stage == 1:
        dataset = ws.alignment_dataset()  # requires trained CLIP and LM
        trainer = Stage1Trainer(
            dataset,
            Stage1Config(
                loss_variant=config.loss_variant, lam=config.lam,
                steps=config.steps, batch_size=config.batch_size,
                lr=config.lr, seed=config.seed,
            ),
            adapter,
        )
        denoiser = None
    else:
        entries = ws.paired_corpus()
        ws.lm()  # prerequisite check: LM must exist even though features are cached
        if config.stage == 3:
            entries = filter_aesthetic(
                entries, config.aesthetic_top_fraction, config.aesthetic_floor
            )
        latents, sources, cond_rows = ws.diffusion_data(entries)
        if resuming:
            denoiser = load_model(out_dir / "denoiser.ckpt", "denoiser")
        elif input_path("denoiser.ckpt"):
            denoiser = load_model(input_path("denoiser.ckpt"), "denoiser")
        else:
            if not ws.base_denoiser_path().exists():
                raise NotInitializedError(
                    f"stage {config.stage} needs the base denoiser checkpoint; "
                    "run prepare_backbones first"
                )
            denoiser = load_model(ws.base_denoiser_path(), "denoiser")
        denoiser.train()
        trainer = DiffusionTrainer(
            latents, sources,
            DiffusionTrainConfig(
                steps=config.steps, batch_size=config.batch_size, lr=config.lr,
                adapter_lr_scale=config.adapter_lr_scale,
                drop_prob=config.drop_prob, seed=config.seed,
            ),
            denoiser,
            adapter=adapter,
            cond_rows=cond_rows,
        )

    start_step = 0
    if resuming:
        start_step = _load_trainer_state(resume_path, config.stage, config, trainer.optimizer)
    history = trainer.run(start_step, config.steps) if config.steps > start_step \
        else trainer.history

    # Persist stage outputs.
    save_model(out_dir / "adapter.ckpt", "adapter", adapter)
    checkpoints = {
        "adapter": {
            "path": str(out_dir / "adapter.ckpt"),
            "checksum": arrays_checksum(module_arrays(adapter)),
        }
    }
    if denoiser is not None:
        save_model(out_dir / "denoiser.ckpt", "denoiser", denoiser)
        checkpoints["denoiser"] = {
            "path": str(out_dir / "denoiser.ckpt"),
            "checksum": arrays_checksum(module_arrays(denoiser)),
        }
    _save_trainer_state(resume_path, config.stage, config, config.steps, trainer.optimizer)

    record = RunRecord(
        stages={f"stage{i}": i == config.stage for i in (1, 2, 3)},
        wall_clock=time.perf_counter() - start,
        checkpoints=checkpoints,
        history=history,
    )
    (out_dir / "record.json").write_text(json.dumps(record.to_dict(), indent=1))
    return record
