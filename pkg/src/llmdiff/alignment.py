"""Feature-alignment losses, the adapter-only training stage, and the
per-token magnitude analysis.

All three losses compare CLIP token features against adapter outputs
positionwise. When the adapter emits more query rows than the target has
token rows (long-text mode sizes queries for the longest prompt), the
extra adapter rows are trimmed before comparison; a target longer than the
query sequence is irreconcilable.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from llmdiff.config import CONTEXT_LENGTH
from llmdiff.errors import (
    DegenerateInputError,
    InvalidArgumentError,
    TrainingFailureError,
)
from llmdiff.seeding import numpy_rng
from llmdiff.adapter import QueryAdapter
from llmdiff.text.tokenizer import TokenSequence, Vocabulary, split_words, tokenize

LOSS_VARIANTS = ("mse", "cos", "cos-mag")


def _reconcile(h_clip: torch.Tensor, h_adapter: torch.Tensor) -> tuple:
    if h_clip.shape[-1] != h_adapter.shape[-1]:
        raise InvalidArgumentError(
            f"feature widths differ: {h_clip.shape[-1]} vs {h_adapter.shape[-1]}"
        )
    t_target, t_source = h_clip.shape[-2], h_adapter.shape[-2]
    if t_source < t_target:
        raise InvalidArgumentError(
            f"adapter rows ({t_source}) cannot cover target rows ({t_target})"
        )
    if t_source > t_target:
        h_adapter = h_adapter[..., :t_target, :]
    if h_clip.shape != h_adapter.shape:
        raise InvalidArgumentError(
            f"irreconcilable shapes {tuple(h_clip.shape)} vs {tuple(h_adapter.shape)}"
        )
    return h_clip, h_adapter


def loss_mse(h_clip: torch.Tensor, h_adapter: torch.Tensor) -> torch.Tensor:
    """Mean over tokens and channels of the squared difference."""
    h_clip, h_adapter = _reconcile(h_clip, h_adapter)
    return ((h_clip - h_adapter) ** 2).mean()


def _token_cosines(h_clip: torch.Tensor, h_adapter: torch.Tensor) -> tuple:
    norm_c = torch.linalg.vector_norm(h_clip, dim=-1)
    norm_a = torch.linalg.vector_norm(h_adapter, dim=-1)
    if float(norm_c.detach().min()) == 0.0 or float(norm_a.detach().min()) == 0.0:
        raise DegenerateInputError("zero-norm token row")
    cos = (h_clip * h_adapter).sum(dim=-1) / (norm_c * norm_a)
    return cos, norm_c, norm_a


def loss_cosine(h_clip: torch.Tensor, h_adapter: torch.Tensor) -> torch.Tensor:
    """1 - mean per-token cosine similarity; in [0, 2]."""
    h_clip, h_adapter = _reconcile(h_clip, h_adapter)
    cos, _, _ = _token_cosines(h_clip, h_adapter)
    return 1.0 - cos.mean()


def loss_cos_magnitude(
    h_clip: torch.Tensor, h_adapter: torch.Tensor, lam: float = 0.1
) -> torch.Tensor:
    """Cosine loss plus lam * mean squared per-token L2-norm difference."""
    if lam < 0:
        raise InvalidArgumentError("lam must be >= 0")
    if lam == 0:
        return loss_cosine(h_clip, h_adapter)
    h_clip, h_adapter = _reconcile(h_clip, h_adapter)
    cos, norm_c, norm_a = _token_cosines(h_clip, h_adapter)
    return lam * ((norm_c - norm_a) ** 2).mean() + (1.0 - cos.mean())


def alignment_loss(variant: str, h_clip, h_adapter, lam: float = 0.1) -> torch.Tensor:
    if variant == "mse":
        return loss_mse(h_clip, h_adapter)
    if variant == "cos":
        return loss_cosine(h_clip, h_adapter)
    if variant == "cos-mag":
        return loss_cos_magnitude(h_clip, h_adapter, lam)
    raise InvalidArgumentError(f"unknown loss variant {variant!r}; use one of {LOSS_VARIANTS}")


# ---------------------------------------------------------------------------
# Stage-1 dataset and trainer
# ---------------------------------------------------------------------------

@dataclass
class AlignmentDataset:
    """Precomputed (LM feature, segmented CLIP target) pairs.

    Both towers are frozen during alignment, so features are extracted
    once up front. Targets always come from the English member of a pair;
    sources come from the prompt's own language.
    """

    sources: list           # L_i x d_LLM tensors
    targets: list           # T'_i x d tensors, T' a multiple of 77
    languages: list
    scene_seeds: list
    texts: list

    def __len__(self) -> int:
        return len(self.sources)

    @property
    def max_target_rows(self) -> int:
        return max(t.shape[0] for t in self.targets)

    @classmethod
    def from_corpus(cls, corpus, lm, clip, vocab: Vocabulary) -> "AlignmentDataset":
        target_cache = {}

        def target_for(seed, english_prompt):
            key = (seed, english_prompt.length_mode)
            if key not in target_cache:
                toks = tokenize(english_prompt.text, "en", vocab)
                target_cache[key] = clip.encode_text_segmented(toks)
            return target_cache[key]

        sources, targets, languages, seeds, texts = [], [], [], [], []
        for seed, eng in zip(corpus.scene_seeds, corpus.english):
            sources.append(lm.encode(tokenize(eng.text, "en", vocab)))
            targets.append(target_for(seed, eng))
            languages.append("en")
            seeds.append(seed)
            texts.append(eng.text)
        for lang in sorted(corpus.pairs):
            for seed, pair in zip(corpus.scene_seeds, corpus.pairs[lang]):
                sources.append(lm.encode(tokenize(pair.other.text, lang, vocab)))
                targets.append(target_for(seed, pair.english))
                languages.append(lang)
                seeds.append(seed)
                texts.append(pair.other.text)
        return cls(sources, targets, languages, seeds, texts)

    def split(self, val_fraction: float, seed: int = 0) -> tuple:
        """Deterministic train/val index split, stratified by scene.

        All prompts of one scene land on the same side so validation
        scenes are unseen in every language.
        """
        scenes = sorted(set(self.scene_seeds))
        rng = numpy_rng("stage1-split", seed)
        order = rng.permutation(len(scenes))
        n_val = max(1, int(len(scenes) * val_fraction))
        val_scenes = {scenes[i] for i in order[:n_val]}
        train_idx = [i for i, s in enumerate(self.scene_seeds) if s not in val_scenes]
        val_idx = [i for i, s in enumerate(self.scene_seeds) if s in val_scenes]
        return train_idx, val_idx


def _pad_sources(sources) -> tuple:
    """Stack variable-length sources; returns (batch, pad mask or None)."""
    lengths = [s.shape[0] for s in sources]
    width = max(lengths)
    if min(lengths) == width:
        return torch.stack(sources), None
    d = sources[0].shape[1]
    batch = torch.zeros(len(sources), width, d)
    mask = torch.ones(len(sources), width, dtype=torch.bool)
    for i, s in enumerate(sources):
        batch[i, : s.shape[0]] = s
        mask[i, : s.shape[0]] = False
    return batch, mask


@dataclass(frozen=True)
class Stage1Config:
    loss_variant: str = "cos-mag"
    lam: float = 0.1
    steps: int = 1500
    batch_size: int = 16
    lr: float = 1e-3
    seed: int = 0
    val_fraction: float = 0.1
    eval_every: int = 250


class Stage1Trainer:
    """Adapter-only alignment training; CLIP and LM features are frozen inputs.

    Step-indexed randomness makes the loop resumable: running steps
    [0, S) in one go or in two halves produces bitwise-identical weights.
    """

    def __init__(self, dataset: AlignmentDataset, config: Stage1Config,
                 adapter: QueryAdapter):
        if config.loss_variant not in LOSS_VARIANTS:
            raise InvalidArgumentError(f"unknown loss variant {config.loss_variant!r}")
        if adapter.config.queries < dataset.max_target_rows:
            raise InvalidArgumentError(
                f"adapter has {adapter.config.queries} queries but targets reach "
                f"{dataset.max_target_rows} rows; size queries to 77*max_chunks"
            )
        self.dataset = dataset
        self.config = config
        self.adapter = adapter
        self.optimizer = torch.optim.Adam(adapter.parameters(), lr=config.lr)
        self.train_idx, self.val_idx = dataset.split(config.val_fraction, config.seed)
        # Bucket by target length so each batch has one target shape.
        self.buckets = {}
        for i in self.train_idx:
            self.buckets.setdefault(self.dataset.targets[i].shape[0], []).append(i)
        self.history = {"train": [], "val_cosine": [], "val_variant": []}

    def _batch_indices(self, step: int) -> list:
        rng = numpy_rng("stage1-batch", self.config.seed, step)
        keys = sorted(self.buckets)
        weights = np.array([len(self.buckets[k]) for k in keys], dtype=float)
        key = keys[rng.choice(len(keys), p=weights / weights.sum())]
        pool = self.buckets[key]
        take = min(self.config.batch_size, len(pool))
        return [pool[j] for j in rng.choice(len(pool), size=take, replace=False)]

    def _loss_on(self, indices, variant: str) -> torch.Tensor:
        sources = [self.dataset.sources[i] for i in indices]
        targets = torch.stack([self.dataset.targets[i] for i in indices])
        batch, mask = _pad_sources(sources)
        out = self.adapter(batch, src_key_padding_mask=mask, rows=targets.shape[1])
        return alignment_loss(variant, targets, out, self.config.lam)

    def step(self, step_index: int) -> float:
        indices = self._batch_indices(step_index)
        loss = self._loss_on(indices, self.config.loss_variant)
        if not torch.isfinite(loss):
            raise TrainingFailureError("alignment loss diverged", step_index)
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        return float(loss.detach())

    @torch.no_grad()
    def validation_loss(self, variant: str | None = None) -> float:
        """Mean loss over the validation split, grouped by target length."""
        variant = variant or self.config.loss_variant
        groups = {}
        for i in self.val_idx:
            groups.setdefault(self.dataset.targets[i].shape[0], []).append(i)
        total, count = 0.0, 0
        for indices in groups.values():
            for lo in range(0, len(indices), 64):
                chunk = indices[lo: lo + 64]
                total += float(self._loss_on(chunk, variant)) * len(chunk)
                count += len(chunk)
        return total / max(count, 1)

    def run(self, start_step: int, end_step: int) -> dict:
        for step in range(start_step, end_step):
            loss = self.step(step)
            if step % self.config.eval_every == 0 or step == end_step - 1:
                self.history["train"].append((step, loss))
                self.history["val_cosine"].append((step, self.validation_loss("cos")))
                if self.config.loss_variant != "cos":
                    self.history["val_variant"].append(
                        (step, self.validation_loss(self.config.loss_variant))
                    )
        return self.history


# ---------------------------------------------------------------------------
# Magnitude analysis
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MagnitudeRow:
    word: str
    clip_mag: float
    adapter_mag: float


@dataclass(frozen=True)
class MagnitudeReport:
    rows: tuple
    variant_tag: str
    clip_score: float | None = None

    def mean_abs_gap(self) -> float:
        return float(np.mean([abs(r.clip_mag - r.adapter_mag) for r in self.rows]))

    def to_dict(self) -> dict:
        return {
            "variant": self.variant_tag,
            "clip_score": self.clip_score,
            "rows": [
                {"word": r.word, "clip": r.clip_mag, "adapter": r.adapter_mag}
                for r in self.rows
            ],
        }

    def render(self) -> str:
        header = ["Words"] + [r.word for r in self.rows] + ["CLIP-Score"]
        clip_row = ["CLIP"] + [f"{r.clip_mag:.2f}" for r in self.rows] + ["-"]
        score = f"{self.clip_score:.4f}" if self.clip_score is not None else "-"
        ad_row = [f"adapter ({self.variant_tag})"] + \
            [f"{r.adapter_mag:.2f}" for r in self.rows] + [score]
        rows = [header, clip_row, ad_row]
        widths = [max(len(r[i]) for r in rows) for i in range(len(header))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows
        )


def magnitude_report(
    prompt,
    lm,
    clip,
    adapter: QueryAdapter,
    vocab: Vocabulary,
    variant_tag: str,
    clip_score: float | None = None,
) -> MagnitudeReport:
    """Per-word CLIP vs adapter token L2 norms for one prompt."""
    words = split_words(prompt.text)[:CONTEXT_LENGTH]
    tokens = tokenize(prompt.text, prompt.language, vocab)
    clip_feats = clip.encode_text(tokens)
    rows = min(adapter.config.queries, 77 * ((tokens.count + 76) // 77))
    with torch.no_grad():
        adapter_feats = adapter(lm.encode(tokens), rows=rows)
    rows = []
    for i, word in enumerate(words):
        rows.append(
            MagnitudeRow(
                word=word,
                clip_mag=float(torch.linalg.vector_norm(clip_feats[i])),
                adapter_mag=float(torch.linalg.vector_norm(adapter_feats[i])),
            )
        )
    return MagnitudeReport(rows=tuple(rows), variant_tag=variant_tag, clip_score=clip_score)
