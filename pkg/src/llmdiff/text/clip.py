"""Toy CLIP-style dual encoder: the alignment target space.

The text tower maps a fixed 77-token window to per-token features (77 x d)
plus a pooled embedding; the image tower maps renders to the same d-dim
space. Long prompts use segmented encoding: independent 77-token chunks
concatenated along the token axis.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from llmdiff.config import ClipConfig
from llmdiff.errors import InvalidArgumentError, NotInitializedError, TrainingFailureError
from llmdiff.seeding import numpy_rng, seed_torch, torch_generator
from llmdiff.text.tokenizer import TokenSequence, Vocabulary


def image_to_tensor(image: np.ndarray) -> torch.Tensor:
    """HxWx3 float array in [0,1] -> 3xHxW float32 tensor."""
    if image.ndim != 3 or image.shape[2] != 3:
        raise InvalidArgumentError(f"expected HxWx3 image, got {image.shape}")
    return torch.from_numpy(np.ascontiguousarray(image.transpose(2, 0, 1))).float()


class ClipEncoder(nn.Module):
    def __init__(self, config: ClipConfig):
        super().__init__()
        self.config = config
        d = config.width
        self.token_embedding = nn.Embedding(config.vocab_size, d)
        self.positional_embedding = nn.Parameter(torch.empty(config.context, d))
        nn.init.normal_(self.positional_embedding, std=0.02)
        # Pre-LN blocks: token features are the raw residual stream, so
        # per-token magnitudes vary with content (the conditioning
        # convention of latent-diffusion text encoders).
        self.blocks = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=d,
                nhead=config.heads,
                dim_feedforward=config.mlp_ratio * d,
                dropout=0.0,
                activation="gelu",
                batch_first=True,
                norm_first=True,
            )
            for _ in range(config.layers)
        )
        self.text_projection = nn.Linear(d, d, bias=False)

        w = 32
        self.image_tower = nn.Sequential(
            nn.Conv2d(3, w, 3, stride=2, padding=1),
            nn.GroupNorm(8, w),
            nn.SiLU(),
            nn.Conv2d(w, 2 * w, 3, stride=2, padding=1),
            nn.GroupNorm(8, 2 * w),
            nn.SiLU(),
            nn.Conv2d(2 * w, 2 * w, 3, stride=2, padding=1),
            nn.GroupNorm(8, 2 * w),
            nn.SiLU(),
            nn.Flatten(),
            nn.Linear(2 * w * 4 * 4, d),
        )
        self.logit_scale = nn.Parameter(torch.tensor(math.log(10.0)))
        self.trained = False

    # -- guards ----------------------------------------------------------
    def _require_trained(self) -> None:
        if not self.trained:
            raise NotInitializedError("CLIP weights not loaded; pretrain or load a checkpoint")

    def mark_trained(self) -> "ClipEncoder":
        self.trained = True
        return self

    # -- text side ---------------------------------------------------------
    def _window(self, ids) -> torch.Tensor:
        """Truncate/pad a list of ids to the fixed context length."""
        ctx = self.config.context
        ids = list(ids)[:ctx]
        pad_id = 0  # vocabulary reserves id 0 for <pad>
        ids = ids + [pad_id] * (ctx - len(ids))
        return torch.tensor(ids, dtype=torch.long)

    def text_features(self, ids_batch: torch.Tensor) -> torch.Tensor:
        """(B, 77) ids -> (B, 77, d) unnormalized token features."""
        x = self.token_embedding(ids_batch) + self.positional_embedding
        for block in self.blocks:
            x = block(x)
        return x

    def pool_tokens(self, features: torch.Tensor, count=None) -> torch.Tensor:
        """Token features (..., T, d) -> pooled embedding (..., d).

        Mean over the first `count` token rows (the real tokens; pad rows
        are excluded) followed by the text projection. `count` may be an
        int or a per-item tensor for batched features; None pools all
        rows. Applies to CLIP features and to adapter outputs living in
        the same space.
        """
        if count is None:
            pooled = features.mean(dim=-2)
        elif torch.is_tensor(count) and count.dim() > 0:
            rows = features.shape[-2]
            mask = torch.arange(rows) < count.clamp(1, rows).unsqueeze(-1)
            mask = mask.to(features.dtype).unsqueeze(-1)
            pooled = (features * mask).sum(dim=-2) / mask.sum(dim=-2)
        else:
            n = max(1, min(int(count), features.shape[-2]))
            pooled = features[..., :n, :].mean(dim=-2)
        return self.text_projection(pooled)

    @torch.no_grad()
    def encode_text(self, tokens: TokenSequence) -> torch.Tensor:
        """Plain encoding: exactly 77 x d (truncate beyond 77, pad below)."""
        self._require_trained()
        ids = self._window(tokens.ids)
        return self.text_features(ids.unsqueeze(0))[0]

    @torch.no_grad()
    def encode_text_segmented(self, tokens: TokenSequence) -> torch.Tensor:
        """Chunked encoding: (77 * ceil(N/77)) x d, chunks encoded independently."""
        self._require_trained()
        ctx = self.config.context
        n_chunks = max(1, math.ceil(len(tokens.ids) / ctx))
        parts = []
        for c in range(n_chunks):
            chunk = tokens.ids[c * ctx:(c + 1) * ctx]
            ids = self._window(chunk)
            parts.append(self.text_features(ids.unsqueeze(0))[0])
        return torch.cat(parts, dim=0)

    @torch.no_grad()
    def text_embedding(self, tokens: TokenSequence) -> torch.Tensor:
        """Pooled d-dim text embedding of the plain 77-token encoding."""
        return self.pool_tokens(self.encode_text(tokens), count=tokens.count)

    # -- image side --------------------------------------------------------
    def image_features(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, d)."""
        if images.shape[-2:] != (self.config.image_size, self.config.image_size):
            raise InvalidArgumentError(
                f"expected {self.config.image_size}px images, got {tuple(images.shape[-2:])}"
            )
        x = F.avg_pool2d(images, 2)
        return self.image_tower(x)

    @torch.no_grad()
    def encode_image(self, image: np.ndarray) -> torch.Tensor:
        self._require_trained()
        return self.image_features(image_to_tensor(image).unsqueeze(0))[0]


def build_clip(config: ClipConfig, seed: int = 0) -> ClipEncoder:
    seed_torch("clip-init", seed)
    return ClipEncoder(config)


@dataclass(frozen=True)
class ClipTrainConfig:
    steps: int = 1500
    batch_size: int = 64
    lr: float = 3e-4
    seed: int = 0
    log_every: int = 100


def contrastive_loss(image_emb: torch.Tensor, text_emb: torch.Tensor,
                     logit_scale: torch.Tensor) -> torch.Tensor:
    """Symmetric InfoNCE over in-batch negatives."""
    img = F.normalize(image_emb, dim=-1)
    txt = F.normalize(text_emb, dim=-1)
    logits = logit_scale.exp().clamp(max=100.0) * img @ txt.t()
    labels = torch.arange(logits.shape[0])
    return 0.5 * (F.cross_entropy(logits, labels) + F.cross_entropy(logits.t(), labels))


def token_counts(ids: torch.Tensor, pad_id: int = 0) -> torch.Tensor:
    """Number of non-pad tokens per row of a (B, 77) id batch."""
    return (ids != pad_id).sum(dim=-1).clamp(min=1)


def retrieval_top1(model: ClipEncoder, images: torch.Tensor, ids: torch.Tensor) -> float:
    """Top-1 text->image retrieval accuracy over a held-out batch."""
    with torch.no_grad():
        img = F.normalize(model.image_features(images), dim=-1)
        txt = F.normalize(
            model.pool_tokens(model.text_features(ids), count=token_counts(ids)), dim=-1
        )
        hits = (txt @ img.t()).argmax(dim=1) == torch.arange(ids.shape[0])
    return float(hits.float().mean())


def pretrain_clip(
    images: torch.Tensor,
    ids: torch.Tensor,
    config: ClipTrainConfig,
    model: ClipEncoder,
    val_images: torch.Tensor | None = None,
    val_ids: torch.Tensor | None = None,
) -> dict:
    """Contrastive pretraining over paired (image, caption-ids) tensors.

    Mutates `model` in place and marks it trained; returns a report with
    the loss curve and held-out retrieval accuracy.
    """
    n = images.shape[0]
    if ids.shape[0] != n:
        raise InvalidArgumentError("images and captions must pair up")
    params = list(model.parameters())
    opt = torch.optim.Adam(params, lr=config.lr)
    losses = []
    model.train()
    for step in range(config.steps):
        rng = numpy_rng("clip-batch", config.seed, step)
        idx = torch.from_numpy(rng.choice(n, size=min(config.batch_size, n), replace=False))
        img_emb = model.image_features(images[idx])
        txt_emb = model.pool_tokens(
            model.text_features(ids[idx]), count=token_counts(ids[idx])
        )
        loss = contrastive_loss(img_emb, txt_emb, model.logit_scale)
        if not torch.isfinite(loss):
            raise TrainingFailureError("contrastive loss diverged", step)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % config.log_every == 0 or step == config.steps - 1:
            losses.append((step, float(loss.detach())))
    model.eval()
    model.mark_trained()
    report = {"losses": losses, "steps": config.steps}
    if val_images is not None and val_ids is not None:
        report["val_top1"] = retrieval_top1(model, val_images, val_ids)
    return report
