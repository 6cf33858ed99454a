"""Denoising objective and the resumable latent-diffusion trainer."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn.functional as F

from llmdiff.errors import InvalidArgumentError, TrainingFailureError
from llmdiff.seeding import numpy_rng, torch_generator
from llmdiff.diffusion.schedule import NoiseSchedule, add_noise_batch
from llmdiff.alignment import _pad_sources


def diffusion_loss(
    model,
    z0: torch.Tensor,
    conditions: torch.Tensor | None,
    schedule: NoiseSchedule,
    drop_prob: float = 0.1,
    seed: int = 0,
) -> torch.Tensor:
    """Noise-prediction MSE with random condition dropping.

    Per item: t ~ U(0,1), eps ~ N(0,I); with probability `drop_prob` the
    condition is replaced by the model's learned null embedding. All
    randomness derives from `seed`, independent of condition values.
    """
    if not 0.0 <= drop_prob <= 1.0:
        raise InvalidArgumentError("drop_prob must lie in [0, 1]")
    b = z0.shape[0]
    g = torch_generator("diffusion-loss", seed)
    t = torch.rand(b, generator=g, dtype=z0.dtype)
    eps = torch.randn(z0.shape, generator=g, dtype=z0.dtype)
    drop = torch.rand(b, generator=g) < drop_prob
    null = model.null_condition.unsqueeze(0)
    if conditions is None:
        cond = null.expand(b, -1, -1)
    else:
        if conditions.shape[0] != b:
            raise InvalidArgumentError("one condition per latent required")
        if conditions.shape[1:] != model.null_condition.shape:
            raise InvalidArgumentError(
                f"conditions {tuple(conditions.shape[1:])} must match the "
                f"model's null condition {tuple(model.null_condition.shape)} "
                "so dropped and kept items can share a batch"
            )
        null_b = null.expand(b, -1, conditions.shape[-1])
        cond = torch.where(drop.view(-1, 1, 1), null_b, conditions)
    z_t = add_noise_batch(z0, eps, t)
    pred = model(z_t, t, cond)
    return F.mse_loss(pred, eps)


@dataclass(frozen=True)
class DiffusionTrainConfig:
    steps: int = 3000
    batch_size: int = 16
    lr: float = 1e-3
    adapter_lr_scale: float = 1.0  # slow the adapter so conditions stay stable
    drop_prob: float = 0.1
    seed: int = 0
    eval_every: int = 250


class DiffusionTrainer:
    """Trains the denoiser (and optionally the adapter) on cached latents.

    The LM and autoencoder stay out of the graph: LM features and latents
    are precomputed by the caller. Stage-indexed randomness keeps the loop
    bitwise resumable.
    """

    def __init__(
        self,
        latents: torch.Tensor,
        sources,                      # list of L_i x d_LLM tensors, or None
        config: DiffusionTrainConfig,
        denoiser,
        adapter=None,
        cond_rows=None,               # per-item condition row count (default 77)
        schedule: NoiseSchedule | None = None,
    ):
        if sources is not None and len(sources) != latents.shape[0]:
            raise InvalidArgumentError("need one text source per latent")
        if sources is None and adapter is not None:
            raise InvalidArgumentError("an adapter requires text sources")
        self.latents = latents
        self.sources = sources
        self.config = config
        self.denoiser = denoiser
        self.adapter = adapter
        self.schedule = schedule or NoiseSchedule()
        n = latents.shape[0]
        if cond_rows is None:
            cond_rows = [denoiser.null_condition.shape[0]] * n
        # Bucket by condition rows so every batch has one condition shape.
        self.buckets = {}
        for i in range(n):
            self.buckets.setdefault(cond_rows[i], []).append(i)
        self.cond_rows = cond_rows
        groups = [{"params": list(denoiser.parameters()), "lr": config.lr}]
        if adapter is not None:
            groups.append({
                "params": list(adapter.parameters()),
                "lr": config.lr * config.adapter_lr_scale,
            })
        self.optimizer = torch.optim.Adam(groups, lr=config.lr)
        self.history = {"train": []}

    def _batch_indices(self, step_index: int, rng) -> list:
        keys = sorted(self.buckets)
        weights = np.array([len(self.buckets[k]) for k in keys], dtype=float)
        key = keys[rng.choice(len(keys), p=weights / weights.sum())]
        pool = self.buckets[key]
        take = min(self.config.batch_size, len(pool))
        return [pool[j] for j in rng.choice(len(pool), size=take, replace=False)]

    def step(self, step_index: int) -> float:
        rng = numpy_rng("diffusion-batch", self.config.seed, step_index)
        idx = self._batch_indices(step_index, rng)
        z0 = self.latents[torch.tensor(idx)]
        cond = None
        if self.sources is not None and self.adapter is not None:
            batch, mask = _pad_sources([self.sources[i] for i in idx])
            rows = min(self.cond_rows[idx[0]], self.adapter.config.queries)
            cond = self.adapter(batch, src_key_padding_mask=mask, rows=rows)
        loss = diffusion_loss(
            self.denoiser,
            z0,
            cond,
            self.schedule,
            drop_prob=self.config.drop_prob if cond is not None else 1.0,
            seed=derive_step_seed(self.config.seed, step_index),
        )
        if not torch.isfinite(loss):
            raise TrainingFailureError("diffusion loss diverged", step_index)
        self.optimizer.zero_grad()
        loss.backward()
        self.optimizer.step()
        return float(loss.detach())

    def run(self, start_step: int, end_step: int) -> dict:
        for step in range(start_step, end_step):
            loss = self.step(step)
            if step % self.config.eval_every == 0 or step == end_step - 1:
                self.history["train"].append((step, loss))
        return self.history


def derive_step_seed(seed: int, step: int) -> int:
    from llmdiff.seeding import derive_seed

    return derive_seed("diffusion-step", seed, step)
