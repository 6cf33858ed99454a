"""Small image autoencoder providing the diffusion latent space.

Learned mode compresses 64x64x3 renders to 4x8x8 latents; passthrough
mode is a lossless reshape used for fast tests. After training, latents
are rescaled to roughly unit variance (standard latent-diffusion
practice) via a calibrated scale factor stored with the weights.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import torch
import torch.nn as nn
import torch.nn.functional as F

from llmdiff.config import AutoencoderConfig
from llmdiff.errors import InvalidArgumentError, TrainingFailureError
from llmdiff.seeding import numpy_rng, seed_torch
from llmdiff.text.clip import image_to_tensor


class LatentAutoencoder(nn.Module):
    def __init__(self, config: AutoencoderConfig):
        super().__init__()
        self.config = config
        w = config.width
        c = config.latent_channels
        if not config.passthrough:
            self.encoder = nn.Sequential(
                nn.Conv2d(3, w, 3, stride=2, padding=1),      # 64 -> 32
                nn.GroupNorm(8, w), nn.SiLU(),
                nn.Conv2d(w, 2 * w, 3, stride=2, padding=1),  # 32 -> 16
                nn.GroupNorm(8, 2 * w), nn.SiLU(),
                nn.Conv2d(2 * w, 2 * w, 3, stride=2, padding=1),  # 16 -> 8
                nn.GroupNorm(8, 2 * w), nn.SiLU(),
                nn.Conv2d(2 * w, c, 1),
            )
            self.decoder = nn.Sequential(
                nn.Conv2d(c, 2 * w, 3, padding=1),
                nn.GroupNorm(8, 2 * w), nn.SiLU(),
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(2 * w, 2 * w, 3, padding=1),
                nn.GroupNorm(8, 2 * w), nn.SiLU(),
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(2 * w, w, 3, padding=1),
                nn.GroupNorm(8, w), nn.SiLU(),
                nn.Upsample(scale_factor=2, mode="nearest"),
                nn.Conv2d(w, 3, 3, padding=1),
            )
        self.register_buffer("latent_scale", torch.tensor(1.0))

    @property
    def latent_shape(self) -> tuple:
        if self.config.passthrough:
            return (3, self.config.image_size, self.config.image_size)
        return (self.config.latent_channels, self.config.latent_size, self.config.latent_size)

    def encode(self, images: torch.Tensor) -> torch.Tensor:
        """(B, 3, H, W) -> (B, C, h, w)."""
        if images.shape[-2:] != (self.config.image_size, self.config.image_size):
            raise InvalidArgumentError(
                f"expected {self.config.image_size}px images, got {tuple(images.shape[-2:])}"
            )
        if self.config.passthrough:
            return images.clone()
        return self.encoder(images) / self.latent_scale

    def decode(self, latents: torch.Tensor) -> torch.Tensor:
        if latents.shape[-3:] != self.latent_shape:
            raise InvalidArgumentError(
                f"expected latents of shape {self.latent_shape}, got {tuple(latents.shape[-3:])}"
            )
        if self.config.passthrough:
            return latents.clone()
        return torch.sigmoid(self.decoder(latents * self.latent_scale))

    @torch.no_grad()
    def encode_image(self, image: np.ndarray) -> torch.Tensor:
        return self.encode(image_to_tensor(image).unsqueeze(0))[0]

    @torch.no_grad()
    def decode_latent(self, latent: torch.Tensor) -> np.ndarray:
        out = self.decode(latent.unsqueeze(0))[0]
        return out.clamp(0.0, 1.0).permute(1, 2, 0).numpy().astype(np.float64)

    @torch.no_grad()
    def calibrate_scale(self, images: torch.Tensor) -> float:
        """Set latent_scale so encoded training latents have unit std."""
        if self.config.passthrough:
            return 1.0
        self.latent_scale.fill_(1.0)
        std = float(self.encode(images).std())
        self.latent_scale.fill_(max(std, 1e-6))
        return float(self.latent_scale)


def build_autoencoder(config: AutoencoderConfig, seed: int = 0) -> LatentAutoencoder:
    seed_torch("autoencoder-init", seed)
    return LatentAutoencoder(config)


@dataclass(frozen=True)
class AutoencoderTrainConfig:
    steps: int = 2000
    batch_size: int = 32
    lr: float = 2e-3
    seed: int = 0
    log_every: int = 200


def train_autoencoder(
    images: torch.Tensor,
    config: AutoencoderTrainConfig,
    model: LatentAutoencoder,
    val_images: torch.Tensor | None = None,
) -> dict:
    """Reconstruction (MSE) training; calibrates the latent scale at the end."""
    if model.config.passthrough:
        return {"losses": [], "val_mse": 0.0}
    n = images.shape[0]
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    losses = []
    model.train()
    for step in range(config.steps):
        rng = numpy_rng("ae-batch", config.seed, step)
        idx = torch.from_numpy(rng.choice(n, size=min(config.batch_size, n), replace=False))
        batch = images[idx]
        recon = model.decode(model.encode(batch))
        loss = F.mse_loss(recon, batch)
        if not torch.isfinite(loss):
            raise TrainingFailureError("autoencoder loss diverged", step)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % config.log_every == 0 or step == config.steps - 1:
            losses.append((step, float(loss.detach())))
    model.eval()
    model.calibrate_scale(images[: min(n, 256)])
    report = {"losses": losses}
    if val_images is not None:
        with torch.no_grad():
            recon = model.decode(model.encode(val_images))
            report["val_mse"] = float(F.mse_loss(recon, val_images))
    return report
