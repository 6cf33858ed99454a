"""Noise schedule and the forward (noising) process.

The signal weight follows a cosine curve, gamma(t) = cos^2(pi*t/2),
monotonically descending from 1 at t=0 to 0 at t=1. Endpoints are
special-cased so the boundary identities hold exactly in floating point.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch

from llmdiff.errors import InvalidArgumentError


def gamma(t: float) -> float:
    if not 0.0 <= t <= 1.0:
        raise InvalidArgumentError(f"t must lie in [0, 1], got {t}")
    if t == 0.0:
        return 1.0
    if t == 1.0:
        return 0.0
    return math.cos(math.pi * t / 2.0) ** 2


@dataclass(frozen=True)
class NoiseSchedule:
    steps: int = 1000  # discretization used by samplers/training grids

    def gamma(self, t: float) -> float:
        return gamma(t)

    def grid(self) -> list:
        return [i / self.steps for i in range(self.steps + 1)]


def add_noise(z0: torch.Tensor, eps: torch.Tensor, t: float) -> torch.Tensor:
    """sqrt(gamma(t)) * z0 + sqrt(1 - gamma(t)) * eps, elementwise."""
    if z0.shape != eps.shape:
        raise InvalidArgumentError(
            f"latent/noise shapes differ: {tuple(z0.shape)} vs {tuple(eps.shape)}"
        )
    g = gamma(t)
    return math.sqrt(g) * z0 + math.sqrt(1.0 - g) * eps


def add_noise_batch(z0: torch.Tensor, eps: torch.Tensor, t: torch.Tensor) -> torch.Tensor:
    """Batched forward process with one t per item; t in [0, 1]."""
    if z0.shape != eps.shape:
        raise InvalidArgumentError("latent/noise shapes differ")
    if t.dim() != 1 or t.shape[0] != z0.shape[0]:
        raise InvalidArgumentError("need one timestep per batch item")
    g = torch.cos(math.pi * t / 2.0) ** 2
    g = torch.where(t <= 0.0, torch.ones_like(g), g)
    g = torch.where(t >= 1.0, torch.zeros_like(g), g)
    shape = (-1,) + (1,) * (z0.dim() - 1)
    return g.sqrt().view(shape) * z0 + (1.0 - g).sqrt().view(shape) * eps
