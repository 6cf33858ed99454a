"""Classifier-free guidance and the deterministic DDIM-style sampler."""

from __future__ import annotations

import math

import numpy as np
import torch

from llmdiff.errors import InvalidArgumentError
from llmdiff.seeding import torch_generator
from llmdiff.diffusion.schedule import gamma
from llmdiff.diffusion.denoiser import NULL_CONDITION


def cfg_predict(model, z_t: torch.Tensor, t, condition, w: float) -> torch.Tensor:
    """e_null + w * (e_cond - e_null); w=0 and w=1 reduce bitwise."""
    if w == 0.0:
        return model(z_t, t, NULL_CONDITION)
    if w == 1.0:
        return model(z_t, t, condition)
    e_null = model(z_t, t, NULL_CONDITION)
    e_cond = model(z_t, t, condition)
    return e_null + w * (e_cond - e_null)


@torch.no_grad()
def sample_latents(
    denoiser,
    condition,
    steps: int,
    w: float,
    seed: int,
    latent_shape: tuple,
) -> torch.Tensor:
    """Deterministic ancestral-free loop over uniform timesteps 1 -> 0."""
    if steps < 1:
        raise InvalidArgumentError("steps must be >= 1")
    g = torch_generator("sample-init", seed)
    z = torch.randn(latent_shape, generator=g)
    for i in range(steps):
        t = 1.0 - i / steps
        t_next = 1.0 - (i + 1) / steps
        eps_hat = cfg_predict(denoiser, z, t, condition, w)
        g_t, g_next = gamma(t), gamma(t_next)
        if g_t == 0.0:
            # The very first step starts from pure noise; the clean-latent
            # estimate carries no information yet.
            x0 = torch.zeros_like(z)
        else:
            x0 = (z - math.sqrt(1.0 - g_t) * eps_hat) / math.sqrt(g_t)
        z = math.sqrt(g_next) * x0 + math.sqrt(1.0 - g_next) * eps_hat
    return z


@torch.no_grad()
def sample(
    prompt,
    steps: int,
    w: float,
    seed: int,
    *,
    lm,
    adapter,
    denoiser,
    autoencoder,
    vocab,
) -> np.ndarray:
    """Full chain: prompt -> LM -> adapter -> guided denoising -> decode."""
    from llmdiff.text.tokenizer import tokenize

    tokens = tokenize(prompt.text, prompt.language, vocab)
    # Use as many 77-row query blocks as the prompt has chunks; later rows
    # are only aligned/trained for longer prompts.
    rows = min(adapter.config.queries, 77 * math.ceil(tokens.count / 77))
    condition = adapter(lm.encode(tokens), rows=rows)
    latent = sample_latents(
        denoiser, condition, steps, w, seed, autoencoder.latent_shape
    )
    return autoencoder.decode_latent(latent)
