"""Noise-prediction UNet conditioned on text features via cross-attention.

Image features act as attention queries; condition token features supply
keys and values. The condition influences the prediction through these
attention blocks only, which sit at the two lowest feature resolutions.
A learned null-condition embedding stands in when the condition is
dropped (classifier-free guidance training) or absent at sampling time.
"""

from __future__ import annotations

import math

import torch
import torch.nn as nn
import torch.nn.functional as F

from llmdiff.config import DenoiserConfig
from llmdiff.errors import InvalidArgumentError
from llmdiff.seeding import seed_torch


class NullCondition:
    """Marker requesting the denoiser's learned null embedding."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self) -> str:
        return "NULL_CONDITION"


NULL_CONDITION = NullCondition()


def cross_attention(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor) -> torch.Tensor:
    """softmax(q k^T / sqrt(d_k)) v with rowwise softmax.

    Shapes: q (..., Tq, d_k), k (..., Tk, d_k), v (..., Tk, d_v).
    """
    if q.shape[-1] != k.shape[-1]:
        raise InvalidArgumentError(
            f"query/key widths differ: {q.shape[-1]} vs {k.shape[-1]}"
        )
    if k.shape[-2] != v.shape[-2]:
        raise InvalidArgumentError(
            f"key/value row counts differ: {k.shape[-2]} vs {v.shape[-2]}"
        )
    scores = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    return torch.softmax(scores, dim=-1) @ v


def timestep_embedding(t: torch.Tensor, dim: int) -> torch.Tensor:
    """Sinusoidal embedding of continuous t in [0, 1], shape (B, dim)."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0) * torch.arange(half, dtype=t.dtype) / half)
    args = 1000.0 * t.unsqueeze(-1) * freqs
    return torch.cat([torch.sin(args), torch.cos(args)], dim=-1)


class ResBlock(nn.Module):
    def __init__(self, in_ch: int, out_ch: int, temb_dim: int, groups: int):
        super().__init__()
        self.norm1 = nn.GroupNorm(groups, in_ch)
        self.conv1 = nn.Conv2d(in_ch, out_ch, 3, padding=1)
        self.temb_proj = nn.Linear(temb_dim, out_ch)
        self.norm2 = nn.GroupNorm(groups, out_ch)
        self.conv2 = nn.Conv2d(out_ch, out_ch, 3, padding=1)
        self.skip = nn.Conv2d(in_ch, out_ch, 1) if in_ch != out_ch else nn.Identity()

    def forward(self, x: torch.Tensor, temb: torch.Tensor) -> torch.Tensor:
        h = self.conv1(F.silu(self.norm1(x)))
        h = h + self.temb_proj(temb)[:, :, None, None]
        h = self.conv2(F.silu(self.norm2(h)))
        return h + self.skip(x)


class CrossAttnBlock(nn.Module):
    """Multi-head cross-attention from image tokens to condition tokens."""

    def __init__(self, channels: int, cond_width: int, heads: int, groups: int):
        super().__init__()
        if channels % heads != 0:
            raise InvalidArgumentError("channels must divide evenly into heads")
        self.heads = heads
        self.norm = nn.GroupNorm(groups, channels)
        self.to_q = nn.Linear(channels, channels, bias=False)
        self.to_k = nn.Linear(cond_width, channels, bias=False)
        self.to_v = nn.Linear(cond_width, channels, bias=False)
        self.proj = nn.Linear(channels, channels)

    def forward(self, x: torch.Tensor, cond: torch.Tensor) -> torch.Tensor:
        b, c, h, w = x.shape
        tokens = self.norm(x).reshape(b, c, h * w).transpose(1, 2)
        q = self.to_q(tokens)
        k = self.to_k(cond)
        v = self.to_v(cond)

        def split(t):
            return t.reshape(b, -1, self.heads, c // self.heads).transpose(1, 2)

        out = cross_attention(split(q), split(k), split(v))
        out = out.transpose(1, 2).reshape(b, h * w, c)
        out = self.proj(out).transpose(1, 2).reshape(b, c, h, w)
        return x + out


class Denoiser(nn.Module):
    def __init__(self, config: DenoiserConfig):
        super().__init__()
        self.config = config
        w, g, td = config.width, config.groups, config.time_dim
        self.time_mlp = nn.Sequential(nn.Linear(td, td), nn.SiLU(), nn.Linear(td, td))
        self.conv_in = nn.Conv2d(config.latent_channels, w, 3, padding=1)
        self.res1 = ResBlock(w, w, td, g)
        self.down1 = nn.Conv2d(w, w, 3, stride=2, padding=1)
        self.res2 = ResBlock(w, w, td, g)
        self.attn2 = CrossAttnBlock(w, config.cond_width, config.heads, g)
        self.down2 = nn.Conv2d(w, w, 3, stride=2, padding=1)
        self.mid_res1 = ResBlock(w, w, td, g)
        self.mid_attn = CrossAttnBlock(w, config.cond_width, config.heads, g)
        self.mid_res2 = ResBlock(w, w, td, g)
        self.up_conv2 = nn.Conv2d(w, w, 3, padding=1)
        self.up_res2 = ResBlock(2 * w, w, td, g)
        self.up_attn2 = CrossAttnBlock(w, config.cond_width, config.heads, g)
        self.up_conv1 = nn.Conv2d(w, w, 3, padding=1)
        self.up_res1 = ResBlock(2 * w, w, td, g)
        self.norm_out = nn.GroupNorm(g, w)
        self.conv_out = nn.Conv2d(w, config.latent_channels, 3, padding=1)
        self.null_condition = nn.Parameter(
            torch.randn(config.cond_tokens, config.cond_width) * 0.02
        )

    def _prepare_condition(self, condition, batch: int, dtype) -> torch.Tensor:
        if condition is NULL_CONDITION or isinstance(condition, NullCondition):
            condition = self.null_condition
        if condition.dim() == 2:
            condition = condition.unsqueeze(0).expand(batch, -1, -1)
        if condition.shape[-1] != self.config.cond_width:
            raise InvalidArgumentError(
                f"condition width {condition.shape[-1]} != {self.config.cond_width}"
            )
        if condition.shape[0] != batch:
            raise InvalidArgumentError("condition batch size mismatch")
        return condition.to(dtype)

    def forward(self, z_t: torch.Tensor, t, condition) -> torch.Tensor:
        """Predict the noise component of z_t; output shape equals input."""
        squeeze = z_t.dim() == 3
        if squeeze:
            z_t = z_t.unsqueeze(0)
        b = z_t.shape[0]
        if not torch.is_tensor(t):
            t = torch.full((b,), float(t), dtype=z_t.dtype)
        cond = self._prepare_condition(condition, b, z_t.dtype)
        temb = self.time_mlp(timestep_embedding(t, self.config.time_dim))

        h0 = self.conv_in(z_t)
        h1 = self.res1(h0, temb)
        h2 = self.res2(self.down1(h1), temb)
        h2 = self.attn2(h2, cond)
        m = self.mid_res1(self.down2(h2), temb)
        m = self.mid_attn(m, cond)
        m = self.mid_res2(m, temb)
        u2 = self.up_conv2(F.interpolate(m, scale_factor=2, mode="nearest"))
        u2 = self.up_res2(torch.cat([u2, h2], dim=1), temb)
        u2 = self.up_attn2(u2, cond)
        u1 = self.up_conv1(F.interpolate(u2, scale_factor=2, mode="nearest"))
        u1 = self.up_res1(torch.cat([u1, h1], dim=1), temb)
        out = self.conv_out(F.silu(self.norm_out(u1)))
        return out[0] if squeeze else out


def build_denoiser(config: DenoiserConfig, seed: int = 0) -> Denoiser:
    seed_torch("denoiser-init", seed)
    return Denoiser(config)
