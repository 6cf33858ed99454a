"""Toy causal language model: the aligned feature source.

Per-token final hidden states (N x d_LLM) condition the adapter; there is
no 77-token truncation anywhere on this path. A <bos> token is prepended
internally so position i's state depends on tokens 0..i only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import torch
import torch.nn as nn
import torch.nn.functional as F

from llmdiff.config import LmConfig
from llmdiff.errors import InvalidArgumentError, NotInitializedError, TrainingFailureError
from llmdiff.seeding import numpy_rng, seed_torch
from llmdiff.text.tokenizer import TokenSequence


def sinusoidal_positions(n: int, d: int, dtype=torch.float32) -> torch.Tensor:
    """Standard fixed sin/cos positional table of shape (n, d)."""
    position = torch.arange(n, dtype=dtype).unsqueeze(1)
    div = torch.exp(torch.arange(0, d, 2, dtype=dtype) * (-math.log(10000.0) / d))
    table = torch.zeros(n, d, dtype=dtype)
    table[:, 0::2] = torch.sin(position * div)
    table[:, 1::2] = torch.cos(position * div)
    return table


def causal_mask(n: int, dtype=torch.float32) -> torch.Tensor:
    return torch.triu(torch.full((n, n), float("-inf"), dtype=dtype), diagonal=1)


class CausalLm(nn.Module):
    def __init__(self, config: LmConfig):
        super().__init__()
        self.config = config
        d = config.width
        self.token_embedding = nn.Embedding(config.vocab_size, d)
        self.blocks = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=d,
                nhead=config.heads,
                dim_feedforward=config.mlp_ratio * d,
                dropout=0.0,
                activation="gelu",
                batch_first=True,
            )
            for _ in range(config.layers)
        )
        self.ln_final = nn.LayerNorm(d)
        self.lm_head = nn.Linear(d, config.vocab_size, bias=False)
        self.bos_id = 2  # vocabulary reserves id 2 for <bos>
        self.trained = False

    def _require_trained(self) -> None:
        if not self.trained:
            raise NotInitializedError("LM weights not loaded; pretrain or load a checkpoint")

    def mark_trained(self) -> "CausalLm":
        self.trained = True
        return self

    def hidden_states(self, ids: torch.Tensor) -> torch.Tensor:
        """(B, N) ids -> (B, N, d) causal hidden states."""
        x = self.token_embedding(ids)
        x = x + sinusoidal_positions(ids.shape[1], x.shape[-1], dtype=x.dtype)
        mask = causal_mask(ids.shape[1], dtype=x.dtype)
        for block in self.blocks:
            x = block(x, src_mask=mask)
        return self.ln_final(x)

    def logits(self, ids: torch.Tensor) -> torch.Tensor:
        return self.lm_head(self.hidden_states(ids))

    @torch.no_grad()
    def encode(self, tokens: TokenSequence) -> torch.Tensor:
        """Final hidden states for the N input tokens, shape N x d_LLM."""
        self._require_trained()
        if tokens.count < 1:
            raise InvalidArgumentError("token sequence is empty")
        ids = torch.tensor((self.bos_id,) + tuple(tokens.ids), dtype=torch.long)
        return self.hidden_states(ids.unsqueeze(0))[0, 1:]


def build_lm(config: LmConfig, seed: int = 0) -> CausalLm:
    seed_torch("lm-init", seed)
    return CausalLm(config)


@dataclass(frozen=True)
class LmTrainConfig:
    steps: int = 1200
    batch_size: int = 32
    lr: float = 3e-4
    seed: int = 0
    log_every: int = 100


def _pad_batch(seqs, pad_id: int) -> torch.Tensor:
    width = max(len(s) for s in seqs)
    out = torch.full((len(seqs), width), pad_id, dtype=torch.long)
    for i, s in enumerate(seqs):
        out[i, : len(s)] = torch.tensor(s, dtype=torch.long)
    return out


def lm_cross_entropy(model: CausalLm, sequences, pad_id: int = 0) -> torch.Tensor:
    """Mean next-token cross entropy; <bos> prepended, pads ignored."""
    seqs = [(model.bos_id,) + tuple(s) for s in sequences]
    batch = _pad_batch(seqs, pad_id)
    logits = model.logits(batch[:, :-1])
    targets = batch[:, 1:]
    return F.cross_entropy(
        logits.reshape(-1, logits.shape[-1]), targets.reshape(-1), ignore_index=pad_id
    )


def perplexity(model: CausalLm, sequences, pad_id: int = 0) -> float:
    with torch.no_grad():
        return float(lm_cross_entropy(model, sequences, pad_id).exp())


def pretrain_lm(
    sequences,
    config: LmTrainConfig,
    model: CausalLm,
    val_sequences=None,
    pad_id: int = 0,
) -> dict:
    """Next-token training over tokenized text; mutates `model` in place."""
    n = len(sequences)
    if n < 1:
        raise InvalidArgumentError("empty training corpus")
    opt = torch.optim.Adam(model.parameters(), lr=config.lr)
    losses = []
    model.train()
    for step in range(config.steps):
        rng = numpy_rng("lm-batch", config.seed, step)
        idx = rng.choice(n, size=min(config.batch_size, n), replace=False)
        loss = lm_cross_entropy(model, [sequences[i] for i in idx], pad_id)
        if not torch.isfinite(loss):
            raise TrainingFailureError("LM loss diverged", step)
        opt.zero_grad()
        loss.backward()
        opt.step()
        if step % config.log_every == 0 or step == config.steps - 1:
            losses.append((step, float(loss.detach())))
    model.eval()
    model.mark_trained()
    report = {"losses": losses, "steps": config.steps}
    if val_sequences:
        report["val_perplexity"] = perplexity(model, val_sequences, pad_id)
    return report
