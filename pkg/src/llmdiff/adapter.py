"""Query adapter: maps LM hidden states into the CLIP token-feature space.

A small MLP projects the LM width down to the CLIP width, four transformer
encoder layers contextualize the projected sequence, and four decoder
layers cross-attend from a learnable query sequence. The output length is
fixed by the query count regardless of input length, which is what lets a
variable-length LM feature sequence stand in for a fixed-length CLIP
conditioning window.
"""

from __future__ import annotations

from dataclasses import dataclass

import torch
import torch.nn as nn

from llmdiff.config import AdapterConfig
from llmdiff.errors import InvalidArgumentError
from llmdiff.seeding import seed_torch
from llmdiff.text.lm import sinusoidal_positions


class QueryAdapter(nn.Module):
    def __init__(self, config: AdapterConfig):
        super().__init__()
        self.config = config
        d = config.width
        self.input_mlp = nn.Sequential(
            nn.Linear(config.llm_width, config.mlp_hidden),
            nn.GELU(),
            nn.Linear(config.mlp_hidden, d),
        )
        self.encoder = nn.ModuleList(
            nn.TransformerEncoderLayer(
                d_model=d,
                nhead=config.heads,
                dim_feedforward=config.ffn_ratio * d,
                dropout=0.0,
                activation="gelu",
                batch_first=True,
            )
            for _ in range(config.layers)
        )
        self.decoder = nn.ModuleList(
            nn.TransformerDecoderLayer(
                d_model=d,
                nhead=config.heads,
                dim_feedforward=config.ffn_ratio * d,
                dropout=0.0,
                activation="gelu",
                batch_first=True,
            )
            for _ in range(config.layers)
        )
        self.queries = nn.Parameter(torch.empty(config.queries, d))
        nn.init.normal_(self.queries, std=0.02)
        self.output_head = nn.Linear(d, d)

    def forward(
        self,
        h_llm: torch.Tensor,
        src_key_padding_mask: torch.Tensor | None = None,
        rows: int | None = None,
    ) -> torch.Tensor:
        """(L, d_LLM) -> (Q, d); batched (B, L, d_LLM) -> (B, Q, d).

        `src_key_padding_mask` (B, L; True = pad) excludes padded source
        positions from encoder self-attention and decoder cross-attention.
        `rows` runs the decoder with just the first `rows` learned queries
        (shorter targets need fewer output positions).
        """
        squeeze = h_llm.dim() == 2
        if squeeze:
            h_llm = h_llm.unsqueeze(0)
        if h_llm.dim() != 3 or h_llm.shape[-1] != self.config.llm_width:
            raise InvalidArgumentError(
                f"expected (..., L, {self.config.llm_width}) input, got {tuple(h_llm.shape)}"
            )
        if rows is None:
            rows = self.config.queries
        if not 1 <= rows <= self.config.queries:
            raise InvalidArgumentError(
                f"rows must lie in [1, {self.config.queries}], got {rows}"
            )
        x = self.input_mlp(h_llm)
        x = x + sinusoidal_positions(x.shape[1], x.shape[2], dtype=x.dtype)
        for block in self.encoder:
            x = block(x, src_key_padding_mask=src_key_padding_mask)
        out = self.queries[:rows].unsqueeze(0).expand(x.shape[0], -1, -1).to(x.dtype)
        for block in self.decoder:
            out = block(out, x, memory_key_padding_mask=src_key_padding_mask)
        out = self.output_head(out)
        return out[0] if squeeze else out

    def parameter_groups(self) -> dict:
        """Named parameter groups, one per architectural unit."""
        groups = {"input_mlp": list(self.input_mlp.parameters()),
                  "queries": [self.queries],
                  "output_head": list(self.output_head.parameters())}
        for i, block in enumerate(self.encoder):
            groups[f"encoder.{i}"] = list(block.parameters())
        for i, block in enumerate(self.decoder):
            groups[f"decoder.{i}"] = list(block.parameters())
        return groups


def build_adapter(config: AdapterConfig, seed: int = 0) -> QueryAdapter:
    seed_torch("adapter-init", seed)
    return QueryAdapter(config)


@dataclass(frozen=True)
class ParameterReport:
    entries: tuple   # ((name, count), ...) in input order
    total: int

    @property
    def percentages(self) -> dict:
        return {name: 100.0 * count / self.total for name, count in self.entries}

    def to_dict(self) -> dict:
        pct = self.percentages
        return {
            "modules": [
                {"module": n, "parameters": c, "percentage": round(pct[n], 1)}
                for n, c in self.entries
            ],
            "total": self.total,
        }

    def render(self) -> str:
        """Aligned three-row table: module names, counts, percentages."""
        pct = self.percentages
        names = [n for n, _ in self.entries] + ["Total"]
        counts = [format_count(c) for _, c in self.entries] + [format_count(self.total)]
        pcts = [f"{pct[n]:.1f}" for n, _ in self.entries] + ["100.0"]
        rows = [["Module"] + names,
                ["#Parameters"] + counts,
                ["Percentage (%)"] + pcts]
        widths = [max(len(r[i]) for r in rows) for i in range(len(rows[0]))]
        return "\n".join(
            "  ".join(cell.ljust(w) for cell, w in zip(row, widths)) for row in rows
        )


def format_count(n: int) -> str:
    if n >= 1e9:
        return f"{n / 1e9:.1f}B"
    if n >= 1e7:
        return f"{n / 1e6:.0f}M"
    if n >= 1e6:
        return f"{n / 1e6:.1f}M"
    if n >= 1e3:
        return f"{n / 1e3:.1f}K"
    return str(n)


def count_parameters(modules: dict) -> ParameterReport:
    """Parameter accounting over named modules (or pre-computed counts)."""
    entries = []
    for name, mod in modules.items():
        if isinstance(mod, int):
            count = mod
        else:
            count = sum(p.numel() for p in mod.parameters())
        entries.append((name, count))
    total = sum(c for _, c in entries)
    if total == 0:
        raise InvalidArgumentError("no parameters to account for")
    return ParameterReport(entries=tuple(entries), total=total)
