"""Deterministic seed derivation.

Every stochastic component draws from a seed derived from (base seed,
labels, step index) so that runs are reproducible and training loops can
resume mid-run without serializing RNG state.
"""

from __future__ import annotations

import hashlib

import numpy as np
import torch


def derive_seed(*parts) -> int:
    """Hash arbitrary labels/ints into a 63-bit seed, stable across runs."""
    h = hashlib.sha256("\x1f".join(str(p) for p in parts).encode()).digest()
    return int.from_bytes(h[:8], "little") & 0x7FFF_FFFF_FFFF_FFFF


def torch_generator(*parts) -> torch.Generator:
    g = torch.Generator()
    g.manual_seed(derive_seed(*parts))
    return g


def numpy_rng(*parts) -> np.random.Generator:
    return np.random.default_rng(derive_seed(*parts))


def seed_torch(*parts) -> None:
    """Seed torch's default generator (used before module construction)."""
    torch.manual_seed(derive_seed(*parts))
