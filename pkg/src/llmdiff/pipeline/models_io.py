"""Typed save/load of each model kind through the checkpoint container."""

from __future__ import annotations

from dataclasses import asdict
from pathlib import Path

from llmdiff.config import (
    AdapterConfig,
    AutoencoderConfig,
    ClipConfig,
    DenoiserConfig,
    LmConfig,
)
from llmdiff.errors import NotInitializedError
from llmdiff.adapter import QueryAdapter
from llmdiff.text.clip import ClipEncoder
from llmdiff.text.lm import CausalLm
from llmdiff.diffusion.denoiser import Denoiser
from llmdiff.diffusion.autoencoder import LatentAutoencoder
from llmdiff.pipeline.checkpoint import (
    load_checkpoint,
    load_module_arrays,
    module_arrays,
    save_checkpoint,
)

_KINDS = {
    "clip": (ClipConfig, ClipEncoder),
    "lm": (LmConfig, CausalLm),
    "adapter": (AdapterConfig, QueryAdapter),
    "denoiser": (DenoiserConfig, Denoiser),
    "autoencoder": (AutoencoderConfig, LatentAutoencoder),
}


def save_model(path, kind: str, module) -> None:
    config = {"model": asdict(module.config)}
    if hasattr(module, "trained"):
        config["trained"] = bool(module.trained)
    save_checkpoint(path, kind, config, module_arrays(module))


def load_model(path, kind: str):
    path = Path(path)
    if not path.exists():
        raise NotInitializedError(f"missing {kind} checkpoint at {path}")
    config_cls, model_cls = _KINDS[kind]
    _, config, arrays = load_checkpoint(path, expected_kind=kind)
    module = model_cls(config_cls(**_tupled(config["model"])))
    load_module_arrays(module, arrays)
    if hasattr(module, "trained"):
        module.trained = bool(config.get("trained", False))
    module.eval()
    return module


def _tupled(cfg: dict) -> dict:
    # JSON round-trips tuples as lists; dataclass fields expect tuples.
    return {k: tuple(v) if isinstance(v, list) else v for k, v in cfg.items()}
