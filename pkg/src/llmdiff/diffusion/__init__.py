from llmdiff.diffusion.schedule import NoiseSchedule, gamma, add_noise
from llmdiff.diffusion.denoiser import (
    Denoiser,
    NullCondition,
    NULL_CONDITION,
    cross_attention,
)
from llmdiff.diffusion.autoencoder import LatentAutoencoder, train_autoencoder
from llmdiff.diffusion.training import diffusion_loss, DiffusionTrainer, DiffusionTrainConfig
from llmdiff.diffusion.sampler import cfg_predict, sample_latents, sample

__all__ = [
    "NoiseSchedule",
    "gamma",
    "add_noise",
    "Denoiser",
    "NullCondition",
    "NULL_CONDITION",
    "cross_attention",
    "LatentAutoencoder",
    "train_autoencoder",
    "diffusion_loss",
    "DiffusionTrainer",
    "DiffusionTrainConfig",
    "cfg_predict",
    "sample_latents",
    "sample",
]
