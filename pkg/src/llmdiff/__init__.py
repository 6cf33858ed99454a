"""Desk-scale text-to-image latent diffusion conditioned on adapted LM features."""

__version__ = "0.1.0"
