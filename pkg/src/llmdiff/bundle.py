"""Container tying together the full generation chain."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from llmdiff.corpus.language import LanguageRegistry
from llmdiff.text.tokenizer import Vocabulary


@dataclass
class ModelBundle:
    vocab: Vocabulary
    registry: LanguageRegistry
    clip: object
    lm: object
    adapter: object
    denoiser: object
    autoencoder: object

    def generate(self, prompt, steps: int = 50, guidance: float = 3.0,
                 seed: int = 0) -> np.ndarray:
        from llmdiff.diffusion.sampler import sample

        return sample(
            prompt,
            steps,
            guidance,
            seed,
            lm=self.lm,
            adapter=self.adapter,
            denoiser=self.denoiser,
            autoencoder=self.autoencoder,
            vocab=self.vocab,
        )
