import pytest
import torch

from llmdiff.config import AdapterConfig, ClipConfig, LmConfig
from llmdiff.corpus.language import LanguageRegistry
from llmdiff.text.tokenizer import Vocabulary
from llmdiff.text.clip import ClipTrainConfig, build_clip
from llmdiff.text.lm import LmTrainConfig, build_lm
from llmdiff.adapter import build_adapter
from llmdiff.diffusion.autoencoder import AutoencoderTrainConfig

torch.set_num_threads(1)


@pytest.fixture(scope="session")
def registry():
    return LanguageRegistry(("en", "pl-1"))


@pytest.fixture(scope="session")
def vocab(registry):
    return Vocabulary.from_registry(registry)


@pytest.fixture(scope="session")
def clip_model(vocab):
    """Untrained weights, marked loaded: exercises interface contracts."""
    return build_clip(ClipConfig(vocab_size=len(vocab)), seed=11).mark_trained()


@pytest.fixture(scope="session")
def lm_model(vocab):
    return build_lm(LmConfig(vocab_size=len(vocab)), seed=12).mark_trained()


@pytest.fixture(scope="session")
def adapter_model():
    return build_adapter(AdapterConfig(), seed=13)


@pytest.fixture(scope="session")
def small_ws(tmp_path_factory):
    """A fully prepared workspace with minimal training budgets.

    Model quality is irrelevant here; pipeline mechanics (freezing,
    resumability, checkpointing, evaluation plumbing) are what matter.
    """
    from llmdiff.pipeline.stages import Workspace, WorkspaceConfig

    cfg = WorkspaceConfig(
        stage1_size=24,
        stage1_long_fraction=0.25,
        paired_size=32,
        eval_size=6,
        clip_train=ClipTrainConfig(steps=25, batch_size=32),
        lm_train=LmTrainConfig(steps=25, batch_size=16),
        autoencoder_train=AutoencoderTrainConfig(steps=40, batch_size=16),
        base_denoiser_steps=20,
        clip_corpus_size=128,
        seed=5,
    )
    ws = Workspace(tmp_path_factory.mktemp("small-ws"), cfg)
    ws.prepare_backbones()
    return ws
