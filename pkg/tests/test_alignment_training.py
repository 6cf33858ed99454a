import pytest
import torch

from llmdiff.errors import InvalidArgumentError
from llmdiff.adapter import build_adapter
from llmdiff.alignment import AlignmentDataset, Stage1Config, Stage1Trainer
from llmdiff.config import AdapterConfig
from llmdiff.pipeline.checkpoint import module_checksum


@pytest.fixture(scope="module")
def dataset(small_ws):
    return small_ws.alignment_dataset()


class TestDataset:
    def test_sources_and_targets_align(self, dataset, small_ws):
        assert len(dataset.sources) == len(dataset.targets) == len(dataset.languages)
        # n English + n per pseudo-language, over the same scenes.
        n = small_ws.config.stage1_size
        assert len(dataset) == 2 * n
        assert dataset.languages.count("en") == n
        assert dataset.languages.count("pl-1") == n

    def test_targets_are_segmented(self, dataset):
        for target in dataset.targets:
            assert target.shape[0] % 77 == 0

    def test_pair_members_share_targets(self, dataset):
        # The pl-1 prompt of a scene aligns against the same English target.
        by_scene = {}
        for i, seed in enumerate(dataset.scene_seeds):
            by_scene.setdefault(seed, []).append(i)
        for indices in by_scene.values():
            first = dataset.targets[indices[0]]
            for i in indices[1:]:
                assert torch.equal(dataset.targets[i], first)

    def test_split_is_scene_stratified(self, dataset):
        train_idx, val_idx = dataset.split(0.2, seed=0)
        train_scenes = {dataset.scene_seeds[i] for i in train_idx}
        val_scenes = {dataset.scene_seeds[i] for i in val_idx}
        assert train_scenes.isdisjoint(val_scenes)
        assert len(train_idx) + len(val_idx) == len(dataset)


class TestTrainer:
    def test_queries_must_cover_targets(self, dataset):
        small = build_adapter(AdapterConfig(queries=77), seed=0)
        if dataset.max_target_rows > 77:
            with pytest.raises(InvalidArgumentError):
                Stage1Trainer(dataset, Stage1Config(steps=1), small)

    def test_unknown_variant_rejected(self, dataset, small_ws):
        adapter = build_adapter(small_ws.adapter_config(), seed=0)
        with pytest.raises(InvalidArgumentError):
            Stage1Trainer(dataset, Stage1Config(loss_variant="l1", steps=1), adapter)

    def test_training_reduces_validation_cosine(self, dataset, small_ws):
        adapter = build_adapter(small_ws.adapter_config(), seed=3)
        trainer = Stage1Trainer(
            dataset,
            Stage1Config(loss_variant="cos-mag", steps=120, batch_size=8,
                         lr=1e-3, seed=3),
            adapter,
        )
        before = trainer.validation_loss("cos")
        trainer.run(0, 120)
        after = trainer.validation_loss("cos")
        assert after < before

    def test_resumable_steps_are_deterministic(self, dataset, small_ws):
        sums = []
        for _ in range(2):
            adapter = build_adapter(small_ws.adapter_config(), seed=4)
            trainer = Stage1Trainer(
                dataset, Stage1Config(steps=6, batch_size=8, seed=4), adapter
            )
            trainer.run(0, 6)
            sums.append(module_checksum(adapter))
        assert sums[0] == sums[1]
