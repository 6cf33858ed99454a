import hashlib
import io
import zipfile

import numpy as np
import pytest
import torch

from llmdiff.errors import CheckpointIntegrityError
from llmdiff.config import AdapterConfig
from llmdiff.adapter import build_adapter
from llmdiff.pipeline.checkpoint import (
    arrays_checksum,
    load_checkpoint,
    load_module_arrays,
    load_optimizer_arrays,
    module_arrays,
    optimizer_arrays,
    save_checkpoint,
)
from llmdiff.pipeline.models_io import load_model, save_model


@pytest.fixture
def sample_arrays():
    rng = np.random.default_rng(0)
    return {
        "weights.a": rng.normal(size=(4, 5)).astype(np.float32),
        "weights.b": rng.normal(size=(7,)),
        "step": np.array(12, dtype=np.int64),
    }


class TestContainer:
    def test_round_trip_bitwise(self, tmp_path, sample_arrays):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, "test", {"alpha": 1, "name": "x"}, sample_arrays)
        kind, config, arrays = load_checkpoint(path)
        assert kind == "test"
        assert config == {"alpha": 1, "name": "x"}
        for name, arr in sample_arrays.items():
            assert arrays[name].dtype == arr.dtype
            assert np.array_equal(arrays[name], arr)

    def test_deterministic_file_bytes(self, tmp_path, sample_arrays):
        a, b = tmp_path / "a.ckpt", tmp_path / "b.ckpt"
        save_checkpoint(a, "test", {"k": 1}, sample_arrays)
        save_checkpoint(b, "test", {"k": 1}, sample_arrays)
        assert a.read_bytes() == b.read_bytes()

    def test_kind_mismatch(self, tmp_path, sample_arrays):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, "test", {}, sample_arrays)
        with pytest.raises(CheckpointIntegrityError, match="kind"):
            load_checkpoint(path, expected_kind="other")

    def test_config_header_mismatch(self, tmp_path, sample_arrays):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, "test", {"width": 8}, sample_arrays)
        with pytest.raises(CheckpointIntegrityError, match="width"):
            load_checkpoint(path, expected_config={"width": 16})

    def test_missing_array_named(self, tmp_path, sample_arrays):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, "test", {}, sample_arrays)
        # Constructed corruption: rebuild the archive without one entry.
        stripped = tmp_path / "stripped.ckpt"
        with zipfile.ZipFile(path) as src, zipfile.ZipFile(stripped, "w") as dst:
            for name in src.namelist():
                if name != "arrays/weights.b.npy":
                    dst.writestr(name, src.read(name))
        with pytest.raises(CheckpointIntegrityError, match="weights.b"):
            load_checkpoint(stripped)

    def test_corrupt_array_named(self, tmp_path, sample_arrays):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, "test", {}, sample_arrays)
        tampered = tmp_path / "tampered.ckpt"
        with zipfile.ZipFile(path) as src, zipfile.ZipFile(tampered, "w") as dst:
            for name in src.namelist():
                blob = src.read(name)
                if name == "arrays/weights.a.npy":
                    blob = blob[:-4] + bytes(4)
                dst.writestr(name, blob)
        with pytest.raises(CheckpointIntegrityError, match="weights.a"):
            load_checkpoint(tampered)

    def test_truncated_file(self, tmp_path, sample_arrays):
        path = tmp_path / "model.ckpt"
        save_checkpoint(path, "test", {}, sample_arrays)
        truncated = tmp_path / "truncated.ckpt"
        truncated.write_bytes(path.read_bytes()[:100])
        with pytest.raises(CheckpointIntegrityError):
            load_checkpoint(truncated)

    def test_missing_file(self, tmp_path):
        with pytest.raises(CheckpointIntegrityError):
            load_checkpoint(tmp_path / "absent.ckpt")

    def test_checksum_order_insensitive(self, sample_arrays):
        reordered = dict(reversed(list(sample_arrays.items())))
        assert arrays_checksum(sample_arrays) == arrays_checksum(reordered)
        changed = dict(sample_arrays)
        changed["weights.a"] = changed["weights.a"] + 1
        assert arrays_checksum(changed) != arrays_checksum(sample_arrays)


class TestModuleBridge:
    def test_module_round_trip_bitwise(self, tmp_path):
        cfg = AdapterConfig(llm_width=12, width=8, queries=5, heads=2, mlp_hidden=16)
        model = build_adapter(cfg, seed=3)
        path = tmp_path / "adapter.ckpt"
        save_model(path, "adapter", model)
        loaded = load_model(path, "adapter")
        assert loaded.config == cfg
        assert arrays_checksum(module_arrays(loaded)) == arrays_checksum(module_arrays(model))

    def test_state_mismatch_detected(self):
        cfg = AdapterConfig(llm_width=12, width=8, queries=5, heads=2, mlp_hidden=16)
        model = build_adapter(cfg, seed=3)
        arrays = module_arrays(model)
        arrays.pop("queries")
        with pytest.raises(CheckpointIntegrityError, match="queries"):
            load_module_arrays(model, arrays)

    def test_optimizer_state_round_trip(self):
        cfg = AdapterConfig(llm_width=12, width=8, queries=5, heads=2, mlp_hidden=16)
        model = build_adapter(cfg, seed=4)
        opt = torch.optim.Adam(model.parameters(), lr=1e-3)
        x = torch.randn(6, 12, generator=torch.Generator().manual_seed(0))
        for _ in range(3):
            loss = (model(x) ** 2).sum()
            opt.zero_grad()
            loss.backward()
            opt.step()
        arrays = optimizer_arrays(opt)

        model2 = build_adapter(cfg, seed=4)
        load_module_arrays(model2, module_arrays(model))
        opt2 = torch.optim.Adam(model2.parameters(), lr=1e-3)
        load_optimizer_arrays(opt2, arrays)

        for m, o in ((model, opt), (model2, opt2)):
            loss = (m(x) ** 2).sum()
            o.zero_grad()
            loss.backward()
            o.step()
        assert arrays_checksum(module_arrays(model)) == arrays_checksum(module_arrays(model2))
