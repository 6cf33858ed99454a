"""Acceptance gate: one test per criterion, each printing a PASS line.

Run with `pytest tests/test_acceptance.py -v -s`. The trend criteria train
the full desk-scale stack (backbones + stage runs) and dominate runtime;
set LLMDIFF_ACCEPT_WS to reuse a prepared workspace directory across runs.
"""

import math
import os

import numpy as np
import pytest
import torch

from llmdiff.adapter import build_adapter, count_parameters
from llmdiff.alignment import (
    Stage1Config,
    Stage1Trainer,
    alignment_loss,
    loss_cos_magnitude,
    loss_cosine,
    loss_mse,
    magnitude_report,
)
from llmdiff.config import AdapterConfig
from llmdiff.diffusion.denoiser import NULL_CONDITION, build_denoiser, cross_attention
from llmdiff.diffusion.sampler import cfg_predict
from llmdiff.diffusion.schedule import add_noise, gamma
from llmdiff.errors import DegenerateInputError
from llmdiff.evaluation import frechet_distance, loss_variant_report
from llmdiff.pipeline.ablation import run_ablation
from llmdiff.pipeline.checkpoint import arrays_checksum, module_arrays, module_checksum
from llmdiff.pipeline.models_io import load_model, save_model
from llmdiff.pipeline.stages import StageConfig, Workspace, run_stage
from llmdiff.presets import (
    EVAL_GUIDANCE,
    EVAL_STEPS,
    desk_stage_configs,
    desk_workspace_config,
)
from llmdiff.seeding import derive_seed


def report(name: str, detail: str = "") -> None:
    suffix = f" ({detail})" if detail else ""
    print(f"\n[ACCEPTANCE] {name}: PASS{suffix}")


# ---------------------------------------------------------------------------
# Shared desk-scale workspace (trend criteria)
# ---------------------------------------------------------------------------

@pytest.fixture(scope="session")
def accept_ws(tmp_path_factory):
    root = os.environ.get("LLMDIFF_ACCEPT_WS")
    if root is None:
        root = tmp_path_factory.mktemp("accept-ws")
    ws = Workspace(root, desk_workspace_config())
    ws.prepare_backbones()
    return ws


@pytest.fixture(scope="session")
def variant_runs(accept_ws):
    """Stage-1 runs per loss variant per seed; shared by two criteria."""
    runs = {}
    stage1 = desk_stage_configs()[1]
    for seed in (0, 1, 2):
        for variant in ("mse", "cos", "cos-mag"):
            config = StageConfig(
                stage=1, steps=stage1.steps, batch_size=stage1.batch_size,
                lr=stage1.lr, seed=seed, loss_variant=variant, lam=stage1.lam,
            )
            out = accept_ws.runs_dir / "acceptance-variants" / f"{variant}-s{seed}"
            if not (out / "record.json").exists():
                run_stage(accept_ws, config, None, out)
            runs[(variant, seed)] = out
    return runs


# ---------------------------------------------------------------------------
# 1. Alignment-loss correctness (< 1 min)
# ---------------------------------------------------------------------------

class TestAlignmentLossCorrectness:
    def test_criterion(self):
        g = torch.Generator().manual_seed(0)

        def rand(shape):
            return torch.randn(*shape, generator=g, dtype=torch.float64)

        # TRIVIAL examples, exact.
        a = rand((4, 3))
        assert float(loss_mse(a, a.clone())) == 0.0
        assert float(loss_mse(a, torch.zeros_like(a))) == pytest.approx(
            float((a ** 2).mean()), rel=1e-15
        )
        assert float(loss_cosine(a, a.clone())) == pytest.approx(0.0, abs=1e-12)
        assert float(loss_cosine(a, -a)) == pytest.approx(2.0, abs=1e-12)
        ortho_a = torch.tensor([[1.0, 0.0], [0.0, 2.0]], dtype=torch.float64)
        ortho_b = torch.tensor([[0.0, 3.0], [-1.0, 0.0]], dtype=torch.float64)
        assert float(loss_cosine(ortho_a, ortho_b)) == pytest.approx(1.0, abs=1e-12)
        direction = torch.tensor([[1.0, 0.0], [0.0, 1.0]], dtype=torch.float64)
        assert float(loss_cos_magnitude(3 * direction, direction, 1.0)) == pytest.approx(4.0)
        b = rand((4, 3))
        assert torch.equal(loss_cos_magnitude(a, b, 0.0), loss_cosine(a, b))
        with pytest.raises(DegenerateInputError):
            bad = a.clone()
            bad[0] = 0.0
            loss_cosine(a, bad)

        # Gradients vs central finite differences, 20 random inputs.
        worst = 0.0
        for trial in range(20):
            variant, lam = [("mse", 0.0), ("cos", 0.0), ("cos-mag", 0.7)][trial % 3]
            target = rand((5, 4))
            x = rand((5, 4)).requires_grad_(True)
            loss = alignment_loss(variant, target, x, lam)
            loss.backward()
            numeric = torch.zeros_like(x)
            h = 1e-6
            with torch.no_grad():
                flat = x.reshape(-1)
                out = numeric.reshape(-1)
                for i in range(flat.numel()):
                    orig = float(flat[i])
                    flat[i] = orig + h
                    plus = float(alignment_loss(variant, target, x, lam))
                    flat[i] = orig - h
                    minus = float(alignment_loss(variant, target, x, lam))
                    flat[i] = orig
                    out[i] = (plus - minus) / (2 * h)
            rel = float((x.grad - numeric).norm()) / max(
                float(numeric.norm()), float(x.grad.norm()), 1e-12
            )
            worst = max(worst, rel)
            assert rel < 1e-4
        report("alignment-loss correctness", f"max grad rel err {worst:.2e}")


# ---------------------------------------------------------------------------
# 2-3. Loss-variant ordering and magnitude-constraint effect (< 30 min)
# ---------------------------------------------------------------------------

class TestLossVariantTrends:
    def test_variant_ordering(self, accept_ws, variant_runs):
        # Known-red at desk scale: the `cos > mse` half of the ordering
        # does not transfer to a noiseless, within-capacity alignment
        # task (value matching subsumes direction matching here). The
        # criterion is asserted as stated; per-seed scores are reported
        # in the failure message.
        held = 0
        details = []
        for seed in (0, 1, 2):
            adapters = {"baseline": None}
            for variant in ("mse", "cos", "cos-mag"):
                adapters[variant] = load_model(
                    variant_runs[(variant, seed)] / "adapter.ckpt", "adapter"
                )
            rows = loss_variant_report(
                accept_ws.eval_corpus(), adapters, accept_ws.clip(), accept_ws.lm(),
                accept_ws.vocab, accept_ws.registry,
            )
            by = {r.name: r.overall for r in rows}
            ok = by["cos-mag"] >= by["cos"] and by["cos"] > by["mse"]
            held += ok
            details.append(
                f"seed{seed}: mse={by['mse']:.4f} cos={by['cos']:.4f} "
                f"cos-mag={by['cos-mag']:.4f} {'ok' if ok else 'VIOLATED'}"
            )
        assert held >= 2, "; ".join(details)
        report("loss-variant ordering (cos-mag >= cos > mse, >=2/3 seeds)",
               f"{held}/3 seeds; " + "; ".join(details))

    def test_magnitude_constraint_effect(self, accept_ws, variant_runs):
        ratios = []
        for seed in (0, 1, 2):
            gaps = {}
            for variant in ("cos", "cos-mag"):
                adapter = load_model(
                    variant_runs[(variant, seed)] / "adapter.ckpt", "adapter"
                )
                values = [
                    magnitude_report(
                        e.prompt, accept_ws.lm(), accept_ws.clip(), adapter,
                        accept_ws.vocab, variant,
                    ).mean_abs_gap()
                    for e in accept_ws.eval_corpus()
                    if e.prompt.language == "en"
                ]
                gaps[variant] = float(np.mean(values))
            ratios.append(gaps["cos-mag"] / gaps["cos"])
        assert all(r <= 0.5 for r in ratios), ratios
        report("magnitude-constraint effect (gap <= 50% of cosine-only)",
               "ratios " + ", ".join(f"{r:.3f}" for r in ratios))


# ---------------------------------------------------------------------------
# 4. Stage-ablation trends (< 2 h)
# ---------------------------------------------------------------------------

class TestStageAblationTrends:
    @pytest.fixture(scope="class")
    def ablation_rows(self, accept_ws):
        rows = run_ablation(
            accept_ws,
            ((1,), (2,), (1, 2), (1, 2, 3)),
            desk_stage_configs(),
            out_root=accept_ws.runs_dir / "acceptance-ablation",
            eval_steps=EVAL_STEPS,
            guidance=EVAL_GUIDANCE,
            seed=0,
        )
        return {combo: record for combo, record in rows}

    def test_stage2_improves_fid(self, ablation_rows):
        fid_s1 = ablation_rows[(1,)].metrics["fid"]
        fid_s12 = ablation_rows[(1, 2)].metrics["fid"]
        assert fid_s12 < fid_s1, (fid_s12, fid_s1)
        report("stage ablation: {1,2} lowers FID-analog vs {1}",
               f"{fid_s12:.2f} < {fid_s1:.2f}")

    def test_stage3_improves_aesthetics(self, ablation_rows):
        aes_s12 = ablation_rows[(1, 2)].metrics["aesthetic"]
        aes_s123 = ablation_rows[(1, 2, 3)].metrics["aesthetic"]
        assert aes_s123 > aes_s12, (aes_s123, aes_s12)
        report("stage ablation: {1,2,3} raises aesthetic mean vs {1,2}",
               f"{aes_s123:.2f} > {aes_s12:.2f}")

    def test_cross_lingual_transfer(self, ablation_rows):
        with_s1 = ablation_rows[(1, 2)].metrics["per_language"]
        without_s1 = ablation_rows[(2,)].metrics["per_language"]
        ratio_with = with_s1["pl-1"]["clip_s"] / with_s1["en"]["clip_s"]
        ratio_without = without_s1["pl-1"]["clip_s"] / without_s1["en"]["clip_s"]
        assert ratio_with >= 0.8, (ratio_with, with_s1)
        assert ratio_without < 0.8, (ratio_without, without_s1)
        report("stage ablation: cross-lingual transfer needs stage 1",
               f"pl/en with stage1 {ratio_with:.2f} >= 0.8 > without {ratio_without:.2f}")


# ---------------------------------------------------------------------------
# 5. Diffusion invariants (< 1 min)
# ---------------------------------------------------------------------------

class TestDiffusionInvariants:
    def test_criterion(self):
        assert gamma(0.0) == 1.0 and gamma(1.0) == 0.0
        grid = [i / 500 for i in range(501)]
        values = [gamma(t) for t in grid]
        assert all(a >= b for a, b in zip(values, values[1:]))

        g = torch.Generator().manual_seed(1)
        z0 = torch.randn(100_000, generator=g, dtype=torch.float64)
        eps = torch.randn(100_000, generator=g, dtype=torch.float64)
        for t in (0.25, 0.5, 0.9):
            assert abs(float(add_noise(z0, eps, t).var()) - 1.0) < 0.05
        zb = torch.randn(4, 2, 3, generator=g)
        eb = torch.randn(4, 2, 3, generator=g)
        assert torch.equal(add_noise(zb, eb, 0.0), zb)
        assert torch.equal(add_noise(zb, eb, 1.0), eb)

        rng = np.random.default_rng(2)
        worst = 0.0
        for trial in range(50):
            tq, tk = int(rng.integers(1, 7)), int(rng.integers(1, 7))
            dk, dv = int(rng.integers(1, 6)), int(rng.integers(1, 6))
            q = torch.randn(tq, dk, generator=g, dtype=torch.float64)
            k = torch.randn(tk, dk, generator=g, dtype=torch.float64)
            v = torch.randn(tk, dv, generator=g, dtype=torch.float64)
            weights = torch.softmax(q @ k.T / math.sqrt(dk), dim=-1)
            assert torch.allclose(weights.sum(-1), torch.ones(tq, dtype=torch.float64),
                                  atol=1e-6)
            oracle = _brute_attention(q, k, v)
            err = float((cross_attention(q, k, v) - oracle).abs().max())
            worst = max(worst, err)
            assert err < 1e-6
        report("diffusion invariants", f"max attention err {worst:.1e}")


def _brute_attention(q, k, v):
    out = torch.zeros(q.shape[0], v.shape[1], dtype=torch.float64)
    for i in range(q.shape[0]):
        scores = [
            sum(float(q[i, c]) * float(k[j, c]) for c in range(q.shape[1]))
            / math.sqrt(q.shape[1])
            for j in range(k.shape[0])
        ]
        m = max(scores)
        weights = [math.exp(s - m) for s in scores]
        z = sum(weights)
        for j in range(k.shape[0]):
            for c in range(v.shape[1]):
                out[i, c] += weights[j] / z * float(v[j, c])
    return out


# ---------------------------------------------------------------------------
# 6. CFG contract (< 1 min)
# ---------------------------------------------------------------------------

class TestCfgContract:
    def test_criterion(self):
        from llmdiff.config import DenoiserConfig

        model = build_denoiser(
            DenoiserConfig(latent_channels=2, width=8, cond_width=6, cond_tokens=3,
                           heads=2, time_dim=8, groups=4),
            seed=5,
        ).eval()
        g = torch.Generator().manual_seed(3)
        z = torch.randn(2, 8, 8, generator=g)
        cond = torch.randn(4, 6, generator=g)
        assert torch.equal(cfg_predict(model, z, 0.4, cond, 0.0),
                           model(z, 0.4, NULL_CONDITION))
        assert torch.equal(cfg_predict(model, z, 0.4, cond, 1.0),
                           model(z, 0.4, cond))
        mid = cfg_predict(model, z, 0.4, cond, 0.5)
        endpoints = (cfg_predict(model, z, 0.4, cond, 0.0)
                     + cfg_predict(model, z, 0.4, cond, 1.0)) / 2
        err = float((mid - endpoints).abs().max())
        assert err < 1e-6
        report("CFG contract", f"midpoint err {err:.1e}")


# ---------------------------------------------------------------------------
# 7. Segmented encoding (< 1 min)
# ---------------------------------------------------------------------------

class TestSegmentedEncoding:
    def test_criterion(self, clip_model, vocab):
        from llmdiff.text.tokenizer import TokenSequence

        rng = np.random.default_rng(4)

        def seq(ids):
            return TokenSequence(ids=tuple(int(i) for i in ids), language="en")

        # Bit-equality for N <= 77.
        for n in (1, 20, 77):
            ids = rng.integers(3, len(vocab), size=n)
            assert torch.equal(
                clip_model.encode_text_segmented(seq(ids)),
                clip_model.encode_text(seq(ids)),
            )
        # Chunk locality and truncation sensitivity over 100 random prompts.
        for _ in range(100):
            n = int(rng.integers(78, 240))
            ids = rng.integers(3, len(vocab), size=n)
            pos = int(rng.integers(0, n))
            edited = ids.copy()
            edited[pos] = 3 if edited[pos] != 3 else 4
            seg_a = clip_model.encode_text_segmented(seq(ids))
            seg_b = clip_model.encode_text_segmented(seq(edited))
            chunk = pos // 77
            lo, hi = chunk * 77, (chunk + 1) * 77
            assert not torch.equal(seg_a[lo:hi], seg_b[lo:hi])
            mask = torch.ones(seg_a.shape[0], dtype=torch.bool)
            mask[lo:hi] = False
            assert torch.equal(seg_a[mask], seg_b[mask])
            if pos >= 77:
                assert torch.equal(
                    clip_model.encode_text(seq(ids)),
                    clip_model.encode_text(seq(edited)),
                )
        report("segmented encoding", "100 random prompts")


# ---------------------------------------------------------------------------
# 8. Fréchet analog (< 1 min)
# ---------------------------------------------------------------------------

class TestFrechetAnalog:
    def test_criterion(self):
        rng = np.random.default_rng(5)
        a = rng.normal(size=(60, 6))
        assert frechet_distance(a, a.copy()) < 1e-6
        delta = rng.normal(size=6)
        assert frechet_distance(a, a + delta) == pytest.approx(
            float(delta @ delta), abs=1e-6
        )
        worst = 0.0
        for trial in range(20):
            d = int(rng.integers(2, 8))
            n = int(rng.integers(d + 2, 70))
            m = int(rng.integers(d + 2, 70))
            x = rng.normal(size=(n, d)) @ rng.normal(size=(d, d)) + rng.normal(size=d)
            y = rng.normal(size=(m, d)) @ rng.normal(size=(d, d)) + rng.normal(size=d)
            got = frechet_distance(x, y)
            want = _frechet_eig_oracle(x, y)
            worst = max(worst, abs(got - want))
            assert got == pytest.approx(want, abs=1e-5)
        report("Fréchet analog", f"max oracle gap {worst:.1e}")


def _frechet_eig_oracle(a, b):
    def eig_sqrt(mat):
        vals, vecs = np.linalg.eigh(mat)
        return vecs @ np.diag(np.sqrt(np.clip(vals, 0, None))) @ vecs.T

    mu_a, mu_b = a.mean(axis=0), b.mean(axis=0)
    sig_a = np.cov(a, rowvar=False)
    sig_b = np.cov(b, rowvar=False)
    sqrt_a = eig_sqrt((sig_a + sig_a.T) / 2)
    inner = sqrt_a @ ((sig_b + sig_b.T) / 2) @ sqrt_a
    diff = mu_a - mu_b
    return float(
        diff @ diff + np.trace(sig_a) + np.trace(sig_b)
        - 2 * np.trace(eig_sqrt((inner + inner.T) / 2))
    )


# ---------------------------------------------------------------------------
# 9. Pipeline freezing and resumability (< 10 min)
# ---------------------------------------------------------------------------

class TestPipelineDiscipline:
    def test_criterion(self, accept_ws, tmp_path):
        before = {
            "clip": module_checksum(accept_ws.clip()),
            "lm": module_checksum(accept_ws.lm()),
            "autoencoder": module_checksum(accept_ws.autoencoder()),
            "base": module_checksum(load_model(accept_ws.base_denoiser_path(), "denoiser")),
        }
        # Freezing per stage.
        run_stage(accept_ws, StageConfig(stage=1, steps=5, batch_size=8, seed=31),
                  None, tmp_path / "f1")
        run_stage(accept_ws, StageConfig(stage=2, steps=5, batch_size=8, seed=31),
                  None, tmp_path / "f2")
        run_stage(accept_ws, StageConfig(stage=3, steps=5, batch_size=8, seed=31,
                                         aesthetic_top_fraction=0.2),
                  None, tmp_path / "f3")
        after = {
            "clip": module_checksum(accept_ws.clip()),
            "lm": module_checksum(accept_ws.lm()),
            "autoencoder": module_checksum(accept_ws.autoencoder()),
            "base": module_checksum(load_model(accept_ws.base_denoiser_path(), "denoiser")),
        }
        assert after == before

        # Split-run bitwise resumability (stage 2 covers adapter + denoiser).
        full = tmp_path / "resume-full"
        halves = tmp_path / "resume-halves"
        run_stage(accept_ws, StageConfig(stage=2, steps=8, batch_size=8, seed=32),
                  None, full)
        run_stage(accept_ws, StageConfig(stage=2, steps=4, batch_size=8, seed=32),
                  None, halves)
        run_stage(accept_ws, StageConfig(stage=2, steps=8, batch_size=8, seed=32),
                  None, halves)
        for name in ("adapter", "denoiser"):
            a = load_model(full / f"{name}.ckpt", name)
            b = load_model(halves / f"{name}.ckpt", name)
            assert module_checksum(a) == module_checksum(b), name

        # Checkpoint roundtrip, bitwise.
        adapter = build_adapter(accept_ws.adapter_config(), seed=derive_seed("rt", 0))
        path = tmp_path / "roundtrip.ckpt"
        save_model(path, "adapter", adapter)
        loaded = load_model(path, "adapter")
        assert arrays_checksum(module_arrays(loaded)) == arrays_checksum(
            module_arrays(adapter)
        )
        report("pipeline freezing + resumability + roundtrip")


# ---------------------------------------------------------------------------
# 10. Parameter accounting (< 1 min)
# ---------------------------------------------------------------------------

class TestParameterAccounting:
    def test_criterion(self):
        from tests.test_adapter import TINY, expected_adapter_parameters

        toy = build_adapter(TINY, seed=0)
        default = build_adapter(AdapterConfig(), seed=0)
        for model, cfg in ((toy, TINY), (default, AdapterConfig())):
            got = count_parameters({"adapter": model}).entries[0][1]
            assert got == expected_adapter_parameters(cfg)
        rep = count_parameters(
            {"Our Adapter": 487_000_000, "VAE": 83_000_000,
             "UNet": 2_500_000_000, "LLM": 7_500_000_000}
        )
        assert sum(rep.percentages.values()) == pytest.approx(100.0, abs=0.1)
        assert "10.6B" in rep.render()
        report("parameter accounting", "closed-form counts exact; percentages sum 100")


# ---------------------------------------------------------------------------
# Secondary: evaluation service end-to-end (scripted 400-pair session)
# ---------------------------------------------------------------------------

class TestSecondaryEvalService:
    def test_criterion(self, tmp_path):
        from fastapi.testclient import TestClient
        from PIL import Image as PILImage

        from llmdiff.service.app import create_app
        from llmdiff.service.store import EvalStore, ManifestPair, write_manifest

        image_dir = tmp_path / "images"
        image_dir.mkdir()
        rng = np.random.default_rng(0)
        for i in range(8):
            arr = rng.integers(0, 255, size=(4, 4, 3), dtype=np.uint8)
            PILImage.fromarray(arr).save(image_dir / f"img{i}.png")
        baselines = ("alpha-sys", "beta-sys", "gamma-sys", "delta-sys")
        pairs = []
        for b_i, baseline in enumerate(baselines):
            for i in range(100):
                pairs.append(ManifestPair(
                    prompt=f"a scene captioned {b_i * 100 + i}",
                    baseline=baseline,
                    primary_image=str(image_dir / f"img{i % 8}.png"),
                    baseline_image=str(image_dir / f"img{(i + 1) % 8}.png"),
                ))
        manifest = tmp_path / "manifest.json"
        write_manifest(manifest, pairs)

        store = EvalStore(tmp_path / "store")
        http = TestClient(create_app(store, default_manifest=str(manifest)))
        created = http.post("/sessions", json={"user_id": "user-1", "seed": 11}).json()
        sid = created["session_id"]
        assert created["pair_count"] == 400

        # Blinding scan across every payload byte.
        for index in range(1, 401):
            raw = http.get(f"/sessions/{sid}/pairs/{index}").content.decode()
            for token in baselines + ("primary", "baseline", "model"):
                assert token not in raw

        # Scripted voting with a mid-session revision.
        choices = {}
        for index in range(1, 401):
            choice = ("left", "right", "tie")[index % 3]
            choices[index] = choice
            assert http.put(f"/sessions/{sid}/votes/{index}",
                            json={"choice": choice}).status_code == 200
        # back -> change -> forward
        http.put(f"/sessions/{sid}/votes/200", json={"choice": "tie"})
        choices[200] = "tie"
        assert http.get(f"/sessions/{sid}/pairs/200").json()["choice"] == "tie"

        state = http.get(f"/sessions/{sid}").json()
        assert state["progress"] == 400 and state["complete"]

        rows = http.get(f"/results/export?sessions={sid}").json()["rows"]
        assert len(rows) == 4
        session = store.get_session(sid)
        expected = {}
        for pair in session.pairs:
            tally = expected.setdefault(pair.baseline, [0, 0, 0])
            choice = choices[pair.index]
            if choice == "tie":
                tally[2] += 1
            elif (choice == "left") == pair.left_is_primary:
                tally[0] += 1
            else:
                tally[1] += 1
        for row in rows:
            assert row["win"] + row["loss"] + row["tie"] == 100
            assert expected[row["baseline"]] == [row["win"], row["loss"], row["tie"]]
        report("secondary: eval service 400-pair session",
               "blinding, revision, accounting all verified")
