"""Desk-scale automatic metrics: CLIP-score analog, Fréchet distance over
encoder features, and an aesthetic predictor fit on encoder embeddings.

Prompts in a pseudo-language are scored against their deterministic
English translation (the word bijection is known), playing the role a
language-capable scoring model does for real multilingual evaluation.
The aesthetic predictor is a ridge regression from image embeddings to
the analytic scene scores, standing in for a learned aesthetics head.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import torch

from llmdiff.errors import InvalidArgumentError, NotInitializedError
from llmdiff.seeding import derive_seed
from llmdiff.corpus.corpus import render_entry
from llmdiff.corpus.captions import Prompt
from llmdiff.text.tokenizer import split_words, tokenize
from llmdiff.text.clip import image_to_tensor

COVARIANCE_SHRINKAGE = 1e-6


# ---------------------------------------------------------------------------
# CLIP-score analog
# ---------------------------------------------------------------------------

def to_english(prompt: Prompt, registry) -> str:
    if prompt.language == "en":
        return prompt.text
    words = split_words(prompt.text)
    return " ".join(registry.decode_word(w, prompt.language) for w in words)


def _cosine(a: torch.Tensor, b: torch.Tensor) -> torch.Tensor:
    return (a * b).sum(-1) / (
        torch.linalg.vector_norm(a, dim=-1) * torch.linalg.vector_norm(b, dim=-1)
    )


def clip_score(clip, vocab, registry, images, prompts) -> float:
    """Mean cosine between image embeddings and pooled text embeddings.

    Non-English prompts are translated to English before encoding.
    """
    if len(images) != len(prompts):
        raise InvalidArgumentError("images and prompts must have equal length")
    cosines = []
    for image, prompt in zip(images, prompts):
        img_emb = clip.encode_image(image)
        text = to_english(prompt, registry)
        txt_emb = clip.text_embedding(tokenize(text, "en", vocab))
        cosines.append(float(_cosine(img_emb, txt_emb)))
    return float(np.mean(cosines))


def embedding_cosine_score(image_emb: np.ndarray, text_emb: np.ndarray) -> float:
    """Mean per-pair cosine over stacked (n, d) embedding arrays."""
    a = torch.from_numpy(np.asarray(image_emb, dtype=np.float64))
    b = torch.from_numpy(np.asarray(text_emb, dtype=np.float64))
    return float(_cosine(a, b).mean())


# ---------------------------------------------------------------------------
# Fréchet distance
# ---------------------------------------------------------------------------

def _mean_cov(feats: np.ndarray, shrink: bool) -> tuple:
    mu = feats.mean(axis=0)
    sigma = np.cov(feats, rowvar=False)
    sigma = np.atleast_2d(sigma)
    if shrink:
        sigma = sigma + COVARIANCE_SHRINKAGE * np.eye(sigma.shape[0])
    return mu, (sigma + sigma.T) / 2.0


def frechet_distance(feats_a: np.ndarray, feats_b: np.ndarray) -> float:
    """||mu_a - mu_b||^2 + Tr(S_a + S_b - 2 (S_a S_b)^{1/2}).

    The cross term uses the symmetric PSD square root via
    (S_a^{1/2} S_b S_a^{1/2})^{1/2}. Covariances get a small diagonal
    shrinkage when a set is too small for full rank.
    """
    feats_a = np.asarray(feats_a, dtype=np.float64)
    feats_b = np.asarray(feats_b, dtype=np.float64)
    if not (np.isfinite(feats_a).all() and np.isfinite(feats_b).all()):
        raise InvalidArgumentError("features must be finite")
    if feats_a.ndim != 2 or feats_b.ndim != 2 or feats_a.shape[1] != feats_b.shape[1]:
        raise InvalidArgumentError("feature sets must be (n, d) with matching d")
    d = feats_a.shape[1]
    shrink = feats_a.shape[0] < d + 1 or feats_b.shape[0] < d + 1
    mu_a, sig_a = _mean_cov(feats_a, shrink)
    mu_b, sig_b = _mean_cov(feats_b, shrink)

    sqrt_a = scipy.linalg.sqrtm(sig_a)
    sqrt_a = np.real(sqrt_a)
    inner = sqrt_a @ sig_b @ sqrt_a
    cross = scipy.linalg.sqrtm((inner + inner.T) / 2.0)
    cross = np.real(cross)

    diff = mu_a - mu_b
    value = float(diff @ diff + np.trace(sig_a) + np.trace(sig_b) - 2.0 * np.trace(cross))
    return max(value, 0.0)


# ---------------------------------------------------------------------------
# Aesthetic predictor over image embeddings
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class AestheticScorer:
    weights: np.ndarray  # (d + 1,), last entry is the bias

    @classmethod
    def fit(cls, feats: np.ndarray, scores: np.ndarray, ridge: float = 1e-2
            ) -> "AestheticScorer":
        x = np.concatenate([feats, np.ones((feats.shape[0], 1))], axis=1)
        a = x.T @ x + ridge * np.eye(x.shape[1])
        w = np.linalg.solve(a, x.T @ np.asarray(scores, dtype=np.float64))
        return cls(weights=w)

    def predict(self, feats: np.ndarray) -> np.ndarray:
        x = np.concatenate([feats, np.ones((feats.shape[0], 1))], axis=1)
        return np.clip(x @ self.weights, 0.0, 10.0)


# ---------------------------------------------------------------------------
# Run evaluation
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MetricReport:
    fid: float
    clip_s: float
    aesthetic: float
    per_language: dict   # language -> {"fid": .., "clip_s": .., "aesthetic": ..}

    def to_dict(self) -> dict:
        return {
            "fid": self.fid,
            "clip_s": self.clip_s,
            "aesthetic": self.aesthetic,
            "per_language": self.per_language,
        }

    def render(self) -> str:
        rows = [["", "FID", "CLIP-s", "Aes"]]
        rows.append(["overall", f"{self.fid:.3f}", f"{self.clip_s:.4f}",
                     f"{self.aesthetic:.2f}"])
        for lang in sorted(self.per_language):
            m = self.per_language[lang]
            rows.append([lang, f"{m['fid']:.3f}", f"{m['clip_s']:.4f}",
                         f"{m['aesthetic']:.2f}"])
        widths = [max(len(r[i]) for r in rows) for i in range(4)]
        return "\n".join(
            "  ".join(c.rjust(w) for c, w in zip(row, widths)) for row in rows
        )


def image_embeddings(clip, images) -> np.ndarray:
    batch = torch.stack([image_to_tensor(im) for im in images])
    with torch.no_grad():
        return clip.image_features(batch).numpy()


def evaluate_images(clip, vocab, registry, generated_by_lang: dict,
                    entries_by_lang: dict, reference_feats_by_lang: dict,
                    scorer: AestheticScorer) -> MetricReport:
    """Metrics for already-generated images, per language and pooled."""
    per_language = {}
    all_gen_feats, all_ref_feats, all_cos = [], [], []
    for lang in sorted(entries_by_lang):
        entries = entries_by_lang[lang]
        images = generated_by_lang[lang]
        gen_feats = image_embeddings(clip, images)
        ref_feats = reference_feats_by_lang[lang]
        cosines = []
        for image, entry in zip(images, entries):
            img_emb = clip.encode_image(image)
            text = to_english(entry.prompt, registry)
            txt_emb = clip.text_embedding(tokenize(text, "en", vocab))
            cosines.append(float(_cosine(img_emb, txt_emb)))
        per_language[lang] = {
            "fid": frechet_distance(gen_feats, ref_feats),
            "clip_s": float(np.mean(cosines)),
            "aesthetic": float(scorer.predict(gen_feats).mean()),
        }
        all_gen_feats.append(gen_feats)
        all_ref_feats.append(ref_feats)
        all_cos.extend(cosines)
    gen = np.concatenate(all_gen_feats)
    ref = np.concatenate(all_ref_feats)
    return MetricReport(
        fid=frechet_distance(gen, ref),
        clip_s=float(np.mean(all_cos)),
        aesthetic=float(scorer.predict(gen).mean()),
        per_language=per_language,
    )


def fit_reference_scorer(clip, entries, resolution: int = 64) -> tuple:
    """Render references, embed them, and fit the aesthetic predictor.

    Returns (scorer, feats_by_lang, unique renders keyed by scene seed).
    """
    renders = {}
    for e in entries:
        if e.scene_seed not in renders:
            renders[e.scene_seed] = render_entry(e, resolution)
    seeds = sorted(renders)
    feats = image_embeddings(clip, [renders[s] for s in seeds])
    feat_by_seed = {s: feats[i] for i, s in enumerate(seeds)}
    score_by_seed = {e.scene_seed: e.aesthetic for e in entries}
    scorer = AestheticScorer.fit(
        np.stack([feat_by_seed[s] for s in seeds]),
        np.array([score_by_seed[s] for s in seeds]),
    )
    return scorer, feat_by_seed, renders


def evaluate_run(bundle, entries, steps: int = 30, guidance: float = 3.0,
                 seed: int = 0, resolution: int = 64) -> MetricReport:
    """Generate one image per prompt at fixed seeds and compute all metrics."""
    if not entries:
        raise InvalidArgumentError("empty evaluation corpus")
    scorer, feat_by_seed, _ = fit_reference_scorer(bundle.clip, entries, resolution)
    entries_by_lang, generated, ref_feats = {}, {}, {}
    for e in entries:
        entries_by_lang.setdefault(e.prompt.language, []).append(e)
    for lang, lang_entries in sorted(entries_by_lang.items()):
        images = []
        for e in lang_entries:
            images.append(
                bundle.generate(
                    e.prompt, steps=steps, guidance=guidance,
                    seed=derive_seed("eval-sample", seed, lang, e.scene_seed),
                )
            )
        generated[lang] = images
        ref_feats[lang] = np.stack([feat_by_seed[e.scene_seed] for e in lang_entries])
    return evaluate_images(
        bundle.clip, bundle.vocab, bundle.registry,
        generated, entries_by_lang, ref_feats, scorer,
    )


# ---------------------------------------------------------------------------
# Alignment-quality report across loss variants
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class VariantRow:
    name: str
    overall: float
    per_language: dict


def loss_variant_report(entries, adapters: dict, clip, lm, vocab, registry
                        ) -> list:
    """CLIP-score analog of text features against reference renders.

    `adapters` maps row name -> QueryAdapter, or -> None for the baseline
    row that uses raw CLIP text features of the prompt as fed (so the
    baseline sees pseudo-language tokens it was never trained on, just as
    a stock CLIP conditioner would).
    """
    if not entries:
        raise InvalidArgumentError("empty evaluation corpus")
    for name, adapter in adapters.items():
        if adapter is None and name != "baseline":
            raise NotInitializedError(f"variant {name!r} has no trained adapter")
    ref_emb = {}
    for e in entries:
        if e.scene_seed not in ref_emb:
            ref_emb[e.scene_seed] = clip.encode_image(render_entry(e))
    rows = []
    for name in adapters:
        adapter = adapters[name]
        per_lang_vals = {}
        for e in entries:
            tokens = tokenize(e.prompt.text, e.prompt.language, vocab)
            with torch.no_grad():
                if adapter is None:
                    feats = clip.encode_text(tokens)
                else:
                    n_rows = min(adapter.config.queries, 77 * ((tokens.count + 76) // 77))
                    feats = adapter(lm.encode(tokens), rows=n_rows)
                emb = clip.pool_tokens(feats, count=tokens.count)
            cos = float(_cosine(emb, ref_emb[e.scene_seed]))
            per_lang_vals.setdefault(e.prompt.language, []).append(cos)
        per_language = {k: float(np.mean(v)) for k, v in per_lang_vals.items()}
        overall = float(np.mean([c for v in per_lang_vals.values() for c in v]))
        rows.append(VariantRow(name=name, overall=overall, per_language=per_language))
    return rows


def render_variant_table(rows) -> str:
    langs = sorted({l for r in rows for l in r.per_language})
    table = [["Model", "CLIP-s"] + [f"CLIP-s({l})" for l in langs]]
    for r in rows:
        table.append(
            [r.name, f"{r.overall:.4f}"]
            + [f"{r.per_language.get(l, float('nan')):.4f}" for l in langs]
        )
    widths = [max(len(row[i]) for row in table) for i in range(len(table[0]))]
    return "\n".join(
        "  ".join(c.ljust(w) for c, w in zip(row, widths)) for row in table
    )
