#!/usr/bin/env python3
"""Build a pairwise-comparison manifest from generated image directories.

Layout follows the human-evaluation protocol: each baseline gets an equal
share of prompts (default 100, half English / half pseudo-language), and
every pair holds one image from the primary run and one from the
baseline run, generated for the same prompt.
"""

import argparse
from pathlib import Path

import numpy as np
from PIL import Image as PILImage

from llmdiff.corpus.corpus import build_paired_corpus
from llmdiff.pipeline.stages import Workspace
from llmdiff.presets import desk_workspace_config
from llmdiff.seeding import derive_seed
from llmdiff.service.store import ManifestPair, write_manifest


def generate_images(ws, run_dir, out_dir, entries, steps, guidance):
    out_dir.mkdir(parents=True, exist_ok=True)
    bundle = ws.bundle_from_dir(run_dir)
    paths = []
    for i, entry in enumerate(entries):
        path = out_dir / f"{i:04d}.png"
        if not path.exists():
            image = bundle.generate(
                entry.prompt, steps=steps, guidance=guidance,
                seed=derive_seed("manifest", i),
            )
            PILImage.fromarray((image * 255.0 + 0.5).astype(np.uint8)).save(path)
        paths.append(path)
    return paths


def main() -> None:
    parser = argparse.ArgumentParser()
    parser.add_argument("--workspace", default="workspace")
    parser.add_argument("--primary-run", required=True,
                        help="run dir whose model plays the primary side")
    parser.add_argument("--baseline-runs", nargs="+", required=True,
                        help="name=run_dir entries, one per baseline")
    parser.add_argument("--per-baseline", type=int, default=100)
    parser.add_argument("--steps", type=int, default=30)
    parser.add_argument("--guidance", type=float, default=3.0)
    parser.add_argument("--out", required=True)
    args = parser.parse_args()

    ws = Workspace(args.workspace, desk_workspace_config())
    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    image_root = out.parent / "manifest-images"

    baselines = []
    for spec in args.baseline_runs:
        name, _, run_dir = spec.partition("=")
        if not run_dir:
            raise SystemExit(f"--baseline-runs entries look like name=dir, got {spec!r}")
        baselines.append((name, Path(run_dir)))

    pairs = []
    for b_index, (name, run_dir) in enumerate(baselines):
        entries = build_paired_corpus(
            max(1, args.per_baseline // 2),
            languages=ws.config.languages,
            seed=derive_seed("manifest-prompts", b_index),
            registry=ws.registry,
        )[: args.per_baseline]
        primary = generate_images(
            ws, args.primary_run, image_root / "primary" / name, entries,
            args.steps, args.guidance,
        )
        other = generate_images(
            ws, run_dir, image_root / name, entries, args.steps, args.guidance,
        )
        for entry, p_img, b_img in zip(entries, primary, other):
            pairs.append(
                ManifestPair(
                    prompt=entry.prompt.text,
                    baseline=name,
                    primary_image=str(p_img),
                    baseline_image=str(b_img),
                )
            )
    write_manifest(out, pairs)
    print(f"wrote {len(pairs)} pairs ({len(baselines)} baselines) to {out}")


if __name__ == "__main__":
    main()
